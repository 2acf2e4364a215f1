//! Integer weights from dual solutions, objective gaps, and dataset
//! materialization.

use std::io::{Read, Write};

use serde::Serialize;

use crate::cost::CompressedCost;
use crate::dataset::Dataset;
use crate::dual::evaluate;
use crate::error::{Error, Result};
use crate::fairness::ConstraintMatrix;

/// Nonnegative integer weights summing to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightVector {
    weights: Vec<u64>,
}

impl WeightVector {
    pub fn new(weights: Vec<u64>) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        if total != weights.len() as u64 {
            return Err(Error::usage(format!(
                "weights sum to {total}, expected {}",
                weights.len()
            )));
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector { weights: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.weights
    }

    pub fn into_inner(self) -> Vec<u64> {
        self.weights
    }

    /// CSV with header `index,weight`, 0-based indices, zero rows included.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "weight"])?;
        for (i, v) in self.weights.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut weights = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize, name: &str| -> Result<u64> {
                rec.get(j)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::DataCell {
                        row: r + 1,
                        column: name.into(),
                        message: "expected a nonnegative integer".into(),
                    })
            };
            if parse(0, "index")? != r as u64 {
                return Err(Error::DataCell {
                    row: r + 1,
                    column: "index".into(),
                    message: "indices must be 0, 1, 2, ... in order".into(),
                });
            }
            weights.push(parse(1, "weight")?);
        }
        WeightVector::new(weights)
    }
}

/// Weights read off the row-max plan at `lambda`: each row sends its unit of
/// mass to its nearest column in the maximizing group.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub theta: WeightVector,
    pub objective: f64,
    pub tie_count: usize,
}

pub fn recover_weights(lambda: &[f64], cc: &CompressedCost, cm: &ConstraintMatrix) -> Result<Recovered> {
    if lambda.iter().any(|&v| v < 0.0) {
        return Err(Error::usage("lambda must be nonnegative"));
    }
    let e = evaluate(lambda, cc, cm)?;
    Ok(Recovered {
        theta: WeightVector::new(e.column_counts)?,
        objective: e.primal_objective,
        tie_count: e.ties,
    })
}

/// `|a - b| / (|a| + |b| + 1)`.
pub fn relative_objective_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + 1.0)
}

/// Repeats each item `theta[i]` times, in original order.
pub fn materialize_items<T: Clone>(items: &[T], theta: &WeightVector) -> Result<Vec<T>> {
    if items.len() != theta.len() {
        return Err(Error::usage(format!(
            "{} weights for {} rows",
            theta.len(),
            items.len()
        )));
    }
    let mut out = Vec::with_capacity(items.len());
    for (item, &w) in items.iter().zip(theta.as_slice()) {
        for _ in 0..w {
            out.push(item.clone());
        }
    }
    Ok(out)
}

pub fn materialize(ds: &Dataset, theta: &WeightVector) -> Result<Dataset> {
    let idx: Vec<usize> = (0..ds.n()).collect();
    ds.select_rows(&materialize_items(&idx, theta)?)
}
