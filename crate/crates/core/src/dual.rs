//! The Lagrangian dual function `F(lambda) = sum_i max_l (v_l - c_il)` with
//! `v = A^T lambda`, its subgradient, and the separation oracle.

use rayon::prelude::*;

use crate::cost::CompressedCost;
use crate::error::{Error, Result};
use crate::fairness::ConstraintMatrix;

/// Rows per parallel work unit. Partial sums are merged in chunk order so the
/// result does not depend on the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    pub subgradient: Vec<f64>,
    /// Maximizing group per row, smallest group index on ties.
    pub chosen_group: Vec<usize>,
    /// Candidate weights: how many rows map onto each column.
    pub column_counts: Vec<u64>,
    /// Transport cost of the row-max plan.
    pub primal_objective: f64,
    /// Rows assigned to each group.
    pub group_counts: Vec<u64>,
    /// Rows whose maximum is attained by more than one group.
    pub ties: usize,
}

impl DualEvaluation {
    pub fn group_counts_f64(&self) -> Vec<f64> {
        self.group_counts.iter().map(|&c| c as f64).collect()
    }
}

#[derive(Default)]
struct Partial {
    value: f64,
    primal: f64,
    ties: usize,
    counts: Vec<u64>,
}

pub fn evaluate(lambda: &[f64], cc: &CompressedCost, cm: &ConstraintMatrix) -> Result<DualEvaluation> {
    if lambda.len() != cm.m() {
        return Err(Error::usage(format!(
            "lambda has {} entries, constraint matrix has {} rows",
            lambda.len(),
            cm.m()
        )));
    }
    if cc.groups() != cm.groups() {
        return Err(Error::usage(format!(
            "cost table has {} groups, constraint matrix has {}",
            cc.groups(),
            cm.groups()
        )));
    }
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::usage("lambda must be finite"));
    }
    let (n, l) = (cc.n(), cc.groups());
    let v = cm.group_values(lambda);

    let mut chosen = vec![0usize; n];
    let partials: Vec<Partial> = chosen
        .par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(c, out)| {
            let mut p = Partial {
                counts: vec![0; l],
                ..Partial::default()
            };
            for (off, slot) in out.iter_mut().enumerate() {
                let row = cc.row_min(c * CHUNK + off);
                let mut best = 0;
                let mut best_val = v[0] - row[0];
                let mut tied = false;
                for g in 1..l {
                    let s = v[g] - row[g];
                    if s > best_val {
                        best = g;
                        best_val = s;
                        tied = false;
                    } else if s == best_val {
                        tied = true;
                    }
                }
                *slot = best;
                p.value += best_val;
                p.primal += row[best];
                p.counts[best] += 1;
                p.ties += usize::from(tied);
            }
            p
        })
        .collect();

    let mut value = 0.0;
    let mut primal = 0.0;
    let mut ties = 0;
    let mut group_counts = vec![0u64; l];
    for p in &partials {
        value += p.value;
        primal += p.primal;
        ties += p.ties;
        for (a, b) in group_counts.iter_mut().zip(&p.counts) {
            *a += b;
        }
    }
    let mut column_counts = vec![0u64; n];
    for (i, &g) in chosen.iter().enumerate() {
        column_counts[cc.argmin(i, g)] += 1;
    }
    let sums: Vec<f64> = group_counts.iter().map(|&c| c as f64).collect();
    Ok(DualEvaluation {
        value,
        subgradient: cm.margins(&sums),
        chosen_group: chosen,
        column_counts,
        primal_objective: primal,
        group_counts,
        ties,
    })
}

/// A hyperplane `g^T lambda >= g^T lambda*` for every minimizer `lambda*`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cut {
    /// `lambda >= 0`: the subgradient of `F` at the query point.
    Objective(Box<DualEvaluation>),
    /// Some `lambda_j < 0`: `g = -e_j` for the smallest such `j`.
    Feasibility { index: usize, g: Vec<f64> },
}

impl Cut {
    pub fn normal(&self) -> &[f64] {
        match self {
            Cut::Objective(e) => &e.subgradient,
            Cut::Feasibility { g, .. } => g,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Cut::Objective(e) => Some(e.value),
            Cut::Feasibility { .. } => None,
        }
    }
}

pub fn separation_oracle(lambda: &[f64], cc: &CompressedCost, cm: &ConstraintMatrix) -> Result<Cut> {
    if let Some(index) = lambda.iter().position(|&x| x < 0.0) {
        let mut g = vec![0.0; lambda.len()];
        g[index] = -1.0;
        return Ok(Cut::Feasibility { index, g });
    }
    Ok(Cut::Objective(Box::new(evaluate(lambda, cc, cm)?)))
}
