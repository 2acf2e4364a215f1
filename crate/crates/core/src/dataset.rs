//! Classification datasets, the `(d, y)` group partition, and the synthetic
//! generator used by the benchmark.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A feature matrix with one protected attribute `d` and one outcome `y`
/// per row. Labels are stored as dense ids; the original label strings are
/// kept in `d_values` / `y_values` (id order = first appearance order).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    p: usize,
    feature_names: Vec<String>,
    d_labels: Vec<usize>,
    y_labels: Vec<usize>,
    d_values: Vec<String>,
    y_values: Vec<String>,
    d_name: String,
    y_name: String,
}

impl Dataset {
    /// Builds a dataset from a row-major `n x p` feature buffer.
    ///
    /// `d_values` and `y_values` declare the label sets; every id in
    /// `d_labels` / `y_labels` must index into them, and each set needs at
    /// least two values.
    pub fn new(
        features: Vec<f64>,
        p: usize,
        d_labels: Vec<usize>,
        y_labels: Vec<usize>,
        d_values: Vec<String>,
        y_values: Vec<String>,
    ) -> Result<Self> {
        let n = d_labels.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        if y_labels.len() != n || features.len() != n * p {
            return Err(Error::usage(format!(
                "inconsistent sizes: {} d labels, {} y labels, {} feature values for p = {}",
                n,
                y_labels.len(),
                features.len(),
                p
            )));
        }
        if d_values.len() < 2 {
            return Err(Error::Data("single protected class".into()));
        }
        if y_values.len() < 2 {
            return Err(Error::Data("single outcome class".into()));
        }
        if let Some(&bad) = d_labels.iter().find(|&&d| d >= d_values.len()) {
            return Err(Error::usage(format!("protected label id {bad} out of range")));
        }
        if let Some(&bad) = y_labels.iter().find(|&&y| y >= y_values.len()) {
            return Err(Error::usage(format!("outcome label id {bad} out of range")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::DataCell {
                row: pos / p + 1,
                column: format!("x{}", pos % p + 1),
                message: "non-finite feature value".into(),
            });
        }
        Ok(Dataset {
            features,
            n,
            p,
            feature_names: (1..=p).map(|j| format!("x{j}")).collect(),
            d_labels,
            y_labels,
            d_values,
            y_values,
            d_name: "d".into(),
            y_name: "y".into(),
        })
    }

    /// Convenience constructor for numeric label ids `0..n_d` and `0..n_y`.
    pub fn from_rows(
        rows: &[Vec<f64>],
        d_labels: Vec<usize>,
        y_labels: Vec<usize>,
        n_d: usize,
        n_y: usize,
    ) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::usage("ragged feature rows"));
        }
        let features = rows.iter().flatten().copied().collect();
        Dataset::new(
            features,
            p,
            d_labels,
            y_labels,
            (0..n_d).map(|v| v.to_string()).collect(),
            (0..n_y).map(|v| v.to_string()).collect(),
        )
    }

    pub fn with_names(
        mut self,
        feature_names: Vec<String>,
        d_name: impl Into<String>,
        y_name: impl Into<String>,
    ) -> Result<Self> {
        if feature_names.len() != self.p {
            return Err(Error::usage("feature name count does not match p"));
        }
        self.feature_names = feature_names;
        self.d_name = d_name.into();
        self.y_name = y_name.into();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.features.iter().skip(j).step_by(self.p).copied()
    }

    pub fn d(&self, i: usize) -> usize {
        self.d_labels[i]
    }

    pub fn y(&self, i: usize) -> usize {
        self.y_labels[i]
    }

    pub fn d_labels(&self) -> &[usize] {
        &self.d_labels
    }

    pub fn y_labels(&self) -> &[usize] {
        &self.y_labels
    }

    pub fn n_d(&self) -> usize {
        self.d_values.len()
    }

    pub fn n_y(&self) -> usize {
        self.y_values.len()
    }

    pub fn d_values(&self) -> &[String] {
        &self.d_values
    }

    pub fn y_values(&self) -> &[String] {
        &self.y_values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn d_name(&self) -> &str {
        &self.d_name
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    /// Rows `indices` in the given order, duplicates allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            if i >= self.n {
                return Err(Error::usage(format!("row {i} out of range (n = {})", self.n)));
            }
            features.extend_from_slice(self.row(i));
        }
        let mut out = Dataset::new(
            features,
            self.p,
            indices.iter().map(|&i| self.d_labels[i]).collect(),
            indices.iter().map(|&i| self.y_labels[i]).collect(),
            self.d_values.clone(),
            self.y_values.clone(),
        )?;
        out.feature_names = self.feature_names.clone();
        out.d_name = self.d_name.clone();
        out.y_name = self.y_name.clone();
        Ok(out)
    }

    /// SHA-256 over shape, feature bits and labels, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.p as u64).to_le_bytes());
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        for (&d, &y) in self.d_labels.iter().zip(&self.y_labels) {
            h.update((d as u64).to_le_bytes());
            h.update((y as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes the dataset as CSV: feature columns, then the protected and
    /// outcome columns with their original label strings.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.d_name);
        header.push(&self.y_name);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.p + 2);
        for i in 0..self.n {
            record.clear();
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            record.push(self.d_values[self.d_labels[i]].clone());
            record.push(self.y_values[self.y_labels[i]].clone());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column selection for [`load_csv_with`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub d_column: String,
    pub y_column: String,
    /// Also use the protected column as a numeric feature.
    pub include_d_in_features: bool,
}

impl LoadOptions {
    pub fn new(d_column: impl Into<String>, y_column: impl Into<String>) -> Self {
        LoadOptions {
            d_column: d_column.into(),
            y_column: y_column.into(),
            include_d_in_features: false,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, d_column: &str, y_column: &str) -> Result<Dataset> {
    load_csv_with(path, &LoadOptions::new(d_column, y_column))
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, opts)
}

/// Parses a headered, comma-delimited CSV. Every column other than the two
/// label columns must be numeric.
pub fn read_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(b',')
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::config(format!("column `{name}` not found in header")))
    };
    let d_col = find(&opts.d_column)?;
    let y_col = find(&opts.y_column)?;
    if d_col == y_col {
        return Err(Error::config("protected and outcome columns must differ"));
    }
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| j != y_col && (j != d_col || opts.include_d_in_features))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::config("no feature columns"));
    }

    let mut features = Vec::new();
    let mut d_ids = Vec::new();
    let mut y_ids = Vec::new();
    let mut d_map = LabelMap::default();
    let mut y_map = LabelMap::default();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() != headers.len() {
            return Err(Error::DataCell {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for &j in &feature_cols {
            let cell = rec[j].trim();
            let value: f64 = cell.parse().map_err(|_| Error::DataCell {
                row,
                column: headers[j].clone(),
                message: format!("non-numeric value `{cell}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::DataCell {
                    row,
                    column: headers[j].clone(),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            features.push(value);
        }
        d_ids.push(d_map.id(rec[d_col].trim()));
        y_ids.push(y_map.id(rec[y_col].trim()));
    }
    if d_ids.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }
    if y_map.values.len() < 2 {
        return Err(Error::Data("single outcome class".into()));
    }
    if d_map.values.len() < 2 {
        return Err(Error::Data("single protected class".into()));
    }
    let names = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    Dataset::new(
        features,
        feature_cols.len(),
        d_ids,
        y_ids,
        d_map.values,
        y_map.values,
    )?
    .with_names(names, headers[d_col].clone(), headers[y_col].clone())
}

#[derive(Default)]
struct LabelMap {
    ids: HashMap<String, usize>,
    values: Vec<String>,
}

impl LabelMap {
    fn id(&mut self, label: &str) -> usize {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.values.len();
        self.ids.insert(label.to_string(), id);
        self.values.push(label.to_string());
        id
    }
}

/// Divides every feature column by its sample standard deviation (n - 1
/// denominator). Zero-variance columns, and all columns when n < 2, are
/// returned unchanged. No centering is applied.
pub fn standardize(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    if ds.n < 2 {
        return out;
    }
    for j in 0..ds.p {
        let mean = ds.column(j).sum::<f64>() / ds.n as f64;
        let var = ds.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / (ds.n - 1) as f64;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            for i in 0..ds.n {
                out.features[i * ds.p + j] /= sd;
            }
        }
    }
    out
}

/// Outcome marginal `p_Y`, or any target vector indexed by outcome id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalY {
    pub probs: Vec<f64>,
}

impl MarginalY {
    pub fn new(probs: Vec<f64>) -> Self {
        MarginalY { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn marginal_y(ds: &Dataset) -> MarginalY {
    let mut counts = vec![0usize; ds.n_y()];
    for &y in &ds.y_labels {
        counts[y] += 1;
    }
    MarginalY {
        probs: counts.iter().map(|&c| c as f64 / ds.n as f64).collect(),
    }
}

/// Partition of the row indices by observed `(d, y)` pair, ordered
/// lexicographically by `(d, y)` id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndex {
    pub groups: Vec<Vec<usize>>,
    pub group_of: Vec<usize>,
    pub group_d: Vec<usize>,
    pub group_y: Vec<usize>,
    n_d: usize,
    n_y: usize,
}

impl GroupIndex {
    pub fn n(&self) -> usize {
        self.group_of.len()
    }

    /// Number of nonempty groups `L`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn group_id(&self, d: usize, y: usize) -> Option<usize> {
        (0..self.len()).find(|&l| self.group_d[l] == d && self.group_y[l] == y)
    }

    /// Protected classes with at least one sample, ascending.
    pub fn observed_d(&self) -> Vec<usize> {
        let mut ds: Vec<usize> = self.group_d.clone();
        ds.dedup();
        ds
    }

    /// All sample indices with protected class `d`.
    pub fn d_members(&self, d: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.len())
            .filter(|&l| self.group_d[l] == d)
            .flat_map(|l| self.groups[l].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Group sizes, i.e. group sums of the unit weight vector.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

pub fn group_index(ds: &Dataset) -> GroupIndex {
    let (n_d, n_y) = (ds.n_d(), ds.n_y());
    let mut slot = vec![usize::MAX; n_d * n_y];
    for i in 0..ds.n {
        slot[ds.d_labels[i] * n_y + ds.y_labels[i]] = 0;
    }
    let mut group_d = Vec::new();
    let mut group_y = Vec::new();
    for (k, s) in slot.iter_mut().enumerate() {
        if *s == 0 {
            *s = group_d.len();
            group_d.push(k / n_y);
            group_y.push(k % n_y);
        }
    }
    let mut groups = vec![Vec::new(); group_d.len()];
    let group_of: Vec<usize> = (0..ds.n)
        .map(|i| {
            let l = slot[ds.d_labels[i] * n_y + ds.y_labels[i]];
            groups[l].push(i);
            l
        })
        .collect();
    GroupIndex {
        groups,
        group_of,
        group_d,
        group_y,
        n_d,
        n_y,
    }
}

/// Synthetic benchmark data: `D ~ Bernoulli(0.5)`, `X1 ~ U[0,10]` when
/// `D = 1` and `X1 = 0` otherwise, `X2 ~ N(0, 5^2)`, and
/// `Y = 1[X1 + X2 + noise > mean(X1 + X2)]` with `noise ~ N(0, 1)`.
pub fn generate_synthetic(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("synthetic dataset needs n >= 2"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unif = Uniform::new(0.0, 10.0).expect("valid range");
    let x2_dist = Normal::new(0.0, 5.0).expect("valid sd");
    let noise_dist = Normal::new(0.0, 1.0).expect("valid sd");

    let mut d = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        let di = usize::from(rng.random_bool(0.5));
        x1.push(if di == 1 { unif.sample(&mut rng) } else { 0.0 });
        x2.push(x2_dist.sample(&mut rng));
        noise.push(noise_dist.sample(&mut rng));
        d.push(di);
    }
    let mean = x1.iter().zip(&x2).map(|(a, b)| a + b).sum::<f64>() / n as f64;
    let y = (0..n)
        .map(|i| usize::from(x1[i] + x2[i] + noise[i] > mean))
        .collect();
    let features = x1.iter().zip(&x2).flat_map(|(&a, &b)| [a, b]).collect();
    Dataset::new(
        features,
        2,
        d,
        y,
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
    )?
    .with_names(vec!["x1".into(), "x2".into()], "d", "y")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_std(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    #[test]
    fn loads_small_csv() {
        let text = "x1,x2,sex,label\n1,2,m,0\n3,4,f,1\n5,6,m,1\n7,8,f,0\n";
        let ds = read_csv(text.as_bytes(), &LoadOptions::new("sex", "label")).unwrap();
        assert_eq!((ds.n(), ds.p(), ds.n_d(), ds.n_y()), (4, 2, 2, 2));
        assert_eq!(ds.row(2), &[5.0, 6.0]);
        assert_eq!(ds.d_values(), &["m".to_string(), "f".to_string()]);
        assert_eq!(ds.d_labels(), &[0, 1, 0, 1]);
        assert_eq!(ds.feature_names(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn protected_column_can_be_a_feature() {
        let text = "x1,sex,label\n1,0,0\n3,1,1\n";
        let mut opts = LoadOptions::new("sex", "label");
        opts.include_d_in_features = true;
        let ds = read_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(ds.p(), 2);
        assert_eq!(ds.row(1), &[3.0, 1.0]);
    }

    #[test]
    fn single_outcome_class_is_rejected() {
        let text = "x1,d,y\n1,0,1\n2,1,1\n";
        let err = read_csv(text.as_bytes(), &LoadOptions::new("d", "y")).unwrap_err();
        assert!(err.to_string().contains("single outcome class"), "{err}");
    }

    #[test]
    fn nan_cell_reports_row() {
        let text = "x1,d,y\n1,0,1\n2,1,0\nNaN,1,1\n";
        match read_csv(text.as_bytes(), &LoadOptions::new("d", "y")).unwrap_err() {
            Error::DataCell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x1");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_column_is_config_error() {
        let text = "x1,d,y\n1,0,1\n";
        let err = read_csv(text.as_bytes(), &LoadOptions::new("sex", "y")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn empty_file_is_data_error() {
        let text = "x1,d,y\n";
        let err = read_csv(text.as_bytes(), &LoadOptions::new("d", "y")).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn non_numeric_feature_is_rejected() {
        let text = "x1,d,y\n1,0,1\nabc,1,0\n";
        let err = read_csv(text.as_bytes(), &LoadOptions::new("d", "y")).unwrap_err();
        assert!(matches!(err, Error::DataCell { row: 2, .. }));
    }

    #[test]
    fn standardize_unit_std() {
        let ds = Dataset::from_rows(
            &[vec![2.0, 1.0], vec![4.0, -3.0], vec![6.0, 10.0]],
            vec![0, 1, 0],
            vec![0, 1, 1],
            2,
            2,
        )
        .unwrap();
        let st = standardize(&ds);
        for j in 0..2 {
            let col: Vec<f64> = st.column(j).collect();
            assert_relative_eq!(sample_std(&col), 1.0, epsilon = 1e-12);
        }
        let c0: Vec<f64> = st.column(0).collect();
        assert_relative_eq!(c0[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_constant_column_unchanged() {
        let ds = Dataset::from_rows(
            &[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]],
            vec![0, 1, 0],
            vec![0, 1, 1],
            2,
            2,
        )
        .unwrap();
        let st = standardize(&ds);
        assert_eq!(st.column(0).collect::<Vec<_>>(), vec![5.0, 5.0, 5.0]);
        assert_eq!(st.d_labels(), ds.d_labels());
    }

    #[test]
    fn marginals() {
        let rows = vec![vec![0.0]; 4];
        let ds = Dataset::from_rows(&rows, vec![0, 1, 0, 1], vec![0, 1, 0, 1], 2, 2).unwrap();
        assert_eq!(marginal_y(&ds).probs, vec![0.5, 0.5]);
        let ds = Dataset::from_rows(&rows, vec![0, 1, 0, 1], vec![0, 0, 0, 1], 2, 2).unwrap();
        assert_eq!(marginal_y(&ds).probs, vec![0.75, 0.25]);
        let ds = Dataset::from_rows(&[vec![1.0]], vec![0], vec![1], 2, 2).unwrap();
        assert_eq!(marginal_y(&ds).probs, vec![0.0, 1.0]);
    }

    #[test]
    fn groups_singletons_and_counts() {
        let rows = vec![vec![0.0]; 4];
        let ds = Dataset::from_rows(&rows, vec![0, 0, 1, 1], vec![0, 1, 0, 1], 2, 2).unwrap();
        let gi = group_index(&ds);
        assert_eq!(gi.len(), 4);
        assert_eq!(gi.groups, vec![vec![0], vec![1], vec![2], vec![3]]);

        let rows = vec![vec![0.0]; 3];
        let ds = Dataset::from_rows(&rows, vec![0, 0, 1], vec![0, 0, 1], 2, 2).unwrap();
        let gi = group_index(&ds);
        assert_eq!(gi.groups, vec![vec![0, 1], vec![2]]);
        assert_eq!((gi.group_d.clone(), gi.group_y.clone()), (vec![0, 1], vec![0, 1]));

        let ds = Dataset::from_rows(&rows, vec![0, 0, 0], vec![0, 0, 0], 2, 2).unwrap();
        assert_eq!(group_index(&ds).len(), 1);
    }

    #[test]
    fn group_order_is_lexicographic() {
        let rows = vec![vec![0.0]; 4];
        let ds = Dataset::from_rows(&rows, vec![1, 0, 1, 0], vec![1, 1, 0, 0], 2, 2).unwrap();
        let gi = group_index(&ds);
        assert_eq!(gi.group_d, vec![0, 0, 1, 1]);
        assert_eq!(gi.group_y, vec![0, 1, 0, 1]);
        assert_eq!(gi.group_of, vec![3, 1, 2, 0]);
        assert_eq!(gi.d_members(1), vec![0, 2]);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(2000, 7).unwrap();
        let b = generate_synthetic(2000, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(2000, 8).unwrap());
    }

    #[test]
    fn synthetic_x1_zero_when_d0() {
        let ds = generate_synthetic(2000, 3).unwrap();
        for i in 0..ds.n() {
            if ds.d(i) == 0 {
                assert_eq!(ds.row(i)[0], 0.0);
            }
        }
    }

    #[test]
    fn synthetic_outcome_rate_near_half() {
        let ds = generate_synthetic(10_000, 1).unwrap();
        let rate = marginal_y(&ds).probs[1];
        assert!((rate - 0.5).abs() <= 0.05, "rate = {rate}");
    }

    #[test]
    fn synthetic_x1_correlates_with_d() {
        let ds = generate_synthetic(10_000, 11).unwrap();
        let mean_for = |d: usize| {
            let v: Vec<f64> = (0..ds.n()).filter(|&i| ds.d(i) == d).map(|i| ds.row(i)[0]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert_eq!(mean_for(0), 0.0);
        assert!(mean_for(1) > 0.0);
    }

    #[test]
    fn synthetic_rejects_tiny_n() {
        assert!(matches!(generate_synthetic(1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn csv_round_trip() {
        let ds = generate_synthetic(50, 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &LoadOptions::new("d", "y")).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.y_labels().len(), 50);
        // label ids follow first appearance, so compare label strings
        for i in 0..50 {
            assert_eq!(back.d_values()[back.d(i)], ds.d_values()[ds.d(i)]);
            assert_eq!(back.y_values()[back.y(i)], ds.y_values()[ds.y(i)]);
        }
    }
}
