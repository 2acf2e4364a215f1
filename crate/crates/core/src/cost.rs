//! Ground costs and the row-by-group minima table.
//!
//! Only the `n x L` table of per-group row minima is ever stored; the dense
//! `n x n` cost matrix is streamed one row at a time.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, GroupIndex};
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 8] = b"FWASPCC1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
    SquaredEuclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let it = a.iter().zip(b);
        match self {
            Metric::Euclidean => it.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::SquaredEuclidean => it.map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Manhattan => it.map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::SquaredEuclidean => "squared-euclidean",
            Metric::Manhattan => "manhattan",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "squared-euclidean" | "sqeuclidean" => Ok(Metric::SquaredEuclidean),
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            other => Err(Error::config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Euclidean distance between feature rows `i` and `j`.
pub fn pair_cost(ds: &Dataset, i: usize, j: usize) -> Result<f64> {
    pair_cost_with(ds, i, j, Metric::Euclidean)
}

pub fn pair_cost_with(ds: &Dataset, i: usize, j: usize, metric: Metric) -> Result<f64> {
    let n = ds.n();
    if i >= n || j >= n {
        return Err(Error::usage(format!("index pair ({i}, {j}) out of range for n = {n}")));
    }
    Ok(metric.distance(ds.row(i), ds.row(j)))
}

/// Entry `(i, l)` holds `min_{k in G_l} C[i][k]` and the smallest column
/// index attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedCost {
    n: usize,
    l: usize,
    min: Vec<f64>,
    argmin: Vec<u32>,
}

impl CompressedCost {
    /// Builds a table directly, e.g. for hand-made instances.
    pub fn from_parts(n: usize, l: usize, min: Vec<f64>, argmin: Vec<u32>) -> Result<Self> {
        if min.len() != n * l || argmin.len() != n * l {
            return Err(Error::usage(format!(
                "compressed cost buffers do not match n = {n}, L = {l}"
            )));
        }
        if min.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("compressed cost entries must be finite"));
        }
        Ok(CompressedCost { n, l, min, argmin })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> usize {
        self.l
    }

    pub fn min(&self, i: usize, l: usize) -> f64 {
        self.min[i * self.l + l]
    }

    pub fn argmin(&self, i: usize, l: usize) -> usize {
        self.argmin[i * self.l + l] as usize
    }

    pub fn row_min(&self, i: usize) -> &[f64] {
        &self.min[i * self.l..(i + 1) * self.l]
    }

    pub fn row_argmin(&self, i: usize) -> &[u32] {
        &self.argmin[i * self.l..(i + 1) * self.l]
    }

    pub fn max_cost(&self) -> f64 {
        self.min.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.l as u64).to_le_bytes())?;
        for v in &self.min {
            w.write_all(&v.to_le_bytes())?;
        }
        for a in &self.argmin {
            w.write_all(&a.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> std::result::Result<Self, String> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| e.to_string())?;
        if &magic != CACHE_MAGIC {
            return Err("bad magic".into());
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|e| e.to_string())?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(|e| e.to_string())?;
        let l = u64::from_le_bytes(word) as usize;
        let len = n.checked_mul(l).ok_or("header overflow")?;
        let mut min = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word).map_err(|e| e.to_string())?;
            min.push(f64::from_le_bytes(word));
        }
        let mut argmin = Vec::with_capacity(len);
        let mut half = [0u8; 4];
        for _ in 0..len {
            r.read_exact(&mut half).map_err(|e| e.to_string())?;
            argmin.push(u32::from_le_bytes(half));
        }
        if r.read(&mut half).map_err(|e| e.to_string())? != 0 {
            return Err("trailing bytes".into());
        }
        CompressedCost::from_parts(n, l, min, argmin).map_err(|e| e.to_string())
    }
}

pub fn compress(ds: &Dataset, gi: &GroupIndex) -> CompressedCost {
    compress_with(ds, gi, Metric::Euclidean)
}

/// Streams cost rows and reduces each to its `L` group minima. Rows are
/// processed in parallel; every output cell depends on one row only, so the
/// result does not depend on scheduling.
pub fn compress_with(ds: &Dataset, gi: &GroupIndex, metric: Metric) -> CompressedCost {
    let (n, l) = (ds.n(), gi.len());
    assert_eq!(gi.n(), n, "group index built from a different dataset");
    assert!(n <= u32::MAX as usize, "argmin indices are stored as u32");
    let mut min = vec![0.0; n * l];
    let mut argmin = vec![0u32; n * l];
    min.par_chunks_mut(l.max(1))
        .zip(argmin.par_chunks_mut(l.max(1)))
        .enumerate()
        .for_each(|(i, (mrow, arow))| {
            let xi = ds.row(i);
            for (g, members) in gi.groups.iter().enumerate() {
                let mut best = f64::INFINITY;
                let mut best_k = members[0];
                // members are ascending, strict < keeps the smallest index
                for &k in members {
                    let c = metric.distance(xi, ds.row(k));
                    if c < best {
                        best = c;
                        best_k = k;
                    }
                }
                mrow[g] = best;
                arow[g] = best_k as u32;
            }
        });
    CompressedCost { n, l, min, argmin }
}

/// Cache key: SHA-256 over the dataset fingerprint, the metric and the
/// group layout.
pub fn cache_key(ds: &Dataset, gi: &GroupIndex, metric: Metric) -> String {
    let mut h = Sha256::new();
    h.update(ds.fingerprint().as_bytes());
    h.update(metric.name().as_bytes());
    h.update((gi.len() as u64).to_le_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, ds: &Dataset, gi: &GroupIndex, metric: Metric) -> PathBuf {
    dir.join(format!("{}.fwcc", cache_key(ds, gi, metric)))
}

pub fn write_cache(path: &Path, cc: &CompressedCost) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cc.write_to(BufWriter::new(file)).map_err(|e| Error::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_cache(path: &Path) -> Result<CompressedCost> {
    let file = File::open(path).map_err(|e| Error::Cache {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    CompressedCost::read_from(BufReader::new(file)).map_err(|message| Error::Cache {
        path: path.to_path_buf(),
        message,
    })
}

/// Reads the cached table for this dataset from `dir` if present and
/// consistent, otherwise computes and stores it.
pub fn compress_cached(
    ds: &Dataset,
    gi: &GroupIndex,
    metric: Metric,
    dir: &Path,
) -> Result<CompressedCost> {
    let path = cache_path(dir, ds, gi, metric);
    if path.exists() {
        match read_cache(&path) {
            Ok(cc) if cc.n == ds.n() && cc.l == gi.len() => {
                log::info!("loaded compressed cost from {}", path.display());
                return Ok(cc);
            }
            Ok(_) => log::warn!("ignoring cache {} with mismatched shape", path.display()),
            Err(e) => log::warn!("ignoring unreadable cache: {e}"),
        }
    }
    let cc = compress_with(ds, gi, metric);
    std::fs::create_dir_all(dir)?;
    write_cache(&path, &cc)?;
    Ok(cc)
}
