#![allow(dead_code)]

use fairwasp::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Two Gaussian features, uniform binary `d` and `y`.
pub fn gaussian_instance(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let d = (0..n).map(|_| rng.random_range(0..2)).collect();
    let y = (0..n).map(|_| rng.random_range(0..2)).collect();
    Dataset::from_rows(&rows, d, y, 2, 2).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
