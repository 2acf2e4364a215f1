//! Shared fixtures for the criterion benches.

use fairwasp::{
    build_constraints, compress, generate_synthetic, group_index, marginal_y, standardize, ConstraintMatrix, Dataset,
    Problem,
};

/// Standardized synthetic data, as the scaling study uses it.
pub fn synthetic(n: usize, seed: u64) -> Dataset {
    standardize(&generate_synthetic(n, seed).expect("n >= 2"))
}

pub fn problem(n: usize, seed: u64) -> Problem {
    let ds = synthetic(n, seed);
    let gi = group_index(&ds);
    let cc = compress(&ds, &gi);
    Problem {
        target: marginal_y(&ds),
        gi,
        cc,
    }
}

pub fn constraints(p: &Problem, epsilon: f64) -> ConstraintMatrix {
    build_constraints(&p.gi, &p.target, epsilon, false).expect("valid target")
}
