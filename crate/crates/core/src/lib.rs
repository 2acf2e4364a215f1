//! Integer sample reweighting that minimizes Wasserstein distance to the
//! empirical distribution subject to demographic-parity constraints.
//!
//! The solver works on the Lagrangian dual: the dual function is evaluated in
//! `O(nL)` from a compressed cost table and minimized with an analytic-center
//! cutting-plane method. An exact branch-and-bound stage over group counts
//! closes any gap between the relaxation and the integer optimum.

pub mod accpm;
pub mod branch;
pub mod cost;
pub mod dataset;
pub mod dual;
pub mod error;
pub mod fairness;
pub mod oracle;
pub mod pairwise;
pub mod recover;
pub mod solver;

pub use dataset::{
    generate_synthetic, group_index, load_csv, load_csv_with, marginal_y, read_csv, standardize,
    Dataset, GroupIndex, LoadOptions, MarginalY,
};
pub use error::{Error, Result};

pub use accpm::{AccpmStatus, SolverConfig, SolverReport};
pub use cost::{compress, CompressedCost, Metric};
pub use dual::{evaluate, DualEvaluation};
pub use fairness::{build_constraints, fairness_violation, pairwise_violation, ConstraintMatrix};
pub use pairwise::{solve_pw, PwConfig, PwSolution, PwStatus};
pub use recover::{materialize, recover_weights, relative_objective_gap, WeightVector};
pub use solver::{FairwaspConfig, Problem, RunStatus, Solution};
