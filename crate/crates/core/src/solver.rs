//! End-to-end driver: constraints, dual solve, integer stage.

use serde::Serialize;

use crate::accpm::{self, relative_gap, AccpmStatus, SolverConfig, SolverReport};
use crate::branch::{branch_and_bound, IncumbentSource};
use crate::cost::{compress_with, CompressedCost, Metric};
use crate::dataset::{group_index, marginal_y, standardize, Dataset, GroupIndex, MarginalY};
use crate::error::Result;
use crate::fairness::{build_constraints, fairness_violation, ConstraintMatrix};
use crate::recover::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairwaspConfig {
    pub epsilon: f64,
    /// Target outcome distribution; `None` uses the empirical marginal.
    pub target: Option<MarginalY>,
    pub dedup_binary_y: bool,
    pub solver: SolverConfig,
    /// Run branch-and-bound when the dual stage leaves a gap.
    pub branch: bool,
    pub max_nodes: usize,
}

impl Default for FairwaspConfig {
    fn default() -> Self {
        FairwaspConfig {
            epsilon: 0.05,
            target: None,
            dedup_binary_y: false,
            solver: SolverConfig::default(),
            branch: true,
            max_nodes: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    /// Converged, but the returned plan came from an evaluation with ties.
    ConvergedWithTies,
    IterationLimit,
    NumericalFailure,
    Infeasible,
}

impl RunStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, RunStatus::Converged | RunStatus::ConvergedWithTies)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: RunStatus,
    pub theta: Option<WeightVector>,
    /// Transport cost of `theta`, `+inf` when none was found.
    pub objective: f64,
    /// Proven lower bound on the integer optimum.
    pub lower_bound: f64,
    /// Relative gap between `objective` and `lower_bound`.
    pub rel_gap: f64,
    /// Dual bound of the relaxation (root `best_dual`).
    pub lp_bound: f64,
    pub root: SolverReport,
    pub nodes: usize,
    pub iterations: usize,
    pub tie_count: usize,
    pub source: Option<IncumbentSource>,
    pub violation: Option<f64>,
    pub target: MarginalY,
    pub epsilon: f64,
}

/// Solves for the given groups and compressed costs.
pub fn solve_compressed(gi: &GroupIndex, cc: &CompressedCost, t: &MarginalY, cfg: &FairwaspConfig) -> Result<Solution> {
    let cm = build_constraints(gi, t, cfg.epsilon, cfg.dedup_binary_y)?;
    solve_with_constraints(gi, cc, &cm, cfg)
}

pub fn solve_with_constraints(
    gi: &GroupIndex,
    cc: &CompressedCost,
    cm: &ConstraintMatrix,
    cfg: &FairwaspConfig,
) -> Result<Solution> {
    let root = accpm::solve(cc, cm, &cfg.solver)?;
    log::info!(
        "dual stage: {:?} after {} iterations, bound {:.6}, best primal {:.6}",
        root.status,
        root.iterations,
        root.best_dual,
        root.best_primal
    );
    let t = cm.target().clone();
    let mut out = Solution {
        status: RunStatus::Infeasible,
        theta: None,
        objective: f64::INFINITY,
        lower_bound: root.best_dual,
        rel_gap: f64::INFINITY,
        lp_bound: root.best_dual,
        nodes: 1,
        iterations: root.iterations,
        tie_count: 0,
        source: None,
        violation: None,
        target: t.clone(),
        epsilon: cfg.epsilon,
        root,
    };
    if out.root.status == AccpmStatus::Infeasible {
        return Ok(out);
    }

    let mut complete = out.root.status == AccpmStatus::Converged;
    let mut numerical = out.root.status == AccpmStatus::NumericalFailure;
    let mut incumbent = out.root.candidate.as_ref().map(|c| {
        (c.theta.clone(), c.objective, c.ties, IncumbentSource::DualEvaluation)
    });
    if !complete && cfg.branch {
        let bb = branch_and_bound(cc, cm, &out.root, &cfg.solver, cfg.max_nodes)?;
        out.nodes = bb.nodes;
        out.iterations += bb.iterations;
        out.lower_bound = out.lower_bound.max(bb.lower_bound);
        numerical |= bb.numerical_failures > 0 && !bb.complete;
        complete = bb.complete;
        incumbent = bb.incumbent.map(|i| (i.theta, i.objective, i.ties, i.source));
        if complete && incumbent.is_none() {
            return Ok(out);
        }
    }

    let Some((theta, objective, ties, source)) = incumbent else {
        out.status = if numerical {
            RunStatus::NumericalFailure
        } else {
            RunStatus::IterationLimit
        };
        return Ok(out);
    };
    out.violation = fairness_violation(&theta, gi, &t, cfg.epsilon).ok();
    out.theta = Some(WeightVector::new(theta)?);
    out.objective = objective;
    out.tie_count = ties;
    out.source = Some(source);
    out.lower_bound = out.lower_bound.min(objective);
    out.rel_gap = relative_gap(objective, out.lower_bound);
    out.status = if out.rel_gap <= cfg.solver.gap_tol {
        if ties > 0 {
            RunStatus::ConvergedWithTies
        } else {
            RunStatus::Converged
        }
    } else if numerical {
        RunStatus::NumericalFailure
    } else {
        RunStatus::IterationLimit
    };
    Ok(out)
}

/// Inputs prepared from a dataset: groups, compressed costs and target.
#[derive(Debug, Clone)]
pub struct Problem {
    pub gi: GroupIndex,
    pub cc: CompressedCost,
    pub target: MarginalY,
}

impl Problem {
    /// Standardizes features (unless `raw`) and compresses costs.
    pub fn from_dataset(ds: &Dataset, metric: Metric, raw: bool) -> Problem {
        let gi = group_index(ds);
        let cc = if raw {
            compress_with(ds, &gi, metric)
        } else {
            compress_with(&standardize(ds), &gi, metric)
        };
        Problem {
            target: marginal_y(ds),
            gi,
            cc,
        }
    }

    pub fn solve(&self, cfg: &FairwaspConfig) -> Result<Solution> {
        let t = cfg.target.as_ref().unwrap_or(&self.target);
        solve_compressed(&self.gi, &self.cc, t, cfg)
    }
}
