//! JSON pieces of the run manifest. Keys come out sorted (serde_json's
//! default map), so manifests diff cleanly between runs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fairwasp::fairness::{conditionals, fairness_violation_sums, group_sums, pairwise_violation_sums};
use fairwasp::{Dataset, GroupIndex, MarginalY, Solution};
use serde_json::{json, Value};

use crate::args::{InputArgs, SolverArgs};

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_manifest(out: &Path, manifest: &Value) -> Result<PathBuf> {
    let path = manifest_path(out);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn input_json(args: &InputArgs, ds: &Dataset) -> Value {
    json!({
        "path": args.input.display().to_string(),
        "dataset_sha256": ds.fingerprint(),
        "n": ds.n(),
        "p": ds.p(),
        "d_column": args.d_col,
        "y_column": args.y_col,
        "d_values": ds.d_values(),
        "y_values": ds.y_values(),
        "include_d_in_features": args.include_d_in_features,
        "standardized": !args.no_standardize,
        "metric": args.metric.name(),
    })
}

pub fn solver_config_json(s: &SolverArgs) -> Value {
    json!({
        "epsilon": s.epsilon,
        "gap_tol": s.gap_tol,
        "max_iters": s.max_iters,
        "lambda_max": s.lambda_max,
        "dedup_binary_y": s.dedup_binary_y,
        "branch": !s.no_branch,
        "max_nodes": s.max_nodes,
    })
}

pub fn solution_json(s: &Solution) -> Value {
    let root = &s.root;
    json!({
        "status": s.status,
        "objective": s.objective,
        "lower_bound": s.lower_bound,
        "lp_bound": s.lp_bound,
        "rel_gap": s.rel_gap,
        "iterations": s.iterations,
        "nodes": s.nodes,
        "tie_count": s.tie_count,
        "source": s.source,
        "target": s.target.probs,
        "epsilon": s.epsilon,
        "root": {
            "status": root.status,
            "best_dual": root.best_dual,
            "best_primal": root.best_primal,
            "rel_gap": root.rel_gap,
            "iterations": root.iterations,
            "lambda_star": root.lambda_star,
            "lambda_max": root.lambda_max,
            "restarts": root.restarts,
            "certificate": root.certificate,
        },
    })
}

/// Group sums, conditionals and violations of one weight vector.
pub fn fairness_json(theta: &[u64], gi: &GroupIndex, t: &MarginalY, epsilon: f64) -> Value {
    let sums = group_sums(theta, gi);
    json!({
        "group_sums": sums,
        "conditionals": conditionals(&sums, gi),
        "violation": fairness_violation_sums(&sums, gi, t, epsilon).ok(),
        "pairwise_violation": pairwise_violation_sums(&sums, gi),
    })
}
