//! Pairwise demographic parity: conditionals of every two protected classes
//! within a factor `1 + eps` of each other.
//!
//! A weight vector satisfies the pairwise constraint at `eps` exactly when it
//! satisfies the marginal constraint at `(t, sqrt(1 + eps) - 1)` for some
//! target `t`. The target is searched with Nelder-Mead over `[0, 1]^|Y|`,
//! each evaluation running the marginal solver on the shared cost table.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::MarginalY;
use crate::error::{Error, Result};
use crate::fairness::pairwise_violation;
use crate::solver::{FairwaspConfig, Problem, RunStatus, Solution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PwConfig {
    pub epsilon: f64,
    pub nm_max_evals: usize,
    /// Stop once the simplex diameter (max norm) falls below this.
    pub nm_tol: f64,
    /// Extra Nelder-Mead runs from perturbed starts.
    pub restarts: usize,
    pub seed: u64,
    /// Inner solver settings; its `epsilon` and `target` are overwritten.
    pub inner: FairwaspConfig,
}

impl Default for PwConfig {
    fn default() -> Self {
        PwConfig {
            epsilon: 0.05,
            nm_max_evals: 200,
            nm_tol: 1e-4,
            restarts: 2,
            seed: 0,
            inner: FairwaspConfig::default(),
        }
    }
}

impl PwConfig {
    /// `sqrt(1 + eps) - 1`
    pub fn epsilon_bar(&self) -> f64 {
        epsilon_bar(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon must be finite and nonnegative"));
        }
        if self.nm_max_evals == 0 {
            return Err(Error::config("nm_max_evals must be positive"));
        }
        if self.nm_tol.is_nan() || self.nm_tol <= 0.0 {
            return Err(Error::config("nm_tol must be positive"));
        }
        self.inner.solver.validate()
    }
}

pub fn epsilon_bar(epsilon: f64) -> f64 {
    (1.0 + epsilon).sqrt() - 1.0
}

/// Memoized `t -> H(t)` over a fixed problem.
pub struct Objective<'a> {
    problem: &'a Problem,
    cfg: FairwaspConfig,
    cache: HashMap<Vec<u64>, f64>,
    best: Option<(Vec<f64>, Solution)>,
    evaluations: usize,
    inner_iterations: usize,
}

impl<'a> Objective<'a> {
    pub fn new(problem: &'a Problem, inner: &FairwaspConfig, epsilon_bar: f64) -> Self {
        Objective {
            problem,
            cfg: FairwaspConfig {
                epsilon: epsilon_bar,
                target: None,
                ..inner.clone()
            },
            cache: HashMap::new(),
            best: None,
            evaluations: 0,
            inner_iterations: 0,
        }
    }

    /// Integer optimum of the marginal problem at target `t` (clipped to the
    /// unit box); `+inf` when no feasible weights are found.
    pub fn eval(&mut self, t: &[f64]) -> Result<f64> {
        let t: Vec<f64> = t.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let key: Vec<u64> = t.iter().map(|v| v.to_bits()).collect();
        if let Some(&h) = self.cache.get(&key) {
            return Ok(h);
        }
        let cfg = FairwaspConfig {
            target: Some(MarginalY::new(t.clone())),
            ..self.cfg.clone()
        };
        let sol = self.problem.solve(&cfg)?;
        self.evaluations += 1;
        self.inner_iterations += sol.iterations;
        let h = if sol.theta.is_some() {
            sol.objective
        } else {
            f64::INFINITY
        };
        log::debug!("pairwise: H({t:?}) = {h:.6e} [{:?}]", sol.status);
        self.cache.insert(key, h);
        let better = match &self.best {
            None => true,
            Some((_, b)) => h < b.objective || (h == b.objective && b.theta.is_none()),
        };
        if better {
            self.best = Some((t, sol));
        }
        Ok(h)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

/// `H(t)` for a single target.
pub fn h_objective(t: &[f64], problem: &Problem, inner: &FairwaspConfig, epsilon_bar: f64) -> Result<f64> {
    Objective::new(problem, inner, epsilon_bar).eval(t)
}

struct NelderMead {
    alpha: f64,
    gamma: f64,
    rho: f64,
    sigma: f64,
}

const NM: NelderMead = NelderMead {
    alpha: 1.0,
    gamma: 2.0,
    rho: 0.5,
    sigma: 0.5,
};

fn clip(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    clip(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
}

/// Minimizes over the unit box from `start` with at most `max_evals` fresh
/// evaluations.
fn nelder_mead(f: &mut Objective, start: &[f64], step: f64, max_evals: usize, tol: f64) -> Result<()> {
    let k = start.len();
    let used0 = f.evaluations();
    let budget = |f: &Objective| f.evaluations() - used0 >= max_evals;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let x0 = clip(start.to_vec());
    simplex.push((x0.clone(), f.eval(&x0)?));
    for j in 0..k {
        let mut x = x0.clone();
        // step away from the nearer face so the vertex stays distinct
        x[j] = if x[j] + step <= 1.0 { x[j] + step } else { x[j] - step };
        let x = clip(x);
        let v = f.eval(&x)?;
        simplex.push((x, v));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex
            .iter()
            .flat_map(|(a, _)| simplex.iter().map(move |(b, _)| (a, b)))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= tol || budget(f) {
            return Ok(());
        }
        let worst = simplex[k].clone();
        let mut centroid = vec![0.0; k];
        for (x, _) in &simplex[..k] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / k as f64;
            }
        }
        let xr = lerp(&centroid, &worst.0, -NM.alpha);
        let fr = f.eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -NM.gamma);
            let fe = f.eval(&xe)?;
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = lerp(&centroid, &xr, NM.rho);
            let fc = f.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = lerp(&centroid, &worst.0, NM.rho);
            let fc = f.eval(&xc)?;
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[k] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for s in simplex.iter_mut().skip(1) {
            let x = lerp(&best, &s.0, NM.sigma);
            let v = f.eval(&x)?;
            *s = (x, v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PwStatus {
    /// The inner solve at `t_star` converged and the weights pass the
    /// pairwise check.
    Converged,
    /// Weights were found but the inner solve did not certify its gap.
    NotCertified,
    /// Weights fail the pairwise check beyond tolerance.
    Flagged,
    /// No evaluated target admitted feasible weights.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct PwSolution {
    pub status: PwStatus,
    pub t_star: Option<MarginalY>,
    pub epsilon: f64,
    pub epsilon_bar: f64,
    /// `H` at the starting target `p_Y`.
    pub h_start: f64,
    pub objective: f64,
    pub evaluations: usize,
    pub inner_iterations: usize,
    pub pairwise_violation: Option<f64>,
    /// The inner solve at `t_star`.
    pub inner: Option<Solution>,
}

impl PwSolution {
    pub fn theta(&self) -> Option<&crate::recover::WeightVector> {
        self.inner.as_ref().and_then(|s| s.theta.as_ref())
    }
}

/// Searches targets from `p_Y`, then from `restarts` random perturbations of
/// it, each for at most `nm_max_evals` fresh evaluations.
pub fn solve_pw(problem: &Problem, cfg: &PwConfig) -> Result<PwSolution> {
    cfg.validate()?;
    let eps_bar = cfg.epsilon_bar();
    let mut f = Objective::new(problem, &cfg.inner, eps_bar);
    let p_y = problem.target.probs.clone();
    let h_start = f.eval(&p_y)?;
    nelder_mead(&mut f, &p_y, 0.05, cfg.nm_max_evals, cfg.nm_tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for r in 0..cfg.restarts {
        let start: Vec<f64> = p_y
            .iter()
            .map(|v| (v + rng.random_range(-0.1..=0.1)).clamp(0.0, 1.0))
            .collect();
        log::info!("pairwise: restart {} from {start:?}", r + 1);
        nelder_mead(&mut f, &start, 0.05, cfg.nm_max_evals, cfg.nm_tol)?;
    }

    let evaluations = f.evaluations;
    let inner_iterations = f.inner_iterations;
    let mut out = PwSolution {
        status: PwStatus::Infeasible,
        t_star: None,
        epsilon: cfg.epsilon,
        epsilon_bar: eps_bar,
        h_start,
        objective: f64::INFINITY,
        evaluations,
        inner_iterations,
        pairwise_violation: None,
        inner: None,
    };
    let Some((t, sol)) = f.best else {
        return Ok(out);
    };
    out.t_star = Some(MarginalY::new(t));
    let Some(theta) = sol.theta.as_ref() else {
        out.inner = Some(sol);
        return Ok(out);
    };
    let pv = pairwise_violation(theta.as_slice(), &problem.gi);
    out.objective = sol.objective;
    out.pairwise_violation = Some(pv);
    out.status = if pv > cfg.epsilon + 1e-6 {
        log::warn!("pairwise violation {pv:.3e} exceeds epsilon {}", cfg.epsilon);
        PwStatus::Flagged
    } else if matches!(sol.status, RunStatus::Converged | RunStatus::ConvergedWithTies) {
        PwStatus::Converged
    } else {
        PwStatus::NotCertified
    };
    out.inner = Some(sol);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Metric;
    use crate::dataset::Dataset;

    fn balanced() -> Dataset {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        Dataset::from_rows(&rows, vec![0, 0, 1, 1], vec![0, 1, 0, 1], 2, 2).unwrap()
    }

    #[test]
    fn epsilon_bar_values() {
        assert_eq!(epsilon_bar(0.0), 0.0);
        assert!((epsilon_bar(0.21) - 0.1).abs() < 1e-15);
        for e in [0.01, 0.05, 0.2, 1.0] {
            let b = epsilon_bar(e);
            assert!(b > 0.0 && b <= e);
            assert!(((1.0 + b) * (1.0 + b) - 1.0 - e).abs() < 1e-14);
        }
    }

    #[test]
    fn fair_data_keeps_uniform_weights() {
        let p = Problem::from_dataset(&balanced(), Metric::Euclidean, false);
        let cfg = PwConfig {
            epsilon: 0.2,
            ..PwConfig::default()
        };
        assert_eq!(h_objective(&p.target.probs, &p, &cfg.inner, cfg.epsilon_bar()).unwrap(), 0.0);
        let s = solve_pw(&p, &cfg).unwrap();
        assert_eq!(s.status, PwStatus::Converged);
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.h_start, 0.0);
        assert_eq!(s.theta().unwrap().as_slice(), &[1, 1, 1, 1]);
        assert_eq!(s.t_star.unwrap().probs, vec![0.5, 0.5]);
    }

    #[test]
    fn segregated_data_is_infeasible() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], vec![0, 1], 2, 2).unwrap();
        let p = Problem::from_dataset(&ds, Metric::Euclidean, false);
        let cfg = PwConfig {
            epsilon: 0.0,
            nm_max_evals: 20,
            restarts: 0,
            ..PwConfig::default()
        };
        let s = solve_pw(&p, &cfg).unwrap();
        assert_eq!(s.status, PwStatus::Infeasible);
        assert!(s.theta().is_none());
        assert!(s.objective.is_infinite());
    }

    #[test]
    fn search_never_ends_above_start() {
        for seed in 0..2 {
            let ds = crate::dataset::generate_synthetic(40, seed).unwrap();
            let p = Problem::from_dataset(&ds, Metric::Euclidean, false);
            let cfg = PwConfig {
                epsilon: 0.1,
                nm_max_evals: 12,
                restarts: 1,
                ..PwConfig::default()
            };
            let s = solve_pw(&p, &cfg).unwrap();
            assert!(s.objective <= s.h_start);
            assert!(s.pairwise_violation.unwrap() <= 0.1 + 1e-6);
            let t = s.t_star.unwrap();
            assert!(t.probs.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
