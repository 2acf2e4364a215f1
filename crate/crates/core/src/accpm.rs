//! Analytic-center cutting-plane minimization of the dual function over
//! `lambda >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cost::CompressedCost;
use crate::dual::{separation_oracle, Cut};
use crate::error::{Error, Result};
use crate::fairness::ConstraintMatrix;

/// Relative slack below which a cut counts as violated when picking the
/// starting point of the centering Newton method.
const INTERIOR_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutDrop {
    Disabled,
    /// Above `30 m` cuts, keep the `15 m` tightest.
    Auto,
    /// Above this many cuts, keep half of them.
    Threshold(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Initial box `[0, R]^m`; `None` derives `R = 1e4 (1 + max cost)`.
    pub lambda_max: Option<f64>,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub cut_drop: CutDrop,
    /// Relative gap between the recovered fractional primal and the dual
    /// bound at which the relaxation counts as solved.
    pub relax_tol: f64,
    /// Box doublings allowed when the upper faces end up active.
    pub max_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gap_tol: 1e-3,
            max_iters: 500,
            lambda_max: None,
            newton_tol: 1e-8,
            newton_max: 50,
            cut_drop: CutDrop::Auto,
            relax_tol: 1e-6,
            max_restarts: 3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.gap_tol.is_finite()) {
            return Err(Error::config("gap_tol must be positive"));
        }
        if let Some(r) = self.lambda_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("lambda_max must be positive"));
            }
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 || self.newton_max == 0 || self.max_iters == 0 {
            return Err(Error::config("newton_tol, newton_max and max_iters must be positive"));
        }
        if self.relax_tol.is_nan() || self.relax_tol <= 0.0 {
            return Err(Error::config("relax_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    LowerBox(usize),
    UpperBox(usize),
    Objective,
    Feasibility,
}

/// Half-spaces `g^T lambda <= b`. Objective cuts keep the group counts and
/// transport cost of the evaluation that produced them.
#[derive(Debug, Clone)]
pub struct CutSet {
    m: usize,
    normals: Vec<f64>,
    rhs: Vec<f64>,
    kinds: Vec<CutKind>,
    payload: Vec<Option<(Vec<f64>, f64)>>,
}

impl CutSet {
    pub fn new_box(m: usize, r: f64) -> Self {
        let mut cs = CutSet {
            m,
            normals: Vec::new(),
            rhs: Vec::new(),
            kinds: Vec::new(),
            payload: Vec::new(),
        };
        for j in 0..m {
            let mut g = vec![0.0; m];
            g[j] = -1.0;
            cs.push(&g, 0.0, CutKind::LowerBox(j));
        }
        for j in 0..m {
            let mut g = vec![0.0; m];
            g[j] = 1.0;
            cs.push(&g, r, CutKind::UpperBox(j));
        }
        cs
    }

    pub fn push(&mut self, g: &[f64], b: f64, kind: CutKind) {
        assert_eq!(g.len(), self.m);
        self.normals.extend_from_slice(g);
        self.rhs.push(b);
        self.kinds.push(kind);
        self.payload.push(None);
    }

    fn push_objective(&mut self, g: &[f64], b: f64, counts: Vec<f64>, cost: f64) {
        self.push(g, b, CutKind::Objective);
        *self.payload.last_mut().expect("just pushed") = Some((counts, cost));
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn normal(&self, k: usize) -> &[f64] {
        &self.normals[k * self.m..(k + 1) * self.m]
    }

    pub fn rhs(&self, k: usize) -> f64 {
        self.rhs[k]
    }

    pub fn kind(&self, k: usize) -> CutKind {
        self.kinds[k]
    }

    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.rhs[k] - dot(self.normal(k), x))
            .collect()
    }

    /// `-sum log(b - g^T x)`, or `+inf` outside the open set.
    pub fn potential(&self, x: &[f64]) -> f64 {
        let mut p = 0.0;
        for s in self.slacks(x) {
            if s <= 0.0 {
                return f64::INFINITY;
            }
            p -= s.ln();
        }
        p
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.slacks(x).iter().all(|&s| s > 0.0)
    }

    /// Barrier gradient `sum g_k / s_k`.
    pub fn barrier_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.m];
        for (k, s) in self.slacks(x).into_iter().enumerate() {
            for (gj, a) in grad.iter_mut().zip(self.normal(k)) {
                *gj += a / s;
            }
        }
        grad
    }

    fn interior_threshold(&self, k: usize, x: &[f64]) -> f64 {
        let scale: f64 = self.normal(k).iter().zip(x).map(|(a, v)| (a * v).abs()).sum();
        INTERIOR_REL * (self.rhs[k].abs() + scale).max(f64::MIN_POSITIVE)
    }

    /// Drops non-box cuts with the largest normalized slack at `x` until
    /// `keep` of them remain.
    fn drop_loosest(&mut self, x: &[f64], keep: usize) {
        let slacks = self.slacks(x);
        let mut removable: Vec<(f64, usize)> = (0..self.len())
            .filter(|&k| !matches!(self.kinds[k], CutKind::LowerBox(_) | CutKind::UpperBox(_)))
            .map(|k| (slacks[k] / norm(self.normal(k)).max(f64::MIN_POSITIVE), k))
            .collect();
        if removable.len() <= keep {
            return;
        }
        removable.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut drop = vec![false; self.len()];
        for &(_, k) in &removable[..removable.len() - keep] {
            drop[k] = true;
        }
        let m = self.m;
        let mut out = CutSet {
            m,
            normals: Vec::new(),
            rhs: Vec::new(),
            kinds: Vec::new(),
            payload: Vec::new(),
        };
        for (k, &dropped) in drop.iter().enumerate() {
            if !dropped {
                out.normals.extend_from_slice(self.normal(k));
                out.rhs.push(self.rhs[k]);
                out.kinds.push(self.kinds[k]);
                out.payload.push(self.payload[k].take());
            }
        }
        *self = out;
    }

    /// Fractional primal point: objective-cut records averaged with weights
    /// `1 / slack` at `x`, the dual multipliers of the barrier at its center.
    fn fractional_primal(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let slacks = self.slacks(x);
        let mut total = 0.0;
        let mut counts: Vec<f64> = Vec::new();
        let mut cost = 0.0;
        for (k, p) in self.payload.iter().enumerate() {
            if let Some((c, v)) = p {
                let w = 1.0 / slacks[k];
                if !w.is_finite() || w <= 0.0 {
                    return None;
                }
                if counts.is_empty() {
                    counts = vec![0.0; c.len()];
                }
                for (a, b) in counts.iter_mut().zip(c) {
                    *a += w * b;
                }
                cost += w * v;
                total += w;
            }
        }
        if total == 0.0 {
            return None;
        }
        counts.iter_mut().for_each(|a| *a /= total);
        Some((counts, cost / total))
    }

    /// Up to `keep` objective-cut plans, heaviest (smallest slack at `x`) first.
    fn heaviest_plans(&self, x: &[f64], keep: usize) -> Vec<(Vec<f64>, f64)> {
        let slacks = self.slacks(x);
        let mut idx: Vec<usize> = (0..self.payload.len()).filter(|&k| self.payload[k].is_some()).collect();
        idx.sort_by(|&a, &b| slacks[a].total_cmp(&slacks[b]));
        idx.truncate(keep);
        idx.into_iter().filter_map(|k| self.payload[k].clone()).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major view of a cut set with the dense kernels Newton needs.
struct Barrier<'a> {
    a: &'a [f64],
    b: &'a [f64],
    m: usize,
}

impl Barrier<'_> {
    fn k(&self) -> usize {
        self.b.len()
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.a[k * self.m..(k + 1) * self.m]
    }

    /// `b - A x`
    fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|k| self.b[k] - dot(self.row(k), x)).collect()
    }

    fn ax(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|k| dot(self.row(k), x)).collect()
    }

    /// `A^T w`
    fn at(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (k, &wk) in w.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(k)) {
                *o += wk * a;
            }
        }
        out
    }

    /// Solves `(A^T diag(w) A) dx = rhs`, with a ridge retry.
    fn solve_weighted(&self, w: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.m;
        let mut h = DMatrix::<f64>::zeros(m, m);
        for (k, &wk) in w.iter().enumerate() {
            let g = self.row(k);
            for i in 0..m {
                let gi = wk * g[i];
                if gi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    h[(i, j)] += gi * g[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        let rhs = DVector::from_column_slice(rhs);
        if let Some(ch) = h.clone().cholesky() {
            return Some(ch.solve(&rhs).iter().copied().collect());
        }
        let ridge = 1e-12 * h.diagonal().amax().max(f64::MIN_POSITIVE);
        let h = h + DMatrix::identity(m, m) * ridge;
        h.cholesky().map(|ch| ch.solve(&rhs).iter().copied().collect())
    }

    fn potential(&self, x: &[f64]) -> f64 {
        let mut p = 0.0;
        for k in 0..self.k() {
            let s = self.b[k] - dot(self.row(k), x);
            if s <= 0.0 {
                return f64::INFINITY;
            }
            p -= s.ln();
        }
        p
    }
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

/// Maximizes `sum log(b - g^T lambda)` over the cut set.
///
/// Starts from `warm_start`. Cuts it violates get a provisional slack and an
/// infeasible-start Newton method drives the residual to zero; then damped
/// Newton with backtracking `(0.25, 0.5)` runs until half the squared Newton
/// decrement is below `newton_tol`.
pub fn analytic_center(cuts: &CutSet, warm_start: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let bar = Barrier {
        a: &cuts.normals,
        b: &cuts.rhs,
        m: cuts.m,
    };
    let nk = bar.k();
    let mut x = warm_start.to_vec();
    let s0 = bar.slacks(&x);
    let ok: Vec<bool> = (0..nk)
        .map(|k| s0[k] > cuts.interior_threshold(k, warm_start))
        .collect();
    let mut feasible = ok.iter().all(|&v| v);

    if !feasible {
        let mut pos: Vec<f64> = s0.iter().copied().filter(|&v| v > 0.0).collect();
        pos.sort_by(f64::total_cmp);
        let fill = if pos.is_empty() { 1.0 } else { pos[pos.len() / 2] };
        let mut y: Vec<f64> = (0..nk).map(|k| if ok[k] { s0[k] } else { fill }).collect();
        // residual norm of the infeasible-start KKT system; the x-part
        // A^T nu is fixed during a line search and passed in
        let resid = |y: &[f64], x: &[f64], nu: &[f64], dual_x: f64| {
            let ax = bar.ax(x);
            let mut acc = dual_x;
            for k in 0..nk {
                acc += (nu[k] - 1.0 / y[k]).powi(2) + (y[k] + ax[k] - bar.b[k]).powi(2);
            }
            acc.sqrt()
        };
        let mut steps = 0;
        while !feasible {
            steps += 1;
            if steps > cfg.newton_max {
                return Err(Error::Numerical(
                    "no strictly feasible point found for the analytic center".into(),
                ));
            }
            let ax = bar.ax(&x);
            let r: Vec<f64> = (0..nk).map(|k| y[k] + ax[k] - bar.b[k]).collect();
            let d: Vec<f64> = y.iter().map(|v| 1.0 / (v * v)).collect();
            let w: Vec<f64> = (0..nk).map(|k| -d[k] * (y[k] + r[k])).collect();
            let dx = bar
                .solve_weighted(&d, &bar.at(&w))
                .ok_or_else(|| Error::Numerical("singular centering system".into()))?;
            let adx = bar.ax(&dx);
            let dy: Vec<f64> = (0..nk).map(|k| -r[k] - adx[k]).collect();
            let nu: Vec<f64> = (0..nk).map(|k| d[k] * (y[k] + r[k] + adx[k])).collect();
            let dual_x: f64 = bar.at(&nu).iter().map(|v| v * v).sum();
            let r0 = resid(&y, &x, &nu, dual_x);
            let mut t = 1.0;
            while (0..nk).any(|k| y[k] + t * dy[k] <= 0.0) {
                t *= 0.5;
            }
            while resid(&axpy(&y, t, &dy), &axpy(&x, t, &dx), &nu, dual_x) > (1.0 - 0.01 * t) * r0 {
                t *= 0.5;
                if t < 1e-12 {
                    return Err(Error::Numerical("centering residual stalled".into()));
                }
            }
            x = axpy(&x, t, &dx);
            y = axpy(&y, t, &dy);
            if t == 1.0 {
                let s = bar.slacks(&x);
                if s.iter().all(|&v| v > 0.0) {
                    feasible = true;
                } else {
                    y = s.iter().map(|&v| if v > 0.0 { v } else { fill.min(1.0) }).collect();
                }
            }
        }
    }

    for _ in 0..cfg.newton_max {
        let s = bar.slacks(&x);
        let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
        let grad = bar.at(&inv);
        let d: Vec<f64> = inv.iter().map(|v| v * v).collect();
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let f0 = bar.potential(&x);
        let Some(dx) = bar.solve_weighted(&d, &neg) else {
            // gradient step on a singular Hessian
            let gn = norm(&grad).max(f64::MIN_POSITIVE);
            let step: Vec<f64> = neg.iter().map(|g| g / gn).collect();
            let mut t = 1.0;
            while bar.potential(&axpy(&x, t, &step)) >= f0 && t > 1e-14 {
                t *= 0.5;
            }
            if t <= 1e-14 {
                return Ok(x);
            }
            x = axpy(&x, t, &step);
            continue;
        };
        let dec = -dot(&grad, &dx);
        if dec / 2.0 <= cfg.newton_tol {
            // inside the quadratic region: one more full step is nearly free
            let cand = axpy(&x, 1.0, &dx);
            if bar.potential(&cand) <= f0 {
                x = cand;
            }
            return Ok(x);
        }
        let mut t = 1.0;
        loop {
            let cand = axpy(&x, t, &dx);
            if bar.potential(&cand) <= f0 - 0.25 * t * dec {
                x = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return Ok(x);
            }
        }
    }
    log::debug!("analytic center: Newton budget exhausted, using current iterate");
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccpmStatus {
    /// Feasible candidate within `gap_tol` of the dual bound.
    Converged,
    /// The dual bound reached the caller's cutoff.
    CutoffReached,
    /// The fractional primal matches the dual bound within `relax_tol`.
    RelaxationSolved,
    IterationLimit,
    NumericalFailure,
    Infeasible,
}

/// Best integer candidate seen: the row-max plan of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub theta: Vec<u64>,
    pub group_counts: Vec<u64>,
    pub objective: f64,
    pub ties: usize,
    pub lambda: Vec<f64>,
}

/// Fractional primal point recovered from the cut multipliers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relaxation {
    pub group_counts: Vec<f64>,
    pub objective: f64,
    /// Smallest row activity of `A N`, negative when slightly infeasible.
    pub min_margin: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub lambda_star: Vec<f64>,
    pub best_dual: f64,
    pub best_primal: f64,
    pub rel_gap: f64,
    pub iterations: usize,
    pub status: AccpmStatus,
    pub candidate: Option<Candidate>,
    pub relaxation: Option<Relaxation>,
    /// Final box bound after any doublings.
    pub lambda_max: f64,
    pub restarts: usize,
    /// `lambda >= 0` with `A^T lambda < 0` on every group, when infeasible.
    pub certificate: Option<Vec<f64>>,
    /// Heaviest plans behind the final objective cuts, at most `4m`.
    pub plans: Vec<(Vec<f64>, f64)>,
}

/// Extra controls used when the solver runs inside branch-and-bound.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Stop once the dual bound is within `gap_tol` of this value.
    pub cutoff: Option<f64>,
    /// Rows a candidate must satisfy to be recorded; `None` means all rows.
    pub candidate_rows: Option<usize>,
    /// Known lower bound on the relaxation value, e.g. the parent node's.
    pub dual_floor: Option<f64>,
    /// Transport plans `(group counts, cost)` seen elsewhere. With
    /// `dual_floor` each yields the valid cut `(A N)^T lambda <= cost - floor`.
    pub seed_plans: Vec<(Vec<f64>, f64)>,
}

pub fn relative_gap(primal: f64, dual: f64) -> f64 {
    if primal.is_infinite() || dual.is_infinite() {
        return f64::INFINITY;
    }
    (primal - dual).abs() / (1.0 + primal.abs() + dual.abs())
}

pub fn solve(cc: &CompressedCost, cm: &ConstraintMatrix, cfg: &SolverConfig) -> Result<SolverReport> {
    solve_with(cc, cm, cfg, &SolveOptions::default())
}

pub fn solve_with(
    cc: &CompressedCost,
    cm: &ConstraintMatrix,
    cfg: &SolverConfig,
    opts: &SolveOptions,
) -> Result<SolverReport> {
    cfg.validate()?;
    if cc.groups() != cm.groups() {
        return Err(Error::usage("cost table and constraints disagree on group count"));
    }
    if cm.m() == 0 {
        return Err(Error::usage("constraint matrix has no rows"));
    }
    let mut r = cfg
        .lambda_max
        .unwrap_or_else(|| 1e4 * (1.0 + cc.max_cost()));
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let mut rep = run(cc, cm, cfg, opts, r)?;
        iterations += rep.iterations;
        rep.iterations = iterations;
        rep.restarts = restarts;
        let upper_active = rep.lambda_star.iter().any(|&l| l >= 0.5 * r);
        let retry = matches!(
            rep.status,
            AccpmStatus::RelaxationSolved | AccpmStatus::IterationLimit | AccpmStatus::NumericalFailure
        );
        if upper_active && retry && restarts < cfg.max_restarts {
            log::warn!("dual iterate near the box bound R = {r:.3e}; doubling R and restarting");
            r *= 2.0;
            restarts += 1;
            continue;
        }
        return Ok(rep);
    }
}

fn run(
    cc: &CompressedCost,
    cm: &ConstraintMatrix,
    cfg: &SolverConfig,
    opts: &SolveOptions,
    r: f64,
) -> Result<SolverReport> {
    let m = cm.m();
    let n = cc.n() as f64;
    let candidate_rows = opts.candidate_rows.unwrap_or(m).min(m);
    let mut cuts = CutSet::new_box(m, r);
    let mut x = vec![0.0; m];
    let mut f_best = f64::INFINITY;
    if let (Some(floor), false) = (opts.dual_floor, opts.seed_plans.is_empty()) {
        f_best = -floor;
        for (counts, cost) in &opts.seed_plans {
            let g = cm.margins(counts);
            cuts.push_objective(&g, cost - floor, counts.clone(), *cost);
        }
        match analytic_center(&cuts, &vec![0.5 * r; m], cfg) {
            Ok(c) => x = c,
            Err(e) => log::debug!("seeded cuts unusable ({e}); starting from zero"),
        }
    }
    let mut best_dual = f64::NEG_INFINITY;
    let mut lambda_star = x.clone();
    let mut best_primal = f64::INFINITY;
    let mut candidate: Option<Candidate> = None;
    let mut relaxation: Option<Relaxation> = None;
    let mut status = AccpmStatus::IterationLimit;
    let mut certificate = None;
    let mut iterations = 0;
    let mut last_f = f64::NAN;
    let (drop_at, keep) = match cfg.cut_drop {
        CutDrop::Disabled => (usize::MAX, usize::MAX),
        CutDrop::Auto => (30 * m, 15 * m),
        CutDrop::Threshold(t) => (t.max(2), t.max(2) / 2),
    };

    while iterations < cfg.max_iters {
        iterations += 1;
        match separation_oracle(&x, cc, cm)? {
            Cut::Feasibility { g, .. } => {
                let b = dot(&g, &x);
                cuts.push(&g, b, CutKind::Feasibility);
            }
            Cut::Objective(e) => {
                let f = e.value;
                last_f = f;
                if -f > best_dual {
                    best_dual = -f;
                    lambda_star.clone_from(&x);
                }
                f_best = f_best.min(f);
                let v = cm.group_values(&x);
                if v.iter().all(|&vl| vl < 0.0) {
                    certificate = Some(x.clone());
                    status = AccpmStatus::Infeasible;
                    break;
                }
                let sums = e.group_counts_f64();
                let margins = cm.margins(&sums);
                let ok = margins[..candidate_rows].iter().all(|&a| a >= -1e-9 * n);
                if ok && e.primal_objective < best_primal {
                    best_primal = e.primal_objective;
                    candidate = Some(Candidate {
                        theta: e.column_counts.clone(),
                        group_counts: e.group_counts.clone(),
                        objective: e.primal_objective,
                        ties: e.ties,
                        lambda: x.clone(),
                    });
                }
                let b = dot(&e.subgradient, &x) + (f_best - f);
                cuts.push_objective(&e.subgradient, b, sums, e.primal_objective);
            }
        }

        let ub = best_primal.min(opts.cutoff.unwrap_or(f64::INFINITY));
        let gap = relative_gap(best_primal, best_dual);
        log::debug!(
            "iter {iterations:4}  F {:+.6e}  best_dual {:+.6e}  best_primal {:.6e}  rel_gap {:.3e}  cuts {}",
            last_f,
            best_dual,
            best_primal,
            gap,
            cuts.len()
        );
        if gap <= cfg.gap_tol {
            status = AccpmStatus::Converged;
            break;
        }
        if relative_gap(ub, best_dual) <= cfg.gap_tol || best_dual >= ub {
            status = AccpmStatus::CutoffReached;
            break;
        }
        if cuts.len() - 2 * m > drop_at {
            cuts.drop_loosest(&x, keep);
        }
        x = match analytic_center(&cuts, &x, cfg) {
            Ok(c) => c,
            Err(e) => {
                log::info!("stopping: {e}");
                status = AccpmStatus::NumericalFailure;
                break;
            }
        };
        if let Some((counts, cost)) = cuts.fractional_primal(&x) {
            let min_margin = cm.margins(&counts).into_iter().fold(f64::INFINITY, f64::min);
            let done = relative_gap(cost, best_dual) <= cfg.relax_tol && min_margin >= -cfg.relax_tol * n;
            relaxation = Some(Relaxation {
                group_counts: counts,
                objective: cost,
                min_margin,
            });
            if done {
                status = AccpmStatus::RelaxationSolved;
                break;
            }
        }
    }
    Ok(SolverReport {
        rel_gap: relative_gap(best_primal, best_dual),
        lambda_star,
        best_dual,
        best_primal,
        iterations,
        status,
        candidate,
        relaxation,
        lambda_max: r,
        restarts: 0,
        certificate,
        plans: cuts.heaviest_plans(&x, 4 * m),
    })
}
