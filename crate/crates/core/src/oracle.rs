//! Brute-force reference solvers for tiny instances. They share no code with
//! the main path beyond dataset access and the ground metric, and are meant
//! for tests and debugging only.

use microlp::{ComparisonOp, OptimizationDirection};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::Metric;
use crate::dataset::{marginal_y, Dataset};
use crate::error::{Error, Result};
use crate::recover::WeightVector;

/// Largest `n` for exhaustive transport enumeration.
pub const ENUMERATE_MAX_N: usize = 8;
/// Largest `n` for the augmenting-path transport solver.
pub const SHORTEST_PATH_MAX_N: usize = 200;
/// Largest `n` for weight enumeration.
pub const MIP_MAX_N: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMode {
    /// Enumeration up to [`ENUMERATE_MAX_N`], augmenting paths above.
    Auto,
    Enumerate,
    ShortestPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Optimal transport cost; `+inf` when no weight vector is feasible.
    pub objective: f64,
    pub theta: Option<WeightVector>,
    pub feasible_count: usize,
}

/// Dense row-major `n x n` ground-cost matrix.
pub fn cost_matrix(ds: &Dataset, metric: Metric) -> Vec<f64> {
    let n = ds.n();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = metric.distance(ds.row(i), ds.row(j));
        }
    }
    c
}

/// Exact `min <C, P>` over `P >= 0` with unit row sums and column sums
/// `theta`, Euclidean ground cost.
pub fn transport_cost(ds: &Dataset, theta: &WeightVector) -> Result<f64> {
    transport_cost_with(ds, theta, Metric::Euclidean, TransportMode::Auto)
}

pub fn transport_cost_with(ds: &Dataset, theta: &WeightVector, metric: Metric, mode: TransportMode) -> Result<f64> {
    let n = ds.n();
    if theta.len() != n {
        return Err(Error::usage(format!("{} weights for {n} rows", theta.len())));
    }
    let enumerate = match mode {
        TransportMode::Auto => n <= ENUMERATE_MAX_N,
        TransportMode::Enumerate => true,
        TransportMode::ShortestPaths => false,
    };
    let limit = if enumerate { ENUMERATE_MAX_N } else { SHORTEST_PATH_MAX_N };
    if n > limit {
        return Err(Error::usage(format!("transport oracle limited to n <= {limit}, got {n}")));
    }
    let c = cost_matrix(ds, metric);
    Ok(if enumerate {
        transport_enumerate(&c, n, theta.as_slice())
    } else {
        transport_shortest_paths(&c, n, theta.as_slice())
    })
}

/// Every row goes to one column with spare capacity; an optimal plan is a
/// vertex of the transport polytope, which has this form.
pub fn transport_enumerate(c: &[f64], n: usize, theta: &[u64]) -> f64 {
    fn go(i: usize, n: usize, c: &[f64], cap: &mut [u64], acc: &mut Vec<usize>, best: &mut f64) {
        if i == n {
            let total: f64 = acc.iter().enumerate().map(|(r, &j)| c[r * n + j]).sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for j in 0..n {
            if cap[j] > 0 {
                cap[j] -= 1;
                acc.push(j);
                go(i + 1, n, c, cap, acc, best);
                acc.pop();
                cap[j] += 1;
            }
        }
    }
    let mut cap = theta.to_vec();
    let mut best = f64::INFINITY;
    go(0, n, c, &mut cap, &mut Vec::with_capacity(n), &mut best);
    best
}

/// Successive shortest augmenting paths, one row at a time, with Dijkstra on
/// reduced costs over the residual bipartite graph.
pub fn transport_shortest_paths(c: &[f64], n: usize, theta: &[u64]) -> f64 {
    // nodes 0..n are rows, n..2n columns
    let mut assign = vec![usize::MAX; n];
    let mut spare = theta.to_vec();
    let mut pot = vec![0.0f64; 2 * n];
    for r in 0..n {
        // make every arc out of the fresh row nonnegative
        pot[r] = (0..n).map(|j| pot[n + j] - c[r * n + j]).fold(f64::NEG_INFINITY, f64::max);
        let mut dist = vec![f64::INFINITY; 2 * n];
        let mut prev = vec![usize::MAX; 2 * n];
        let mut done = vec![false; 2 * n];
        dist[r] = 0.0;
        while let Some(u) = (0..2 * n)
            .filter(|&v| !done[v] && dist[v].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        {
            done[u] = true;
            if u < n {
                for j in 0..n {
                    if assign[u] == j {
                        continue;
                    }
                    let w = c[u * n + j] + pot[u] - pot[n + j];
                    let nd = dist[u] + w.max(0.0);
                    if nd < dist[n + j] {
                        dist[n + j] = nd;
                        prev[n + j] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if assign[i] == j {
                        let w = -c[i * n + j] + pot[u] - pot[i];
                        let nd = dist[u] + w.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let sink = (0..n)
            .filter(|&j| spare[j] > 0 && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]).then(a.cmp(&b)))
            .expect("column sums equal n, so spare capacity is reachable");
        let far = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for v in 0..2 * n {
            if v < n && v > r {
                continue;
            }
            pot[v] += if dist[v].is_finite() { dist[v] } else { far };
        }
        spare[sink] -= 1;
        let mut v = n + sink;
        while v != r {
            let u = prev[v];
            if u < n {
                // row u moves to column v - n
                assign[u] = v - n;
            }
            v = u;
        }
    }
    (0..n).map(|i| c[i * n + assign[i]]).sum()
}

/// Weighted counts per protected class and outcome, `counts[d][y]`.
pub fn class_counts(ds: &Dataset, theta: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![0u64; ds.n_y()]; ds.n_d()];
    for (i, &w) in theta.iter().enumerate() {
        out[ds.d(i)][ds.y(i)] += w;
    }
    out
}

fn observed_classes(ds: &Dataset) -> Vec<usize> {
    let mut seen = vec![false; ds.n_d()];
    for i in 0..ds.n() {
        seen[ds.d(i)] = true;
    }
    (0..ds.n_d()).filter(|&d| seen[d]).collect()
}

/// Exact rational value of a finite float.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

fn int(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `t_y M <= (1+eps) N` and `N <= (1+eps) t_y M` for every class with
/// positive total `M`, every outcome, in exact arithmetic.
pub fn marginal_feasible_exact(counts: &[Vec<u64>], t: &[BigRational], eps: &BigRational) -> bool {
    let one_eps = BigRational::one() + eps;
    counts.iter().all(|row| {
        let m = int(row.iter().sum());
        m.is_zero()
            || row.iter().zip(t).all(|(&nv, ty)| {
                let nv = int(nv);
                let tm = ty * &m;
                tm <= &one_eps * &nv && nv <= &one_eps * &tm
            })
    })
}

/// The marginal constraint at `(t, sqrt(1+eps) - 1)`, squared so it stays
/// rational: `p^2 <= (1+eps) t^2` and `t^2 <= (1+eps) p^2`.
pub fn marginal_bar_feasible_exact(counts: &[Vec<u64>], t: &[BigRational], eps: &BigRational) -> bool {
    let one_eps = BigRational::one() + eps;
    counts.iter().all(|row| {
        let m = int(row.iter().sum());
        m.is_zero()
            || row.iter().zip(t).all(|(&nv, ty)| {
                let p = int(nv) / &m;
                let (p2, t2) = (&p * &p, ty * ty);
                p2 <= &one_eps * &t2 && t2 <= &one_eps * &p2
            })
    })
}

/// Conditionals of every two classes with positive total within a factor
/// `1 + eps`, exactly. Two zero conditionals are equal.
pub fn pairwise_feasible_exact(counts: &[Vec<u64>], eps: &BigRational) -> bool {
    let one_eps = BigRational::one() + eps;
    let cond: Vec<Vec<BigRational>> = counts
        .iter()
        .filter(|row| row.iter().sum::<u64>() > 0)
        .map(|row| {
            let m = int(row.iter().sum());
            row.iter().map(|&v| int(v) / &m).collect()
        })
        .collect();
    for a in 0..cond.len() {
        for b in a + 1..cond.len() {
            for (p, q) in cond[a].iter().zip(&cond[b]) {
                if p > &(&one_eps * q) || q > &(&one_eps * p) {
                    return false;
                }
            }
        }
    }
    true
}

/// Marginal feasibility at `(t*, sqrt(1+eps) - 1)` with
/// `t*_y = sqrt(max_d p(y|d) * min_d p(y|d))` over classes with positive
/// total, checked exactly as `p^2 <= (1+eps) hi lo` and `hi lo <= (1+eps) p^2`.
pub fn geometric_target_feasible_exact(counts: &[Vec<u64>], eps: &BigRational) -> bool {
    let one_eps = BigRational::one() + eps;
    let cond: Vec<Vec<BigRational>> = counts
        .iter()
        .filter(|row| row.iter().sum::<u64>() > 0)
        .map(|row| {
            let m = int(row.iter().sum());
            row.iter().map(|&v| int(v) / &m).collect()
        })
        .collect();
    let Some(first) = cond.first() else {
        return true;
    };
    (0..first.len()).all(|y| {
        let hi = cond.iter().map(|c| &c[y]).max().expect("nonempty");
        let lo = cond.iter().map(|c| &c[y]).min().expect("nonempty");
        let t2 = hi * lo;
        cond.iter().all(|c| {
            let p2 = &c[y] * &c[y];
            p2 <= &one_eps * &t2 && t2 <= &one_eps * &p2
        })
    })
}

/// All nonnegative integer vectors of length `n` summing to `n`.
pub fn weight_vectors(n: usize) -> Vec<Vec<u64>> {
    fn go(rest: u64, len: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() + 1 == len {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=rest {
            cur.push(k);
            go(rest - k, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        go(n as u64, n, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Minimizes transport cost over every integer weight vector accepted by
/// `feasible` (called with class counts). Ties keep the lexicographically
/// smallest weights.
pub fn brute_force<F>(ds: &Dataset, metric: Metric, feasible: F) -> Result<OracleResult>
where
    F: Fn(&[Vec<u64>]) -> bool + Sync,
{
    let n = ds.n();
    if n > MIP_MAX_N {
        return Err(Error::usage(format!("weight enumeration limited to n <= {MIP_MAX_N}, got {n}")));
    }
    let c = cost_matrix(ds, metric);
    let found: Vec<(f64, Vec<u64>)> = weight_vectors(n)
        .into_par_iter()
        .filter(|th| feasible(&class_counts(ds, th)))
        .map(|th| (transport_enumerate(&c, n, &th), th))
        .collect();
    let feasible_count = found.len();
    let best = found
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(match best {
        Some((objective, th)) => OracleResult {
            objective,
            theta: Some(WeightVector::new(th)?),
            feasible_count,
        },
        None => OracleResult {
            objective: f64::INFINITY,
            theta: None,
            feasible_count: 0,
        },
    })
}

/// Integer optimum under the marginal constraint at `(t, eps)`.
pub fn brute_mip(ds: &Dataset, t: &[f64], epsilon: f64) -> Result<OracleResult> {
    brute_mip_with(ds, t, epsilon, Metric::Euclidean)
}

pub fn brute_mip_with(ds: &Dataset, t: &[f64], epsilon: f64, metric: Metric) -> Result<OracleResult> {
    check_target(ds, t, epsilon)?;
    let tr: Vec<BigRational> = t.iter().map(|&v| rational(v)).collect();
    let er = rational(epsilon);
    brute_force(ds, metric, |counts| marginal_feasible_exact(counts, &tr, &er))
}

/// Integer optimum under the marginal constraint at `(t, sqrt(1+eps) - 1)`,
/// with the irrational tolerance handled exactly.
pub fn brute_mip_bar(ds: &Dataset, t: &[f64], epsilon: f64, metric: Metric) -> Result<OracleResult> {
    check_target(ds, t, epsilon)?;
    let tr: Vec<BigRational> = t.iter().map(|&v| rational(v)).collect();
    let er = rational(epsilon);
    brute_force(ds, metric, |counts| marginal_bar_feasible_exact(counts, &tr, &er))
}

/// Integer optimum under the pairwise constraint at `eps`.
pub fn brute_pairwise_mip(ds: &Dataset, epsilon: f64) -> Result<OracleResult> {
    brute_pairwise_mip_with(ds, epsilon, Metric::Euclidean)
}

pub fn brute_pairwise_mip_with(ds: &Dataset, epsilon: f64, metric: Metric) -> Result<OracleResult> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be finite and nonnegative"));
    }
    let er = rational(epsilon);
    brute_force(ds, metric, |counts| pairwise_feasible_exact(counts, &er))
}

fn check_target(ds: &Dataset, t: &[f64], epsilon: f64) -> Result<()> {
    if t.len() != ds.n_y() || t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::domain("target must have one entry in [0, 1] per outcome"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon must be finite and nonnegative"));
    }
    Ok(())
}

/// Optimum of the continuous relaxation, solved as a dense LP over the full
/// `n x n` plan. `None` when infeasible.
pub fn lp_optimum(ds: &Dataset, t: &[f64], epsilon: f64, metric: Metric) -> Result<Option<f64>> {
    check_target(ds, t, epsilon)?;
    let n = ds.n();
    if n > 40 {
        return Err(Error::usage(format!("dense LP oracle limited to n <= 40, got {n}")));
    }
    let c = cost_matrix(ds, metric);
    let mut lp = microlp::Problem::new(OptimizationDirection::Minimize);
    let p: Vec<microlp::Variable> = c.iter().map(|&cij| lp.add_var(cij, (0.0, f64::INFINITY))).collect();
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (p[i * n + j], 1.0)).collect();
        lp.add_constraint(&row, ComparisonOp::Eq, 1.0);
    }
    // theta_j = sum_i P_ij; a row of the fairness system weighs column j by
    // its (d, y)
    for d in observed_classes(ds) {
        for (y, &ty) in t.iter().enumerate() {
            for upper in [true, false] {
                let mut terms = Vec::with_capacity(n * n);
                for j in 0..n {
                    let in_d = f64::from(u8::from(ds.d(j) == d));
                    let in_dy = f64::from(u8::from(ds.d(j) == d && ds.y(j) == y));
                    let a = if upper {
                        (1.0 + epsilon) * ty * in_d - in_dy
                    } else {
                        in_dy - ty / (1.0 + epsilon) * in_d
                    };
                    if a != 0.0 {
                        terms.extend((0..n).map(|i| (p[i * n + j], a)));
                    }
                }
                if !terms.is_empty() {
                    lp.add_constraint(&terms, ComparisonOp::Ge, 0.0);
                }
            }
        }
    }
    match lp.solve() {
        Ok(microlp::SolveOutcome::Solution(sol)) => Ok(Some(sol.objective())),
        Ok(microlp::SolveOutcome::Interrupted(_)) => Err(Error::Numerical("LP oracle interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::Numerical(format!("LP oracle: {e}"))),
    }
}

/// [`lp_optimum`] at the empirical outcome marginal.
pub fn lp_optimum_default(ds: &Dataset, epsilon: f64, metric: Metric) -> Result<Option<f64>> {
    lp_optimum(ds, &marginal_y(ds).probs, epsilon, metric)
}
