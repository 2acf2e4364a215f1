//! Exact integer stage: branch-and-bound over group counts `N`.
//!
//! For fixed integer counts the best weights come from an assignment of rows
//! to groups with prescribed group sizes, which [`transport_to_counts`] solves
//! exactly. Node relaxations add count bounds as homogeneous rows and reuse
//! the cutting-plane solver.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::accpm::{relative_gap, solve_with, AccpmStatus, SolveOptions, SolverConfig, SolverReport};
use crate::cost::CompressedCost;
use crate::error::Result;
use crate::fairness::{ConstraintMatrix, RowMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Rows assigned to groups with exactly prescribed group sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub group_of_row: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    /// Each row lands on its nearest column inside its assigned group.
    pub fn theta(&self, cc: &CompressedCost) -> Vec<u64> {
        let mut theta = vec![0u64; cc.n()];
        for (i, &g) in self.group_of_row.iter().enumerate() {
            theta[cc.argmin(i, g)] += 1;
        }
        theta
    }
}

/// Minimum-cost assignment of rows to groups with `target[l]` rows in group
/// `l`. Successive shortest paths on the `L`-node group graph: arc `a -> b`
/// moves the row of `a` with the cheapest switch cost `c_ib - c_ia`.
/// Returns `None` when `target` does not sum to `n`.
pub fn transport_to_counts(cc: &CompressedCost, target: &[u64]) -> Option<Assignment> {
    let (n, l) = (cc.n(), cc.groups());
    if target.len() != l || target.iter().sum::<u64>() != n as u64 {
        return None;
    }
    // unconstrained optimum: every row on its cheapest group
    let mut assign: Vec<usize> = (0..n)
        .map(|i| {
            let row = cc.row_min(i);
            (1..l).fold(0, |b, g| if row[g] < row[b] { g } else { b })
        })
        .collect();
    let mut count = vec![0u64; l];
    for &g in &assign {
        count[g] += 1;
    }

    let mut heaps: Vec<BinaryHeap<Reverse<(Key, usize)>>> = vec![BinaryHeap::new(); l * l];
    let push_row = |heaps: &mut Vec<BinaryHeap<Reverse<(Key, usize)>>>, i: usize, a: usize| {
        for b in 0..l {
            if b != a {
                heaps[a * l + b].push(Reverse((Key(cc.min(i, b) - cc.min(i, a)), i)));
            }
        }
    };
    for (i, &g) in assign.iter().enumerate() {
        push_row(&mut heaps, i, g);
    }

    loop {
        let excess: Vec<usize> = (0..l).filter(|&g| count[g] > target[g]).collect();
        if excess.is_empty() {
            break;
        }
        // arc weights, discarding rows that have left their group
        let mut w = vec![f64::INFINITY; l * l];
        for a in 0..l {
            for b in 0..l {
                if a == b {
                    continue;
                }
                let h = &mut heaps[a * l + b];
                while let Some(Reverse((k, i))) = h.peek().copied() {
                    if assign[i] == a {
                        w[a * l + b] = k.0;
                        break;
                    }
                    h.pop();
                }
            }
        }
        let mut dist = vec![f64::INFINITY; l];
        let mut pred = vec![usize::MAX; l];
        for &a in &excess {
            dist[a] = 0.0;
        }
        for _ in 0..l {
            let mut changed = false;
            for a in 0..l {
                if dist[a].is_infinite() {
                    continue;
                }
                for b in 0..l {
                    let c = w[a * l + b];
                    let nd = dist[a] + c;
                    let better = dist[b].is_infinite() || nd < dist[b] - 1e-15 * (1.0 + dist[b].abs());
                    if a != b && c.is_finite() && better {
                        dist[b] = nd;
                        pred[b] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..l)
            .filter(|&g| count[g] < target[g] && dist[g].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))?;
        let mut path = vec![sink];
        while pred[*path.last().expect("nonempty")] != usize::MAX {
            let p = pred[*path.last().expect("nonempty")];
            if path.contains(&p) || path.len() > l {
                log::warn!("negative cycle in transport residual graph");
                return None;
            }
            path.push(p);
        }
        path.reverse();
        let moves: Vec<(usize, usize, usize)> = path
            .windows(2)
            .map(|ab| {
                let (a, b) = (ab[0], ab[1]);
                let Reverse((_, i)) = *heaps[a * l + b].peek().expect("arc has a row");
                (i, a, b)
            })
            .collect();
        for (i, a, b) in moves {
            assign[i] = b;
            count[a] -= 1;
            count[b] += 1;
            push_row(&mut heaps, i, b);
        }
    }
    let cost = (0..n).map(|i| cc.min(i, assign[i])).sum();
    Some(Assignment {
        group_of_row: assign,
        cost,
    })
}

/// Largest-remainder rounding of nonnegative counts to integers summing to
/// `total`.
pub fn round_counts(x: &[f64], total: u64) -> Vec<u64> {
    let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let mut out: Vec<u64> = clamped.iter().map(|v| v.floor() as u64).collect();
    let mut sum: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = clamped[a] - clamped[a].floor();
        let fb = clamped[b] - clamped[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut k = 0;
    while sum < total && !order.is_empty() {
        out[order[k % order.len()]] += 1;
        sum += 1;
        k += 1;
    }
    while sum > total {
        let g = (0..out.len()).rev().max_by_key(|&g| out[g]).expect("nonempty");
        out[g] -= 1;
        sum -= 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncumbentSource {
    /// Row-max plan of a dual evaluation.
    DualEvaluation,
    /// Exact transport at rounded or fixed group counts.
    Transport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub theta: Vec<u64>,
    pub group_counts: Vec<u64>,
    pub objective: f64,
    pub ties: usize,
    pub source: IncumbentSource,
}

#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub incumbent: Option<Incumbent>,
    /// Proven lower bound on the integer optimum.
    pub lower_bound: f64,
    pub nodes: usize,
    pub iterations: usize,
    /// No open nodes remain or all are within tolerance of the incumbent.
    pub complete: bool,
    pub numerical_failures: usize,
}

struct Node {
    lo: Vec<u64>,
    hi: Vec<u64>,
    lb: f64,
    nbar: Option<Vec<f64>>,
    plans: Vec<(Vec<f64>, f64)>,
}

struct Search<'a> {
    cc: &'a CompressedCost,
    base: &'a ConstraintMatrix,
    incumbent: Option<Incumbent>,
    evaluated: HashMap<Vec<u64>, Option<f64>>,
    iterations: usize,
    numerical_failures: usize,
}

impl Search<'_> {
    fn ub(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective)
    }

    fn offer(&mut self, inc: Incumbent) {
        if inc.objective < self.ub() {
            log::debug!("new incumbent {:.6} ({:?})", inc.objective, inc.source);
            self.incumbent = Some(inc);
        }
    }

    fn offer_report(&mut self, rep: &SolverReport) {
        if let Some(c) = &rep.candidate {
            self.offer(Incumbent {
                theta: c.theta.clone(),
                group_counts: c.group_counts.clone(),
                objective: c.objective,
                ties: c.ties,
                source: IncumbentSource::DualEvaluation,
            });
        }
    }

    /// Exact objective at integer counts if they satisfy the base rows.
    fn try_counts(&mut self, counts: &[u64]) -> Option<f64> {
        if let Some(v) = self.evaluated.get(counts) {
            return *v;
        }
        let sums: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let result = if self.base.satisfied_by(&sums, 1e-9) {
            transport_to_counts(self.cc, counts).map(|a| {
                let obj = a.cost;
                self.offer(Incumbent {
                    theta: a.theta(self.cc),
                    group_counts: counts.to_vec(),
                    objective: obj,
                    ties: 0,
                    source: IncumbentSource::Transport,
                });
                obj
            })
        } else {
            None
        };
        self.evaluated.insert(counts.to_vec(), result);
        result
    }
}

/// Tightens bounds using `sum N = n`; `false` if the box is empty.
fn tighten(lo: &mut [u64], hi: &mut [u64], n: u64) -> bool {
    loop {
        let slo: u64 = lo.iter().sum();
        let shi: u64 = hi.iter().sum();
        if slo > n || shi < n {
            return false;
        }
        let mut changed = false;
        for g in 0..lo.len() {
            let h = n - (slo - lo[g]);
            if h < hi[g] {
                hi[g] = h;
                changed = true;
            }
            let l = n.saturating_sub(shi - hi[g]);
            if l > lo[g] {
                lo[g] = l;
                changed = true;
            }
            if lo[g] > hi[g] {
                return false;
            }
        }
        if !changed {
            return true;
        }
    }
}

fn children(node: &Node) -> Vec<(Vec<u64>, Vec<u64>)> {
    let free: Vec<usize> = (0..node.lo.len()).filter(|&g| node.lo[g] < node.hi[g]).collect();
    let split = |g: usize, lo_hi: u64, hi_lo: u64| {
        let mut a = (node.lo.clone(), node.hi.clone());
        a.1[g] = lo_hi;
        let mut b = (node.lo.clone(), node.hi.clone());
        b.0[g] = hi_lo;
        vec![a, b]
    };
    let widest = *free
        .iter()
        .max_by(|&&a, &&b| (node.hi[a] - node.lo[a]).cmp(&(node.hi[b] - node.lo[b])).then(b.cmp(&a)))
        .expect("caller checks free coordinates");
    let Some(nbar) = &node.nbar else {
        let mid = node.lo[widest] + (node.hi[widest] - node.lo[widest]) / 2;
        return split(widest, mid, mid + 1);
    };
    let clamp = |g: usize| nbar[g].clamp(node.lo[g] as f64, node.hi[g] as f64);
    let frac = |g: usize| {
        let v = clamp(g);
        (v - v.round()).abs()
    };
    let g = *free
        .iter()
        .max_by(|&&a, &&b| frac(a).total_cmp(&frac(b)).then(b.cmp(&a)))
        .expect("nonempty");
    if frac(g) > 1e-6 {
        let v = clamp(g);
        return split(g, v.floor() as u64, v.ceil() as u64);
    }
    let g = widest;
    let k = (clamp(g).round() as u64).clamp(node.lo[g], node.hi[g]);
    let mut out = Vec::new();
    if k > node.lo[g] {
        let mut c = (node.lo.clone(), node.hi.clone());
        c.1[g] = k - 1;
        out.push(c);
    }
    let mut c = (node.lo.clone(), node.hi.clone());
    c.0[g] = k;
    c.1[g] = k;
    out.push(c);
    if k < node.hi[g] {
        let mut c = (node.lo.clone(), node.hi.clone());
        c.0[g] = k + 1;
        out.push(c);
    }
    out
}

fn bound_rows(lo: &[u64], hi: &[u64], n: u64) -> Vec<RowMeta> {
    let mut rows = Vec::new();
    for g in 0..lo.len() {
        if hi[g] < n {
            rows.push(RowMeta::CountUpper { group: g, bound: hi[g] });
        }
        if lo[g] > 0 {
            rows.push(RowMeta::CountLower { group: g, bound: lo[g] });
        }
    }
    rows
}

/// Best-first branch-and-bound seeded with the root relaxation `root`.
pub fn branch_and_bound(
    cc: &CompressedCost,
    base: &ConstraintMatrix,
    root: &SolverReport,
    cfg: &SolverConfig,
    max_nodes: usize,
) -> Result<BranchOutcome> {
    let n = cc.n() as u64;
    let l = cc.groups();
    let mut s = Search {
        cc,
        base,
        incumbent: None,
        evaluated: HashMap::new(),
        iterations: 0,
        numerical_failures: 0,
    };
    s.offer_report(root);
    if base.integer_feasible(&vec![0; l], &vec![n; l], n) == Some(false) {
        log::info!("relaxation feasible but no integer group counts are");
        return Ok(BranchOutcome {
            incumbent: None,
            lower_bound: f64::INFINITY,
            nodes: 1,
            iterations: 0,
            complete: true,
            numerical_failures: 0,
        });
    }
    let root_nbar = root.relaxation.as_ref().map(|r| r.group_counts.clone());
    if let Some(nb) = &root_nbar {
        s.try_counts(&round_counts(nb, n));
    }

    let mut open: BinaryHeap<Reverse<(Key, usize)>> = BinaryHeap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut fathomed_min = f64::INFINITY;
    let mut created = 1;
    let root_node = Node {
        lo: vec![0; l],
        hi: vec![n; l],
        lb: root.best_dual,
        nbar: root_nbar,
        plans: root.plans.clone(),
    };
    open.push(Reverse((Key(root_node.lb), 0)));
    nodes.push(root_node);
    let mut complete = true;

    while let Some(Reverse((Key(lb), id))) = open.pop() {
        let ub = s.ub();
        if lb >= ub || relative_gap(ub, lb) <= cfg.gap_tol {
            // best-first: every open node is at least as good as this one
            open.push(Reverse((Key(lb), id)));
            break;
        }
        if created >= max_nodes {
            open.push(Reverse((Key(lb), id)));
            complete = false;
            break;
        }
        let node = std::mem::replace(
            &mut nodes[id],
            Node {
                lo: Vec::new(),
                hi: Vec::new(),
                lb,
                nbar: None,
                plans: Vec::new(),
            },
        );
        for (mut lo, mut hi) in children(&node) {
            created += 1;
            if !tighten(&mut lo, &mut hi, n) || base.integer_feasible(&lo, &hi, n) == Some(false) {
                continue;
            }
            let free = (0..l).filter(|&g| lo[g] < hi[g]).count();
            if free <= 1 {
                // counts fully determined by sum N = n
                let mut counts = lo.clone();
                let rest = n - counts.iter().sum::<u64>();
                if let Some(g) = (0..l).find(|&g| lo[g] < hi[g]) {
                    counts[g] += rest;
                }
                s.try_counts(&counts);
                continue;
            }
            let cm = base.with_count_bounds(&bound_rows(&lo, &hi, n), n)?;
            let opts = SolveOptions {
                cutoff: s.incumbent.as_ref().map(|i| i.objective),
                candidate_rows: Some(base.m()),
                dual_floor: Some(node.lb),
                seed_plans: node.plans.clone(),
            };
            let rep = solve_with(cc, &cm, cfg, &opts)?;
            s.iterations += rep.iterations;
            s.offer_report(&rep);
            let child_lb = rep.best_dual.max(node.lb);
            match rep.status {
                AccpmStatus::Infeasible => continue,
                AccpmStatus::Converged | AccpmStatus::CutoffReached => {
                    fathomed_min = fathomed_min.min(child_lb);
                    continue;
                }
                AccpmStatus::NumericalFailure => s.numerical_failures += 1,
                AccpmStatus::RelaxationSolved | AccpmStatus::IterationLimit => {}
            }
            let nbar = rep.relaxation.as_ref().map(|r| r.group_counts.clone());
            if let Some(nb) = &nbar {
                s.try_counts(&round_counts(nb, n));
            }
            let ub = s.ub();
            if child_lb >= ub || relative_gap(ub, child_lb) <= cfg.gap_tol {
                fathomed_min = fathomed_min.min(child_lb);
                continue;
            }
            let id = nodes.len();
            nodes.push(Node {
                lo,
                hi,
                lb: child_lb,
                nbar,
                plans: rep.plans,
            });
            open.push(Reverse((Key(child_lb), id)));
        }
    }
    let open_min = open.peek().map_or(f64::INFINITY, |Reverse((Key(v), _))| *v);
    let lower_bound = open_min.min(fathomed_min).min(s.ub());
    log::info!(
        "branch-and-bound: {} nodes, incumbent {:.6}, lower bound {:.6}",
        created,
        s.ub(),
        lower_bound
    );
    Ok(BranchOutcome {
        incumbent: s.incumbent,
        lower_bound,
        nodes: created,
        iterations: s.iterations,
        complete,
        numerical_failures: s.numerical_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cc(n: usize, l: usize, seed: u64) -> CompressedCost {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min: Vec<f64> = (0..n * l).map(|_| rng.random_range(0.0..5.0)).collect();
        let argmin = (0..n * l).map(|k| (k % n) as u32).collect();
        CompressedCost::from_parts(n, l, min, argmin).unwrap()
    }

    /// All assignments of `n` rows to `l` groups with the given sizes.
    fn brute(cc: &CompressedCost, target: &[u64]) -> f64 {
        let (n, l) = (cc.n(), cc.groups());
        let mut best = f64::INFINITY;
        let mut assign = vec![0usize; n];
        loop {
            let mut cnt = vec![0u64; l];
            for &g in &assign {
                cnt[g] += 1;
            }
            if cnt == target {
                best = best.min((0..n).map(|i| cc.min(i, assign[i])).sum());
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best;
                }
                assign[k] += 1;
                if assign[k] < l {
                    break;
                }
                assign[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn transport_matches_enumeration() {
        for seed in 0..30 {
            let (n, l) = (7, 3);
            let cc = random_cc(n, l, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let a = rng.random_range(0..=n as u64);
            let b = rng.random_range(0..=n as u64 - a);
            let target = vec![a, b, n as u64 - a - b];
            let got = transport_to_counts(&cc, &target).unwrap();
            let want = brute(&cc, &target);
            assert!((got.cost - want).abs() < 1e-9, "seed {seed}: {} vs {want}", got.cost);
            let mut cnt = vec![0u64; l];
            for &g in &got.group_of_row {
                cnt[g] += 1;
            }
            assert_eq!(cnt, target);
        }
    }

    #[test]
    fn transport_rejects_wrong_total() {
        let cc = random_cc(4, 2, 1);
        assert!(transport_to_counts(&cc, &[1, 1]).is_none());
    }

    #[test]
    fn rounding_preserves_total() {
        assert_eq!(round_counts(&[1.4, 2.6, 3.0], 7), vec![1, 3, 3]);
        assert_eq!(round_counts(&[0.5, 0.5], 1), vec![1, 0]);
        assert_eq!(round_counts(&[2.2, 2.2, 2.6], 7), vec![2, 2, 3]);
        assert_eq!(round_counts(&[-0.1, 3.05], 3), vec![0, 3]);
    }

    #[test]
    fn tighten_uses_total() {
        let (mut lo, mut hi) = (vec![0, 0, 0], vec![2, 2, 10]);
        assert!(tighten(&mut lo, &mut hi, 6));
        assert_eq!(lo, vec![0, 0, 2]);
        assert_eq!(hi, vec![2, 2, 6]);
        let (mut lo, mut hi) = (vec![4, 3], vec![5, 5]);
        assert!(!tighten(&mut lo, &mut hi, 6));
    }
}
