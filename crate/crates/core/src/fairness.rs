//! Demographic-parity constraints in group-compressed form and the
//! violation metrics used to check weight vectors.

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::dataset::{GroupIndex, MarginalY};
use crate::error::{Error, Result};

/// `max(p/q - 1, q/p - 1)` for positive `p`, `q`.
pub fn ratio_distance(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::domain(format!("ratio distance needs positive arguments, got ({p}, {q})")));
    }
    Ok((p / q - 1.0).max(q / p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Provenance of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowMeta {
    /// `p(y|d)` against the `(1+eps)` band around `t_y`.
    Fairness { d: usize, y: usize, side: Side },
    /// `N_group <= bound`, written as `(bound/n) * sum(N) - N_group >= 0`.
    CountUpper { group: usize, bound: u64 },
    /// `N_group >= bound`, written as `N_group - (bound/n) * sum(N) >= 0`.
    CountLower { group: usize, bound: u64 },
}

/// Rows `a_j` of the homogeneous system `A theta >= 0`, stored by group: row
/// `j` applied to a weight vector equals `sum_l coeff[j][l] * N_l` where
/// `N_l` is the total weight of group `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    coeff: Vec<f64>,
    m: usize,
    l: usize,
    epsilon: f64,
    target: MarginalY,
    row_meta: Vec<RowMeta>,
    /// `(d, y)` of each group, when built from a group index.
    group_dy: Option<Vec<(usize, usize)>>,
}

impl ConstraintMatrix {
    /// Builds a matrix from explicit rows, e.g. for hand-made instances.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        l: usize,
        epsilon: f64,
        target: MarginalY,
        row_meta: Vec<RowMeta>,
    ) -> Result<Self> {
        if rows.len() != row_meta.len() || rows.iter().any(|r| r.len() != l) {
            return Err(Error::usage("constraint rows do not match group count"));
        }
        Ok(ConstraintMatrix {
            m: rows.len(),
            coeff: rows.into_iter().flatten().collect(),
            l,
            epsilon,
            target,
            row_meta,
            group_dy: None,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn groups(&self) -> usize {
        self.l
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.coeff[j * self.l..(j + 1) * self.l]
    }

    pub fn coeff(&self, j: usize, l: usize) -> f64 {
        self.coeff[j * self.l + l]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target(&self) -> &MarginalY {
        &self.target
    }

    pub fn row_meta(&self) -> &[RowMeta] {
        &self.row_meta
    }

    /// Number of leading fairness rows (count-bound rows follow them).
    pub fn fairness_rows(&self) -> usize {
        self.row_meta
            .iter()
            .take_while(|r| matches!(r, RowMeta::Fairness { .. }))
            .count()
    }

    /// `v = A^T lambda` in group space.
    pub fn group_values(&self, lambda: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.l];
        for (j, &lj) in lambda.iter().enumerate() {
            if lj != 0.0 {
                for (vl, &a) in v.iter_mut().zip(self.row(j)) {
                    *vl += lj * a;
                }
            }
        }
        v
    }

    /// Row activities `A N` for group sums `N`.
    pub fn margins(&self, sums: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| self.row(j).iter().zip(sums).map(|(a, s)| a * s).sum())
            .collect()
    }

    /// `A N >= -tol * sum(N)` on every row.
    pub fn satisfied_by(&self, sums: &[f64], tol: f64) -> bool {
        let total: f64 = sums.iter().sum();
        self.margins(sums).iter().all(|&r| r >= -tol * total.max(1.0))
    }

    /// Whether integer group counts `N` with `lo <= N <= hi` and `sum N = n`
    /// satisfy every fairness row to within `1e-9 n`. `None` for matrices
    /// built without group labels.
    ///
    /// Each fairness row involves one class total `M_d` and one group count,
    /// so for fixed `M_d` the feasible counts form a box; the class totals
    /// are then combined by a subset-sum over `0..=n`.
    pub fn integer_feasible(&self, lo: &[u64], hi: &[u64], n: u64) -> Option<bool> {
        let dy = self.group_dy.as_ref()?;
        let nu = n as usize;
        let tol = 1e-9 * (n as f64).max(1.0);
        let eps = self.epsilon;
        let mut classes: Vec<usize> = dy.iter().map(|&(d, _)| d).collect();
        classes.sort_unstable();
        classes.dedup();
        // bit k set: some choice of the classes seen so far totals k
        let words = nu / 64 + 1;
        let mut reach = vec![0u64; words];
        reach[0] = 1;
        for d in classes {
            let members: Vec<usize> = (0..dy.len()).filter(|&g| dy[g].0 == d).collect();
            let rows: Vec<(usize, Side)> = self
                .row_meta
                .iter()
                .filter_map(|r| match *r {
                    RowMeta::Fairness { d: rd, y, side } if rd == d => Some((y, side)),
                    _ => None,
                })
                .collect();
            let m_lo: u64 = members.iter().map(|&g| lo[g]).sum();
            let m_hi: u64 = members.iter().map(|&g| hi[g]).sum::<u64>().min(n);
            let mut next = vec![0u64; words];
            for m in m_lo..=m_hi {
                let mf = m as f64;
                let mut glo: Vec<u64> = members.iter().map(|&g| lo[g]).collect();
                let mut ghi: Vec<u64> = members.iter().map(|&g| hi[g].min(m)).collect();
                let mut ok = true;
                for &(y, side) in &rows {
                    let ty = self.target.probs[y];
                    let k = members.iter().position(|&g| dy[g].1 == y);
                    match side {
                        Side::Upper => {
                            if let Some(k) = k {
                                let cap = ((1.0 + eps) * ty * mf + tol).floor();
                                ghi[k] = ghi[k].min(cap as u64);
                            }
                        }
                        Side::Lower => {
                            let need = (ty / (1.0 + eps) * mf - tol).ceil().max(0.0);
                            match k {
                                Some(k) => glo[k] = glo[k].max(need as u64),
                                None => ok &= need <= 0.0,
                            }
                        }
                    }
                }
                ok &= glo.iter().zip(&ghi).all(|(a, b)| a <= b);
                ok &= glo.iter().sum::<u64>() <= m && m <= ghi.iter().sum::<u64>();
                if ok {
                    shift_or(&mut next, &reach, m as usize);
                }
            }
            reach = next;
        }
        Some(reach[nu / 64] >> (nu % 64) & 1 == 1)
    }

    /// Appends count-bound rows for a weight total of `n`.
    pub fn with_count_bounds(&self, bounds: &[RowMeta], n: u64) -> Result<ConstraintMatrix> {
        let mut out = self.clone();
        let nf = n as f64;
        for meta in bounds {
            let row: Vec<f64> = match *meta {
                RowMeta::CountUpper { group, bound } if group < self.l => (0..self.l)
                    .map(|g| bound as f64 / nf - f64::from(u8::from(g == group)))
                    .collect(),
                RowMeta::CountLower { group, bound } if group < self.l => (0..self.l)
                    .map(|g| f64::from(u8::from(g == group)) - bound as f64 / nf)
                    .collect(),
                _ => return Err(Error::usage(format!("invalid count bound {meta:?}"))),
            };
            out.coeff.extend(row);
            out.row_meta.push(*meta);
            out.m += 1;
        }
        Ok(out)
    }
}

/// `dst |= src << k` on little-endian word bitsets of equal length.
fn shift_or(dst: &mut [u64], src: &[u64], k: usize) {
    let (w, b) = (k / 64, k % 64);
    for i in (w..dst.len()).rev() {
        let j = i - w;
        let mut v = src[j] << b;
        if b > 0 && j > 0 {
            v |= src[j - 1] >> (64 - b);
        }
        dst[i] |= v;
    }
}

/// One upper and one lower row per observed protected class and outcome,
/// ordered by `(d, y)` with the upper row first. With `dedup_binary_y` and
/// two outcomes only the rows for the first outcome are kept.
pub fn build_constraints(
    gi: &GroupIndex,
    t: &MarginalY,
    epsilon: f64,
    dedup_binary_y: bool,
) -> Result<ConstraintMatrix> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if t.len() != gi.n_y() {
        return Err(Error::usage(format!(
            "target has {} entries, expected {}",
            t.len(),
            gi.n_y()
        )));
    }
    if let Some(bad) = t.probs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain(format!("target entry {bad} outside [0, 1]")));
    }
    let ys: Vec<usize> = if dedup_binary_y && gi.n_y() == 2 {
        vec![0]
    } else {
        (0..gi.n_y()).collect()
    };
    let l = gi.len();
    let mut coeff = Vec::new();
    let mut row_meta = Vec::new();
    for d in gi.observed_d() {
        for &y in &ys {
            let ty = t.probs[y];
            for side in [Side::Upper, Side::Lower] {
                for g in 0..l {
                    let in_d = gi.group_d[g] == d;
                    let in_dy = in_d && gi.group_y[g] == y;
                    let ind = |b: bool| f64::from(u8::from(b));
                    coeff.push(match side {
                        Side::Upper => (1.0 + epsilon) * ty * ind(in_d) - ind(in_dy),
                        Side::Lower => ind(in_dy) - ty / (1.0 + epsilon) * ind(in_d),
                    });
                }
                row_meta.push(RowMeta::Fairness { d, y, side });
            }
        }
    }
    Ok(ConstraintMatrix {
        m: row_meta.len(),
        coeff,
        l,
        epsilon,
        target: t.clone(),
        row_meta,
        group_dy: Some((0..l).map(|g| (gi.group_d[g], gi.group_y[g])).collect()),
    })
}

/// Total weight per group.
pub fn group_sums<T: ToPrimitive + Copy>(theta: &[T], gi: &GroupIndex) -> Vec<f64> {
    assert_eq!(theta.len(), gi.n(), "weight vector length must equal n");
    let mut sums = vec![0.0; gi.len()];
    for (i, w) in theta.iter().enumerate() {
        sums[gi.group_of[i]] += w.to_f64().expect("weight representable as f64");
    }
    sums
}

/// `p(y|d)` for each protected class; `None` where the class has zero total
/// weight or no samples.
pub fn conditionals(sums: &[f64], gi: &GroupIndex) -> Vec<Option<Vec<f64>>> {
    let mut per_d = vec![vec![0.0; gi.n_y()]; gi.n_d()];
    for (g, &s) in sums.iter().enumerate() {
        per_d[gi.group_d[g]][gi.group_y[g]] += s;
    }
    per_d
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            (total > 0.0).then(|| row.iter().map(|v| v / total).collect())
        })
        .collect()
}

/// Largest overshoot of `p(y|d)` outside `[t_y/(1+eps), (1+eps) t_y]`.
pub fn fairness_violation<T: ToPrimitive + Copy>(
    theta: &[T],
    gi: &GroupIndex,
    t: &MarginalY,
    epsilon: f64,
) -> Result<f64> {
    fairness_violation_sums(&group_sums(theta, gi), gi, t, epsilon)
}

pub fn fairness_violation_sums(
    sums: &[f64],
    gi: &GroupIndex,
    t: &MarginalY,
    epsilon: f64,
) -> Result<f64> {
    if t.len() != gi.n_y() {
        return Err(Error::usage("target length does not match outcome count"));
    }
    let cond = conditionals(sums, gi);
    let mut worst: f64 = 0.0;
    for d in gi.observed_d() {
        let p = cond[d].as_ref().ok_or_else(|| {
            Error::Evaluation(format!("conditional undefined: protected class {d} has zero weight"))
        })?;
        for (y, &py) in p.iter().enumerate() {
            let ty = t.probs[y];
            worst = worst
                .max(ty / (1.0 + epsilon) - py)
                .max(py - (1.0 + epsilon) * ty);
        }
    }
    Ok(worst)
}

/// Largest ratio distance between conditionals of two protected classes,
/// over outcomes. Classes with zero total weight are skipped. A zero
/// conditional against a positive one gives `+inf`; two zeros count as equal.
pub fn pairwise_violation<T: ToPrimitive + Copy>(theta: &[T], gi: &GroupIndex) -> f64 {
    pairwise_violation_sums(&group_sums(theta, gi), gi)
}

pub fn pairwise_violation_sums(sums: &[f64], gi: &GroupIndex) -> f64 {
    let cond: Vec<Vec<f64>> = conditionals(sums, gi).into_iter().flatten().collect();
    let mut worst: f64 = 0.0;
    for a in 0..cond.len() {
        for b in a + 1..cond.len() {
            for (&p, &q) in cond[a].iter().zip(&cond[b]) {
                let j = match (p > 0.0, q > 0.0) {
                    (true, true) => ratio_distance(p, q).expect("positive arguments"),
                    (false, false) => 0.0,
                    _ => f64::INFINITY,
                };
                worst = worst.max(j);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{group_index, Dataset};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn toy() -> GroupIndex {
        let ds = Dataset::from_rows(&vec![vec![0.0]; 4], vec![0, 0, 1, 1], vec![0, 1, 0, 1], 2, 2)
            .unwrap();
        group_index(&ds)
    }

    fn half() -> MarginalY {
        MarginalY::new(vec![0.5, 0.5])
    }

    #[test]
    fn ratio_distance_examples() {
        assert_eq!(ratio_distance(0.5, 0.5).unwrap(), 0.0);
        assert_relative_eq!(ratio_distance(0.6, 0.3).unwrap(), 1.0);
        assert_relative_eq!(ratio_distance(0.3, 0.6).unwrap(), 1.0);
        assert!(matches!(ratio_distance(0.0, 0.3), Err(Error::Domain(_))));
        assert!(matches!(ratio_distance(0.3, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn toy_rows() {
        let cm = build_constraints(&toy(), &half(), 0.0, false).unwrap();
        assert_eq!(cm.m(), 8);
        assert_eq!(cm.row(0), &[-0.5, 0.5, 0.0, 0.0]);
        assert_eq!(cm.row_meta()[0], RowMeta::Fairness { d: 0, y: 0, side: Side::Upper });
        let dedup = build_constraints(&toy(), &half(), 0.0, true).unwrap();
        assert_eq!(dedup.m(), 4);
    }

    #[test]
    fn upper_coefficient_with_tolerance() {
        let cm = build_constraints(&toy(), &half(), 0.05, false).unwrap();
        assert_relative_eq!(cm.coeff(0, 0), -0.475, epsilon = 1e-15);
        assert_relative_eq!(cm.coeff(1, 0), 1.0 - 0.5 / 1.05, epsilon = 1e-15);
    }

    #[test]
    fn malformed_target_rejected() {
        let t = MarginalY::new(vec![1.2, -0.2]);
        assert!(matches!(build_constraints(&toy(), &t, 0.0, false), Err(Error::Domain(_))));
        assert!(matches!(build_constraints(&toy(), &half(), -0.1, false), Err(Error::Domain(_))));
    }

    #[test]
    fn violation_examples() {
        let gi = toy();
        assert_eq!(fairness_violation(&[1u64, 1, 1, 1], &gi, &half(), 0.3).unwrap(), 0.0);
        assert_relative_eq!(fairness_violation(&[2u64, 0, 1, 1], &gi, &half(), 0.0).unwrap(), 0.5);
        assert_relative_eq!(fairness_violation(&[0u64, 2, 1, 1], &gi, &half(), 0.0).unwrap(), 0.5);
        let err = fairness_violation(&[0u64, 0, 2, 2], &gi, &half(), 0.0).unwrap_err();
        assert!(matches!(err, Error::Evaluation(_)));
    }

    #[test]
    fn pairwise_examples() {
        let gi = toy();
        assert_eq!(pairwise_violation(&[1u64, 1, 1, 1], &gi), 0.0);
        assert_eq!(pairwise_violation(&[2u64, 0, 1, 1], &gi), f64::INFINITY);
        assert_eq!(pairwise_violation(&[0u64, 0, 2, 2], &gi), 0.0);
    }

    #[test]
    fn count_bound_rows() {
        let gi = toy();
        let cm = build_constraints(&gi, &half(), 0.1, false).unwrap();
        let bounded = cm
            .with_count_bounds(
                &[
                    RowMeta::CountUpper { group: 1, bound: 1 },
                    RowMeta::CountLower { group: 0, bound: 2 },
                ],
                4,
            )
            .unwrap();
        assert_eq!(bounded.m(), cm.m() + 2);
        assert_eq!(bounded.fairness_rows(), cm.m());
        let m = bounded.margins(&[2.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(m[cm.m()], 0.0);
        assert_relative_eq!(m[cm.m() + 1], 0.0);
        let m = bounded.margins(&[1.0, 2.0, 1.0, 0.0]);
        assert!(m[cm.m()] < 0.0 && m[cm.m() + 1] < 0.0);
    }

    fn random_instance() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<u64>, f64, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(0u64..5, n),
                0.0f64..0.5,
                proptest::collection::vec(0.0f64..1.0, 3),
            )
        })
    }

    proptest! {
        #[test]
        fn violation_matches_constraint_rows((d, y, theta, eps, t) in random_instance()) {
            let n = d.len();
            let ds = Dataset::from_rows(&vec![vec![0.0]; n], d, y, 3, 3).unwrap();
            let gi = group_index(&ds);
            let sums = group_sums(&theta, &gi);
            let cond = conditionals(&sums, &gi);
            prop_assume!(gi.observed_d().iter().all(|&d| cond[d].is_some()));
            let t = MarginalY::new(t);
            let cm = build_constraints(&gi, &t, eps, false).unwrap();
            let v = fairness_violation(&theta, &gi, &t, eps).unwrap();
            let rows_ok = cm.margins(&sums).iter().all(|&r| r >= -1e-12 * n as f64);
            // away from the boundary the two views agree
            prop_assume!(v == 0.0 || v > 1e-9);
            prop_assert_eq!(v == 0.0, rows_ok);
        }

        #[test]
        fn violation_scale_invariant((d, y, theta, eps, t) in random_instance(), c in 0.1f64..10.0) {
            let n = d.len();
            let ds = Dataset::from_rows(&vec![vec![0.0]; n], d, y, 3, 3).unwrap();
            let gi = group_index(&ds);
            let t = MarginalY::new(t);
            let scaled: Vec<f64> = theta.iter().map(|&w| c * w as f64).collect();
            match fairness_violation(&theta, &gi, &t, eps) {
                Ok(v) => {
                    let w = fairness_violation(&scaled, &gi, &t, eps).unwrap();
                    prop_assert!((v - w).abs() <= 1e-12);
                }
                Err(_) => prop_assert!(fairness_violation(&scaled, &gi, &t, eps).is_err()),
            }
        }
    }

    fn compositions(n: u64, parts: usize) -> Vec<Vec<u64>> {
        if parts == 1 {
            return vec![vec![n]];
        }
        (0..=n)
            .flat_map(|k| {
                compositions(n - k, parts - 1).into_iter().map(move |mut c| {
                    c.insert(0, k);
                    c
                })
            })
            .collect()
    }

    proptest! {
        #[test]
        fn integer_feasibility_matches_enumeration(
            n in 1u64..12,
            t0 in 0.0f64..=1.0,
            t1 in 0.0f64..=1.0,
            eps in prop_oneof![Just(0.0), 0.0f64..0.5],
            three_y in any::<bool>(),
            raw in proptest::collection::vec((0u64..12, 0u64..12), 6),
        ) {
            let (d, y): (Vec<usize>, Vec<usize>) = if three_y {
                (vec![0, 0, 0, 1, 1], vec![0, 1, 2, 0, 2])
            } else {
                (vec![0, 0, 1, 1], vec![0, 1, 0, 1])
            };
            let n_y = if three_y { 3 } else { 2 };
            let ds = Dataset::from_rows(&vec![vec![0.0]; d.len()], d, y, 2, n_y).unwrap();
            let gi = group_index(&ds);
            let mut probs = vec![t0, t1];
            if three_y {
                probs.push(1.0 - t0.min(1.0));
            }
            let cm = build_constraints(&gi, &MarginalY::new(probs), eps, false).unwrap();
            let l = gi.len();
            let lo: Vec<u64> = raw[..l].iter().map(|&(a, b)| a.min(b).min(n)).collect();
            let hi: Vec<u64> = raw[..l].iter().map(|&(a, b)| a.max(b).min(n)).collect();
            let want = compositions(n, l).into_iter().any(|c| {
                (0..l).all(|g| lo[g] <= c[g] && c[g] <= hi[g])
                    && cm.satisfied_by(&c.iter().map(|&v| v as f64).collect::<Vec<_>>(), 1e-9)
            });
            prop_assert_eq!(cm.integer_feasible(&lo, &hi, n), Some(want));
        }
    }
}
