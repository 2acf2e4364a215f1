mod common;

use common::{gaussian_instance, rel_close};
use fairwasp::cost::Metric;
use fairwasp::oracle::{cost_matrix, lp_optimum};
use fairwasp::{build_constraints, compress, evaluate, group_index, marginal_y, ConstraintMatrix, Dataset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(ds: &Dataset, eps: f64) -> (fairwasp::CompressedCost, ConstraintMatrix) {
    let gi = group_index(ds);
    let cc = compress(ds, &gi);
    let cm = build_constraints(&gi, &marginal_y(ds), eps, false).unwrap();
    (cc, cm)
}

/// Row maxima of the dense matrix `v_{group(k)} - C[i][k]`.
fn dense_dual(ds: &Dataset, cm: &ConstraintMatrix, lambda: &[f64]) -> (f64, Vec<f64>) {
    let n = ds.n();
    let gi = group_index(ds);
    let c = cost_matrix(ds, Metric::Euclidean);
    let v = cm.group_values(lambda);
    let mut value = 0.0;
    let mut counts = vec![0.0; gi.len()];
    for i in 0..n {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
        for k in 0..n {
            let s = v[gi.group_of[k]] - c[i * n + k];
            if s > best {
                best = s;
                arg = k;
            }
        }
        value += best;
        counts[gi.group_of[arg]] += 1.0;
    }
    (value, cm.margins(&counts))
}

fn random_lambda(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.0..scale)).collect()
}

#[test]
fn matches_dense_row_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..50 {
        let n = rng.random_range(2..=40);
        let ds = gaussian_instance(n, seed);
        let eps = [0.0, 0.05, 0.2][seed as usize % 3];
        let (cc, cm) = setup(&ds, eps);
        let lambda = random_lambda(cm.m(), 5.0, &mut rng);
        let e = evaluate(&lambda, &cc, &cm).unwrap();
        let (value, sub) = dense_dual(&ds, &cm, &lambda);
        assert!(rel_close(e.value, value, 1e-10), "seed {seed}: {} vs {value}", e.value);
        for (a, b) in e.subgradient.iter().zip(&sub) {
            assert!(rel_close(*a, *b, 1e-10), "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn subgradient_inequality_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 0..500 {
        let ds = gaussian_instance(rng.random_range(2..=30), 1000 + k / 10);
        let (cc, cm) = setup(&ds, 0.1);
        let l1 = random_lambda(cm.m(), 10.0, &mut rng);
        let l2 = random_lambda(cm.m(), 10.0, &mut rng);
        let e1 = evaluate(&l1, &cc, &cm).unwrap();
        let f2 = evaluate(&l2, &cc, &cm).unwrap().value;
        let lin: f64 = e1.value + e1.subgradient.iter().zip(l2.iter().zip(&l1)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
        assert!(f2 >= lin - 1e-9 * (1.0 + f2.abs()), "pair {k}: {f2} < {lin}");
    }
}

#[test]
fn weak_duality_against_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for seed in 0..20 {
        let ds = gaussian_instance(rng.random_range(3..=7), 2000 + seed);
        let eps = 0.1;
        let (cc, cm) = setup(&ds, eps);
        let opt = lp_optimum(&ds, &marginal_y(&ds).probs, eps, Metric::Euclidean).unwrap();
        for _ in 0..10 {
            let lambda = random_lambda(cm.m(), 20.0, &mut rng);
            let f = evaluate(&lambda, &cc, &cm).unwrap().value;
            if let Some(opt) = opt {
                assert!(-f <= opt + 1e-9, "seed {seed}: {} > {opt}", -f);
            }
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let ds = fairwasp::generate_synthetic(5000, 3).unwrap();
    let (cc, cm) = setup(&ds, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let lambda = random_lambda(cm.m(), 3.0, &mut rng);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate(&lambda, &cc, &cm).unwrap())
    };
    let a = run(1);
    for threads in [2, 4, 7] {
        let b = run(threads);
        assert!(rel_close(a.value, b.value, 1e-10));
        assert_eq!(a.chosen_group, b.chosen_group);
        assert_eq!(a.column_counts, b.column_counts);
        for (x, y) in a.subgradient.iter().zip(&b.subgradient) {
            assert!(rel_close(*x, *y, 1e-10));
        }
    }
}

#[test]
fn convex_along_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for seed in 0..20 {
        let ds = gaussian_instance(25, 3000 + seed);
        let (cc, cm) = setup(&ds, 0.05);
        let l1 = random_lambda(cm.m(), 10.0, &mut rng);
        let l2 = random_lambda(cm.m(), 10.0, &mut rng);
        let pts: Vec<Vec<f64>> = (0..=20)
            .map(|k| {
                let s = k as f64 / 20.0;
                l1.iter().zip(&l2).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        let evals: Vec<_> = pts.iter().map(|p| evaluate(p, &cc, &cm).unwrap()).collect();
        for (p, e) in pts.iter().zip(&evals) {
            for (q, f) in pts.iter().zip(&evals) {
                let lin: f64 = e.value + e.subgradient.iter().zip(q.iter().zip(p)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
                assert!(f.value >= lin - 1e-9 * (1.0 + f.value.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrangian_identity(seed in 0u64..10_000, n in 2usize..30, scale in 0.0f64..50.0) {
        let ds = gaussian_instance(n, seed);
        let (cc, cm) = setup(&ds, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = random_lambda(cm.m(), scale.max(1e-9), &mut rng);
        let e = evaluate(&lambda, &cc, &cm).unwrap();
        // transport cost of the row-max plan = lambda^T A N - F
        let lin: f64 = lambda.iter().zip(&e.subgradient).map(|(a, b)| a * b).sum();
        prop_assert!(rel_close(e.primal_objective, lin - e.value, 1e-9));
        prop_assert_eq!(e.column_counts.iter().sum::<u64>(), n as u64);
        prop_assert!(e.primal_objective >= 0.0);
    }

    #[test]
    fn zero_lambda_keeps_every_row(seed in 0u64..10_000, n in 2usize..30) {
        let ds = gaussian_instance(n, seed);
        let (cc, cm) = setup(&ds, 0.05);
        let e = evaluate(&vec![0.0; cm.m()], &cc, &cm).unwrap();
        prop_assert_eq!(e.value, 0.0);
        prop_assert_eq!(e.primal_objective, 0.0);
        prop_assert_eq!(e.column_counts, vec![1; n]);
    }
}
