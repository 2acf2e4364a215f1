mod common;

use common::gaussian_instance;
use fairwasp::accpm::{analytic_center, relative_gap, solve, CutKind, CutSet};
use fairwasp::cost::Metric;
use fairwasp::dual::{separation_oracle, Cut};
use fairwasp::oracle::lp_optimum;
use fairwasp::{
    build_constraints, compress, generate_synthetic, group_index, marginal_y, AccpmStatus, Problem, SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn barrier_of_earlier_cuts_never_increases() {
    let cfg = SolverConfig::default();
    for seed in 0..10 {
        let ds = gaussian_instance(30, 500 + seed);
        let gi = group_index(&ds);
        let cc = compress(&ds, &gi);
        let cm = build_constraints(&gi, &marginal_y(&ds), 0.05, false).unwrap();
        let mut cuts = CutSet::new_box(cm.m(), 100.0);
        let mut x = analytic_center(&cuts, &vec![50.0; cm.m()], &cfg).unwrap();
        for _ in 0..40 {
            let before = cuts.potential(&x);
            let Cut::Objective(e) = separation_oracle(&x, &cc, &cm).unwrap() else {
                panic!("centers stay in the box");
            };
            let b: f64 = e.subgradient.iter().zip(&x).map(|(g, v)| g * v).sum();
            let old = cuts.clone();
            cuts.push(&e.subgradient, b, CutKind::Objective);
            x = match analytic_center(&cuts, &x, &cfg) {
                Ok(c) => c,
                Err(_) => break,
            };
            let after = old.potential(&x);
            assert!(after >= before - 1e-7 * (1.0 + before.abs()), "seed {seed}: {after} < {before}");
        }
    }
}

#[test]
fn dual_bound_never_exceeds_lp_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..20 {
        let ds = gaussian_instance(rng.random_range(3..=7), 600 + seed);
        let eps = [0.05, 0.2][seed as usize % 2];
        let p = Problem::from_dataset(&ds, Metric::Euclidean, true);
        let cm = build_constraints(&p.gi, &p.target, eps, false).unwrap();
        let rep = solve(&p.cc, &cm, &SolverConfig::default()).unwrap();
        let opt = lp_optimum(&ds, &p.target.probs, eps, Metric::Euclidean).unwrap();
        match opt {
            Some(opt) => assert!(rep.best_dual <= opt + 1e-9, "seed {seed}: {} > {opt}", rep.best_dual),
            None => assert_eq!(rep.status, AccpmStatus::Infeasible, "seed {seed}"),
        }
        if rep.status == AccpmStatus::Infeasible {
            assert!(opt.is_none(), "seed {seed}: certificate on a feasible LP");
        }
    }
}

#[test]
fn converged_reports_have_sound_gaps() {
    for seed in 0..5 {
        let ds = generate_synthetic(400, seed).unwrap();
        let p = Problem::from_dataset(&ds, Metric::Euclidean, false);
        let cm = build_constraints(&p.gi, &p.target, 0.05, false).unwrap();
        let rep = solve(&p.cc, &cm, &SolverConfig::default()).unwrap();
        if rep.status == AccpmStatus::Converged {
            assert!(rep.best_primal - rep.best_dual >= -1e-9);
            assert!(rep.rel_gap <= 1e-3);
            assert_eq!(rep.rel_gap, relative_gap(rep.best_primal, rep.best_dual));
        }
        assert!(rep.lambda_star.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn root_iterations_stay_bounded_on_synthetic_data() {
    for n in [100, 200, 400, 800, 1600] {
        for seed in 0..3 {
            let ds = generate_synthetic(n, seed).unwrap();
            let p = Problem::from_dataset(&ds, Metric::Euclidean, false);
            let cm = build_constraints(&p.gi, &p.target, 0.05, false).unwrap();
            assert!(cm.m() <= 8);
            let rep = solve(&p.cc, &cm, &SolverConfig::default()).unwrap();
            assert!(rep.iterations < 300, "n={n} seed={seed}: {} iterations", rep.iterations);
        }
    }
}

#[test]
fn infeasible_toy_gets_certificate() {
    let ds = fairwasp::Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], vec![0, 1], 2, 2).unwrap();
    let gi = group_index(&ds);
    let cc = compress(&ds, &gi);
    let cm = build_constraints(&gi, &marginal_y(&ds), 0.0, false).unwrap();
    let rep = solve(&cc, &cm, &SolverConfig::default()).unwrap();
    assert_eq!(rep.status, AccpmStatus::Infeasible);
    let cert = rep.certificate.unwrap();
    assert!(cert.iter().all(|&v| v >= 0.0));
    assert!(cm.group_values(&cert).iter().all(|&v| v < 0.0));
}
