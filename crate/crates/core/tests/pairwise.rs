mod common;

use common::gaussian_instance;
use fairwasp::cost::Metric;
use fairwasp::oracle::{
    brute_mip_bar, brute_pairwise_mip, class_counts, geometric_target_feasible_exact, marginal_bar_feasible_exact,
    pairwise_feasible_exact, rational,
};
use fairwasp::pairwise::{epsilon_bar, h_objective};
use fairwasp::{pairwise_violation, solve_pw, FairwaspConfig, Problem, PwConfig, PwStatus};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_theta(n: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    // mostly near-uniform so that a fair share of samples is feasible
    let mut th = vec![1u64; n];
    for _ in 0..rng.random_range(0..=n) {
        let from = rng.random_range(0..n);
        if th[from] > 0 {
            th[from] -= 1;
            th[rng.random_range(0..n)] += 1;
        }
    }
    th
}

#[test]
fn bridge_holds_in_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut hits_a, mut hits_b) = (0, 0);
    for k in 0..1000 {
        let n = rng.random_range(2..=12);
        let ds = gaussian_instance(n, 9000 + k / 20);
        let theta = random_theta(n, &mut rng);
        let counts = class_counts(&ds, &theta);
        let eps = rational([0.1, 0.25, 0.5, 1.0, 3.0][k as usize % 5]);

        // (a): some target t at sqrt(1+eps) - 1 implies the pairwise bound
        let t: Vec<BigRational> = (0..2)
            .map(|_| BigRational::new(BigInt::from(rng.random_range(0..=20)), BigInt::from(20)))
            .collect();
        if marginal_bar_feasible_exact(&counts, &t, &eps) {
            hits_a += 1;
            assert!(pairwise_feasible_exact(&counts, &eps), "sample {k}");
        }
        // (b): the pairwise bound implies feasibility at the geometric-mean target
        if pairwise_feasible_exact(&counts, &eps) {
            hits_b += 1;
            assert!(geometric_target_feasible_exact(&counts, &eps), "sample {k}");
        }
        // and the float check agrees away from the boundary
        let pv = pairwise_violation(&theta, &fairwasp::group_index(&ds));
        let e = [0.1, 0.25, 0.5, 1.0, 3.0][k as usize % 5];
        if (pv - e).abs() > 1e-9 {
            assert_eq!(pv <= e, pairwise_feasible_exact(&counts, &eps), "sample {k}: {pv}");
        }
    }
    assert!(hits_a >= 20 && hits_b >= 100, "too few feasible samples: {hits_a}, {hits_b}");
}

#[test]
fn pairwise_optimum_below_marginal_optimum_at_epsilon_bar() {
    for k in 0..12 {
        let ds = gaussian_instance(4 + k % 3, 9500 + k as u64);
        let eps = 0.2;
        let pw = brute_pairwise_mip(&ds, eps).unwrap();
        let py = fairwasp::marginal_y(&ds).probs;
        let mb = brute_mip_bar(&ds, &py, eps, Metric::Euclidean).unwrap();
        assert!(pw.feasible_count >= mb.feasible_count);
        assert!(pw.objective <= mb.objective + 1e-12, "instance {k}");
    }
}

#[test]
fn feasible_sets_nest_on_a_target_grid() {
    for k in 0..4 {
        let ds = gaussian_instance(5, 9700 + k);
        let eps = 0.3;
        let pw = brute_pairwise_mip(&ds, eps).unwrap();
        for a in 0..=4 {
            for b in 0..=4 {
                let t = [a as f64 / 4.0, b as f64 / 4.0];
                let mb = brute_mip_bar(&ds, &t, eps, Metric::Euclidean).unwrap();
                assert!(mb.feasible_count <= pw.feasible_count);
                assert!(pw.objective <= mb.objective);
            }
        }
    }
}

#[test]
fn search_output_is_pairwise_feasible_and_bounded() {
    for k in 0..10 {
        let ds = gaussian_instance(4 + k % 3, 9800 + k as u64);
        let p = Problem::from_dataset(&ds, Metric::Euclidean, true);
        let cfg = PwConfig {
            epsilon: 0.2,
            ..PwConfig::default()
        };
        let s = solve_pw(&p, &cfg).unwrap();
        let brute = brute_pairwise_mip(&ds, 0.2).unwrap();
        if brute.feasible_count == 0 {
            assert_eq!(s.status, PwStatus::Infeasible);
            continue;
        }
        if let Some(theta) = s.theta() {
            assert!(pairwise_violation(theta.as_slice(), &p.gi) <= 0.2 + 1e-6, "instance {k}");
            assert!(s.objective <= s.h_start);
            // never better than the true pairwise optimum
            assert!(s.objective >= brute.objective - 1e-9);
        }
        let start = h_objective(&p.target.probs, &p, &FairwaspConfig::default(), epsilon_bar(0.2)).unwrap();
        assert_eq!(s.h_start, start);
        assert!(s.objective <= start + 1e-6);
    }
}
