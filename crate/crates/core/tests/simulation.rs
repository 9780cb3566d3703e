mod common;

use proptest::prelude::*;
use qvar_core::model::{covariance_matrix, diffusion, drift};
use qvar_core::simulation::*;
use qvar_core::strategy::{solve_pi_approx, StrategyQuery};
use qvar_core::{ModelParams, WealthState};
use rand_chacha::rand_core::RngCore;

fn short(n_steps: usize, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_steps,
        n_paths,
        seed,
        ..SimConfig::default()
    }
}

fn inactive_pi(p: &ModelParams) -> f64 {
    let q = StrategyQuery::new(0.0, 1.0, 1.0, *p).unwrap();
    solve_pi_approx(&q).unwrap().pi
}

#[test]
fn increments_have_the_right_law() {
    let mut rng = path_rng(42, 0);
    let dt = 0.5;
    let n = 1_000_000;
    let (mut s1, mut s2, mut q1, mut q2, mut c) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (a, b) = sample_increments(&mut rng, dt);
        s1 += a;
        s2 += b;
        q1 += a * a;
        q2 += b * b;
        c += a * b;
    }
    let nf = n as f64;
    let (m1, m2) = (s1 / nf, s2 / nf);
    let bound = 4.0 * (dt / nf).sqrt();
    assert!(m1.abs() < bound && m2.abs() < bound, "means {m1} {m2}");
    let (v1, v2) = (q1 / nf - m1 * m1, q2 / nf - m2 * m2);
    assert!((v1 / dt - 1.0).abs() < 0.01 && (v2 / dt - 1.0).abs() < 0.01);
    let rho = (c / nf - m1 * m2) / (v1 * v2).sqrt();
    assert!(rho.abs() < 0.005, "correlation {rho}");
}

#[test]
fn increments_are_reproducible() {
    let mut a = path_rng(9, 3);
    let mut b = path_rng(9, 3);
    for _ in 0..10 {
        assert_eq!(sample_increments(&mut a, 1.0), sample_increments(&mut b, 1.0));
    }
}

#[test]
fn path_streams_are_distinct() {
    let firsts: Vec<u64> = (0..1000).map(|i| path_rng(123, i).next_u64()).collect();
    let mut sorted = firsts.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), firsts.len());
}

#[test]
fn one_step_composes_drift_and_diffusion() {
    let p = common::table();
    let s = WealthState::new(1.0, 1.0, 0.0);
    let pi = 0.0239;
    let next = step(&s, pi, 1.0, 1.0, 1.0, &p).unwrap();
    let d = drift(&s, pi, &p);
    let g = diffusion(&s, pi, &p);
    let c = covariance_matrix(&p);
    let l1 = 1.0 + d[0] + g[0][0] + g[0][1];
    let l2 = 1.0 + d[1] + g[1][0] + g[1][1];
    assert!(common::rel_err(next.l1, l1) < 1e-15);
    assert!(common::rel_err(next.l2, l2) < 1e-15);
    let by_hand = 1.0 + (1.0 - pi) * 0.00014 + pi * (c.l11 + c.l12);
    assert!(common::rel_err(next.l1, by_hand) < 1e-15);
    assert_eq!(next.t, 1.0);
}

#[test]
fn zero_covariance_is_deterministic_compounding() {
    let p = common::table()
        .with(|x| {
            x.f1 = f64::INFINITY;
            x.f2 = f64::INFINITY;
        })
        .unwrap();
    let pi = inactive_pi(&p);
    let path = simulate_path(&short(795, 1, 1), &p, 0).unwrap();
    let mut expected = 1.0;
    for (k, v) in path.l1.iter().enumerate() {
        assert!(common::rel_err(*v, expected) < 1e-10, "step {k}");
        assert_eq!(path.pi[k], pi);
        expected *= 1.0 + (1.0 - pi) * p.r();
    }
}

#[test]
fn same_seed_same_ensemble() {
    let p = common::table();
    let cfg = short(100, 20, 77);
    let a = simulate_ensemble(&cfg, &p).unwrap();
    let b = simulate_ensemble(&cfg, &p).unwrap();
    assert_eq!(a, b);
    let c = simulate_ensemble(&SimConfig { seed: 78, ..cfg }, &p).unwrap();
    assert_ne!(a.summary.mean_l1, c.summary.mean_l1);
    // a path does not depend on how many others were drawn
    let single = simulate_path(&cfg, &p, 7).unwrap();
    assert_eq!(single, a.paths[7]);
}

#[test]
fn riskless_limit() {
    let p = common::table();
    let cfg = SimConfig {
        strategy_mode: StrategyMode::Constant(0.0),
        ..short(300, 10, 3)
    };
    let e = simulate_ensemble(&cfg, &p).unwrap();
    let mut expected = cfg.initial_l1;
    for k in 0..=cfg.n_steps {
        for path in &e.paths {
            assert_eq!(path.l1[k], expected);
        }
        assert_eq!(e.summary.sd_l1[k], 0.0);
        assert!(common::rel_err(expected, (1.0 + p.r()).powi(k as i32)) < 1e-12);
        expected *= 1.0 + p.r() * cfg.dt;
    }
}

#[test]
fn zero_z_collapses_bands() {
    let p = common::table();
    let e = simulate_ensemble(&SimConfig { z: 0.0, ..short(50, 30, 5) }, &p).unwrap();
    assert_eq!(e.summary.band_lo_pi, e.summary.mean_pi);
    assert_eq!(e.summary.band_hi_pi, e.summary.mean_pi);
    assert_eq!(e.summary.band_lo_l1, e.summary.mean_l1);
    assert_eq!(e.summary.band_hi_l1, e.summary.mean_l1);
}

#[test]
fn early_mean_matches_drift() {
    let p = common::table();
    let e = simulate_ensemble(&short(10, 200, 2024), &p).unwrap();
    let pi = inactive_pi(&p);
    let det = (1.0 + (1.0 - pi) * p.r()).powi(10);
    let se = e.summary.sd_l1[10] / 200f64.sqrt();
    assert!((e.summary.mean_l1[10] - det).abs() <= 3.0 * se);
}

#[test]
fn constraint_fraction_far_above_threshold() {
    let p = common::table();
    let e = simulate_ensemble(&short(200, 50, 8), &p).unwrap();
    assert!(e.summary.constraint_fraction >= 0.95);
    let low = SimConfig {
        initial_l2: 1e-4,
        ..short(200, 50, 8)
    };
    let e = simulate_ensemble(&low, &p).unwrap();
    assert!(e.summary.constraint_fraction < 0.05);
}

#[test]
fn full_mode_falls_back_in_the_inactive_regime() {
    let p = common::table();
    let cfg = SimConfig {
        strategy_mode: StrategyMode::FullWithFallback,
        ..short(30, 3, 1)
    };
    let approx = SimConfig {
        strategy_mode: StrategyMode::Approx,
        ..cfg
    };
    assert_eq!(
        simulate_ensemble(&cfg, &p).unwrap(),
        simulate_ensemble(&approx, &p).unwrap()
    );
}

#[test]
fn bankrupt_paths_are_excluded() {
    let p = common::table();
    let cfg = SimConfig {
        strategy_mode: StrategyMode::Constant(5000.0),
        ..short(200, 40, 11)
    };
    let e = simulate_ensemble(&cfg, &p).unwrap();
    let flagged = e.paths.iter().filter(|x| x.is_bankrupt()).count();
    assert!(flagged > 0 && flagged < 40, "{flagged}");
    assert_eq!(e.summary.bankrupt_paths, flagged);
    assert_eq!(e.summary.surviving_paths, 40 - flagged);
    for path in e.paths.iter().filter(|x| x.is_bankrupt()) {
        assert_eq!(path.bankrupt_at, Some(path.len()));
        assert!(path.l1.iter().all(|&v| v > 0.0));
    }
    let survivors: Vec<_> = e.paths.iter().filter(|x| !x.is_bankrupt()).collect();
    let mean = survivors.iter().map(|x| x.l1[200]).sum::<f64>() / survivors.len() as f64;
    assert!(common::rel_err(e.summary.mean_l1[200], mean) < 1e-12);

    let doomed = SimConfig {
        strategy_mode: StrategyMode::Constant(1e5),
        ..cfg
    };
    assert_eq!(
        simulate_ensemble(&doomed, &p),
        Err(SimulationError::AllBankrupt(40))
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bands_sandwich_the_mean(seed in any::<u64>(), z in 0.0f64..4.0, n in 1usize..25) {
        let p = common::table();
        let e = simulate_ensemble(&SimConfig { z, ..short(40, n, seed) }, &p).unwrap();
        let s = &e.summary;
        for k in 0..s.times.len() {
            prop_assert!(s.band_lo_pi[k] <= s.mean_pi[k] && s.mean_pi[k] <= s.band_hi_pi[k]);
            prop_assert!(s.band_lo_l1[k] <= s.mean_l1[k] && s.mean_l1[k] <= s.band_hi_l1[k]);
        }
        prop_assert!((0.0..=1.0).contains(&s.constraint_fraction));
        for path in &e.paths {
            prop_assert_eq!(path.l1[0], 1.0);
            prop_assert!(path.pi.iter().all(|v| v.is_finite()));
        }
    }
}
