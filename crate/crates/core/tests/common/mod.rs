//! Shared fixtures and numerical oracles for the integration tests.
#![allow(dead_code)]

use qvar_core::model::RawParams;
use qvar_core::ModelParams;

/// Baseline table: r = 0.00014, (psi, psi0) = (0.6, 0.8), gamma = 0.3,
/// beta = 0.001.
pub fn table_raw() -> RawParams {
    RawParams {
        p1: 0.05,
        p2: 0.5,
        f1: 47.63579,
        f2: 68.43975,
        b2: 0.00599,
        r: 0.00014,
        beta: 0.001,
        gamma: 0.3,
        alpha: 10.0,
        epsilon: 1e-5,
        q05: 0.00077,
        psi: 0.6,
        psi0: 0.8,
        horizon: 795.0,
    }
}

pub fn table() -> ModelParams {
    ModelParams::new(table_raw()).unwrap()
}

/// Integrates `ds/dt = g(t, s)` backward from `s(t_end) = s_end` to `t`
/// with classical RK4 on `n` steps.
pub fn rk4_backward(
    g: impl Fn(f64, f64) -> f64,
    t_end: f64,
    s_end: f64,
    t: f64,
    n: usize,
) -> f64 {
    let h = (t - t_end) / n as f64;
    let mut s = s_end;
    let mut u = t_end;
    for _ in 0..n {
        let k1 = g(u, s);
        let k2 = g(u + 0.5 * h, s + 0.5 * h * k1);
        let k3 = g(u + 0.5 * h, s + 0.5 * h * k2);
        let k4 = g(u + h, s + h * k3);
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += h;
    }
    s
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Quantile by full sort and direct indexing of the `floor(N p)`-th order
/// statistic (1-based, clamped to `[1, N]`).
pub fn sorted_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let rank = ((n as f64 * p).floor() as usize).clamp(1, n);
    v[rank - 1]
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// A query inside the smoothing window with a unit-scale threshold, where
/// the constraint term competes with the utility term and the residual
/// usually changes sign on the default bracket.
pub fn window_query<R: rand::Rng>(rng: &mut R) -> qvar_core::StrategyQuery {
    let q05: f64 = rng.random_range(0.2..3.0);
    let psi: f64 = rng.random_range(0.3..0.99);
    let r: f64 = rng.random_range(0.00005..0.002);
    let b2: f64 = rng.random_range(2.0 * r..0.03);
    let beta: f64 = rng.random_range(0.0001..0.003);
    let gamma: f64 = rng.random_range(0.05..0.95);
    let p = table()
        .with(|x| {
            x.q05 = q05;
            x.psi = psi;
            x.psi0 = (1.0 - psi * psi).sqrt();
            x.r = r;
            x.b2 = b2;
            x.beta = beta;
            x.gamma = gamma;
        })
        .unwrap();
    let t = rng.random_range(0.0..0.95 * p.horizon());
    let l2 = q05 + rng.random_range(-0.9..0.9) * p.epsilon();
    let l1 = rng.random_range(0.2..3.0);
    qvar_core::StrategyQuery::new(t, l1, l2, p).unwrap()
}
