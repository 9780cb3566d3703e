//! Euler–Maruyama ensembles of `(L1, L2)` under the optimal strategy.
//!
//! Each path owns a ChaCha8 generator keyed by the master seed, with the path
//! index selecting the stream, so paths are independent of each other and of
//! evaluation order. Summaries are reduced in path-index order.

use alloc::vec::Vec;
use libm::sqrt;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{covariance_matrix, ModelParams, WealthState};
use crate::strategy::{
    solve_pi, solve_pi_approx, StrategyError, StrategyQuery, DEFAULT_BRACKET, DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyMode {
    /// Explicit formula at every step.
    Approx,
    /// Root of the stationarity condition, falling back to the explicit
    /// formula when no root exists.
    FullWithFallback,
    /// A fixed fraction, ignoring the model.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_steps: usize,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub initial_l1: f64,
    pub initial_l2: f64,
    pub strategy_mode: StrategyMode,
    pub z: f64,
}

impl Default for SimConfig {
    /// 200 paths of 795 unit steps from unit wealth, 95% bands.
    fn default() -> Self {
        SimConfig {
            n_steps: 795,
            dt: 1.0,
            n_paths: 200,
            seed: 0,
            initial_l1: 1.0,
            initial_l2: 1.0,
            strategy_mode: StrategyMode::Approx,
            z: 1.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    Config(&'static str),
    #[error("strategy failed at step {step}: {source}")]
    Strategy {
        step: usize,
        #[source]
        source: StrategyError,
    },
    #[error("all {0} paths went bankrupt")]
    AllBankrupt(usize),
}

impl SimConfig {
    pub fn validate(&self, params: &ModelParams) -> Result<(), SimulationError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimulationError::Config("dt must be positive"));
        }
        if self.n_paths == 0 {
            return Err(SimulationError::Config("n_paths must be positive"));
        }
        if !(self.initial_l1 > 0.0 && self.initial_l1.is_finite()) {
            return Err(SimulationError::Config("initial_l1 must be positive"));
        }
        if !(self.initial_l2 > 0.0 && self.initial_l2.is_finite()) {
            return Err(SimulationError::Config("initial_l2 must be positive"));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(SimulationError::Config("z must be non-negative"));
        }
        if let StrategyMode::Constant(pi) = self.strategy_mode {
            if !pi.is_finite() {
                return Err(SimulationError::Config("constant strategy must be finite"));
            }
        }
        let end = self.n_steps as f64 * self.dt;
        if end > params.horizon() * (1.0 + 1e-12) {
            return Err(SimulationError::Config("n_steps * dt exceeds the horizon T"));
        }
        Ok(())
    }
}

/// Generator for path `index` under `seed`.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Two independent `Normal(0, dt)` draws.
pub fn sample_increments<R: RngCore>(rng: &mut R, dt: f64) -> (f64, f64) {
    let scale = sqrt(dt);
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    (scale * z1, scale * z2)
}

/// `l1` reached a non-positive value.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("median wealth hit {l1} at t = {t}")]
pub struct Bankrupt {
    pub l1: f64,
    pub t: f64,
}

/// One Euler–Maruyama step, in multiplicative form
/// `l' = l (1 + rate dt + pi dX)`.
pub fn step(
    state: &WealthState,
    pi: f64,
    dw1: f64,
    dw2: f64,
    dt: f64,
    params: &ModelParams,
) -> Result<WealthState, Bankrupt> {
    let cov = covariance_matrix(params);
    let growth1 = 1.0 + params.median_rate(pi) * dt + pi * (cov.l11 * dw1 + cov.l12 * dw2);
    let growth2 = 1.0 + params.lower_rate(pi) * dt + pi * (cov.l12 * dw1 + cov.l22 * dw2);
    let next = WealthState {
        l1: state.l1 * growth1,
        l2: state.l2 * growth2,
        t: state.t + dt,
    };
    if next.l1 > 0.0 {
        Ok(next)
    } else {
        Err(Bankrupt {
            l1: next.l1,
            t: next.t,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub pi: Vec<f64>,
    /// Index of the step at which `l1` left the positive half-line; the
    /// recorded sequences stop just before it.
    pub bankrupt_at: Option<usize>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_bankrupt(&self) -> bool {
        self.bankrupt_at.is_some()
    }
}

fn control(
    config: &SimConfig,
    params: &ModelParams,
    state: &WealthState,
    previous: Option<f64>,
    step_index: usize,
) -> Result<f64, SimulationError> {
    let wrap = |source| SimulationError::Strategy {
        step: step_index,
        source,
    };
    if let StrategyMode::Constant(pi) = config.strategy_mode {
        return Ok(pi);
    }
    let t = state.t.min(params.horizon());
    let query = StrategyQuery::new(t, state.l1, state.l2, *params).map_err(wrap)?;
    match config.strategy_mode {
        StrategyMode::Approx => solve_pi_approx(&query).map(|r| r.pi).map_err(wrap),
        StrategyMode::FullWithFallback => {
            match solve_pi(&query, previous, DEFAULT_BRACKET, DEFAULT_TOL) {
                Ok(r) => Ok(r.pi),
                Err(StrategyError::NoRoot { .. }) | Err(StrategyError::Indeterminate) => {
                    solve_pi_approx(&query).map(|r| r.pi).map_err(wrap)
                }
                Err(e) => Err(wrap(e)),
            }
        }
        StrategyMode::Constant(_) => unreachable!(),
    }
}

/// Simulates path `index`. The control is recomputed from the current state
/// before every step; the control at the final time is recorded as well.
pub fn simulate_path(
    config: &SimConfig,
    params: &ModelParams,
    index: usize,
) -> Result<Path, SimulationError> {
    config.validate(params)?;
    let mut rng = path_rng(config.seed, index);
    let cap = config.n_steps + 1;
    let mut path = Path {
        times: Vec::with_capacity(cap),
        l1: Vec::with_capacity(cap),
        l2: Vec::with_capacity(cap),
        pi: Vec::with_capacity(cap),
        bankrupt_at: None,
    };
    let mut state = WealthState::new(config.initial_l1, config.initial_l2, 0.0);
    let mut previous = None;
    for k in 0..=config.n_steps {
        let pi = control(config, params, &state, previous, k)?;
        path.times.push(state.t);
        path.l1.push(state.l1);
        path.l2.push(state.l2);
        path.pi.push(pi);
        previous = Some(pi);
        if k == config.n_steps {
            break;
        }
        let (dw1, dw2) = sample_increments(&mut rng, config.dt);
        match step(&state, pi, dw1, dw2, config.dt, params) {
            Ok(mut next) => {
                next.t = (k + 1) as f64 * config.dt;
                state = next;
            }
            Err(_) => {
                path.bankrupt_at = Some(k + 1);
                break;
            }
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean_pi: Vec<f64>,
    pub sd_pi: Vec<f64>,
    pub band_lo_pi: Vec<f64>,
    pub band_hi_pi: Vec<f64>,
    pub mean_l1: Vec<f64>,
    pub sd_l1: Vec<f64>,
    pub band_lo_l1: Vec<f64>,
    pub band_hi_l1: Vec<f64>,
    pub mean_l2: Vec<f64>,
    pub constraint_fraction: f64,
    pub surviving_paths: usize,
    pub bankrupt_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub summary: EnsembleSummary,
    pub paths: Vec<Path>,
}

// mean and sample standard deviation; a constant sample is returned exactly
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut first = None;
    let mut constant = true;
    for v in values.clone() {
        sum += v;
        n += 1;
        match first {
            None => first = Some(v),
            Some(f) => constant &= v == f,
        }
    }
    if let (true, Some(v)) = (constant, first) {
        return (v, 0.0);
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, sqrt(ss / (n - 1) as f64))
}

/// Pointwise `mean +- z sd` over the non-bankrupt paths.
pub fn summarize(
    paths: &[Path],
    z: f64,
    q05: f64,
) -> Result<EnsembleSummary, SimulationError> {
    let alive: Vec<&Path> = paths.iter().filter(|p| !p.is_bankrupt()).collect();
    if alive.is_empty() {
        return Err(SimulationError::AllBankrupt(paths.len()));
    }
    let len = alive[0].len();
    let mut s = EnsembleSummary {
        times: alive[0].times.clone(),
        mean_pi: Vec::with_capacity(len),
        sd_pi: Vec::with_capacity(len),
        band_lo_pi: Vec::with_capacity(len),
        band_hi_pi: Vec::with_capacity(len),
        mean_l1: Vec::with_capacity(len),
        sd_l1: Vec::with_capacity(len),
        band_lo_l1: Vec::with_capacity(len),
        band_hi_l1: Vec::with_capacity(len),
        mean_l2: Vec::with_capacity(len),
        constraint_fraction: 0.0,
        surviving_paths: alive.len(),
        bankrupt_paths: paths.len() - alive.len(),
    };
    for k in 0..len {
        let (m, sd) = moments(alive.iter().map(|p| p.pi[k]));
        s.mean_pi.push(m);
        s.sd_pi.push(sd);
        s.band_lo_pi.push(m - z * sd);
        s.band_hi_pi.push(m + z * sd);
        let (m, sd) = moments(alive.iter().map(|p| p.l1[k]));
        s.mean_l1.push(m);
        s.sd_l1.push(sd);
        s.band_lo_l1.push(m - z * sd);
        s.band_hi_l1.push(m + z * sd);
        s.mean_l2.push(moments(alive.iter().map(|p| p.l2[k])).0);
    }
    let (hits, total) = paths.iter().fold((0usize, 0usize), |(h, n), p| {
        (
            h + p.l2.iter().filter(|&&v| v >= q05).count(),
            n + p.l2.len(),
        )
    });
    s.constraint_fraction = hits as f64 / total as f64;
    Ok(s)
}

pub fn simulate_ensemble(
    config: &SimConfig,
    params: &ModelParams,
) -> Result<Ensemble, SimulationError> {
    config.validate(params)?;
    let paths = (0..config.n_paths)
        .map(|i| simulate_path(config, params, i))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&paths, config.z, params.q05())?;
    Ok(Ensemble { summary, paths })
}
