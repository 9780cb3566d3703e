//! Model parameters, the asymptotic covariance of two sample quantiles, and
//! the drift/diffusion coefficients of the two wealth processes.
//!
//! The median-wealth process `L1` and the lower-quantile wealth process `L2`
//! follow
//!
//! ```text
//! dL1 = L1 (1 - pi) r dt + L1 pi (l11 dW1 + l12 dW2)
//! dL2 = L2 (r - r pi + b2 pi) dt + L2 pi (l12 dW1 + l22 dW2)
//! ```
//!
//! where `l11, l12, l22` are the entries of the quantile covariance matrix,
//! used directly as volatility coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `psi0^2 + psi^2 = 1`.
pub const MULTIPLIER_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("multiplier weights violate psi0^2 + psi^2 = 1 (got {norm})")]
    MultiplierNorm { norm: f64 },
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ParamError {
    ParamError::Invalid {
        name,
        value,
        reason,
    }
}

/// Unvalidated parameter record; the serialized form of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub p1: f64,
    pub p2: f64,
    pub f1: f64,
    pub f2: f64,
    pub b2: f64,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub q05: f64,
    pub psi: f64,
    pub psi0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

/// Complete, validated parameter record.
///
/// Densities `f1`, `f2` may be `+inf`, which collapses the covariance matrix
/// to zero (the deterministic limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    raw: RawParams,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, ParamError> {
        ModelParams::new(raw)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> RawParams {
        p.raw
    }
}

impl ModelParams {
    pub fn new(raw: RawParams) -> Result<Self, ParamError> {
        let finite = [
            ("p1", raw.p1),
            ("p2", raw.p2),
            ("b2", raw.b2),
            ("r", raw.r),
            ("beta", raw.beta),
            ("gamma", raw.gamma),
            ("alpha", raw.alpha),
            ("epsilon", raw.epsilon),
            ("q05", raw.q05),
            ("psi", raw.psi),
            ("psi0", raw.psi0),
            ("T", raw.horizon),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, v, "must be finite"));
            }
        }
        if !(raw.p1 > 0.0 && raw.p1 < 1.0) {
            return Err(invalid("p1", raw.p1, "must lie in (0, 1)"));
        }
        if !(raw.p2 > raw.p1 && raw.p2 < 1.0) {
            return Err(invalid("p2", raw.p2, "must lie in (p1, 1)"));
        }
        for (name, v) in [("f1", raw.f1), ("f2", raw.f2)] {
            if !(v > 0.0) {
                return Err(invalid(name, v, "density must be positive"));
            }
        }
        if !(raw.gamma > 0.0 && raw.gamma < 1.0) {
            return Err(invalid("gamma", raw.gamma, "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("beta", raw.beta),
            ("alpha", raw.alpha),
            ("epsilon", raw.epsilon),
            ("T", raw.horizon),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, v, "must be positive"));
            }
        }
        if raw.psi0 < 0.0 {
            return Err(invalid("psi0", raw.psi0, "must be non-negative"));
        }
        let norm = raw.psi0 * raw.psi0 + raw.psi * raw.psi;
        if (norm - 1.0).abs() > MULTIPLIER_NORM_TOL {
            return Err(ParamError::MultiplierNorm { norm });
        }
        Ok(ModelParams { raw })
    }

    pub fn raw(&self) -> RawParams {
        self.raw
    }

    /// Returns a copy with `edit` applied, re-validated.
    pub fn with(&self, edit: impl FnOnce(&mut RawParams)) -> Result<Self, ParamError> {
        let mut raw = self.raw;
        edit(&mut raw);
        ModelParams::new(raw)
    }

    pub fn p1(&self) -> f64 {
        self.raw.p1
    }
    pub fn p2(&self) -> f64 {
        self.raw.p2
    }
    pub fn f1(&self) -> f64 {
        self.raw.f1
    }
    pub fn f2(&self) -> f64 {
        self.raw.f2
    }
    pub fn b2(&self) -> f64 {
        self.raw.b2
    }
    pub fn r(&self) -> f64 {
        self.raw.r
    }
    pub fn beta(&self) -> f64 {
        self.raw.beta
    }
    pub fn gamma(&self) -> f64 {
        self.raw.gamma
    }
    pub fn alpha(&self) -> f64 {
        self.raw.alpha
    }
    pub fn epsilon(&self) -> f64 {
        self.raw.epsilon
    }
    pub fn q05(&self) -> f64 {
        self.raw.q05
    }
    pub fn psi(&self) -> f64 {
        self.raw.psi
    }
    pub fn psi0(&self) -> f64 {
        self.raw.psi0
    }
    pub fn horizon(&self) -> f64 {
        self.raw.horizon
    }

    /// Growth rate of the median-wealth process, `(1 - pi) r`.
    pub fn median_rate(&self, pi: f64) -> f64 {
        (1.0 - pi) * self.raw.r
    }

    /// Growth rate of the lower-quantile wealth process, `r - r pi + b2 pi`.
    pub fn lower_rate(&self, pi: f64) -> f64 {
        self.raw.r - self.raw.r * pi + self.raw.b2 * pi
    }
}

/// The 2x2 asymptotic covariance matrix of the `(p1, p2)` sample quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileCovariance {
    pub l11: f64,
    pub l12: f64,
    pub l22: f64,
}

impl QuantileCovariance {
    pub fn determinant(&self) -> f64 {
        self.l11 * self.l22 - self.l12 * self.l12
    }

    pub fn is_positive_definite(&self) -> bool {
        self.l11 > 0.0 && self.l22 > 0.0 && self.determinant() > 0.0
    }

    /// Row-major entries; the matrix is symmetric.
    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.l11, self.l12], [self.l12, self.l22]]
    }
}

pub fn covariance_matrix(params: &ModelParams) -> QuantileCovariance {
    let (p1, p2, f1, f2) = (params.p1(), params.p2(), params.f1(), params.f2());
    QuantileCovariance {
        l11: p1 * (1.0 - p1) / (f1 * f1),
        l12: p1 * (1.0 - p2) / (f1 * f2),
        l22: p2 * (1.0 - p2) / (f2 * f2),
    }
}

/// Correlation implied by the covariance; independent of the densities.
pub fn implied_correlation(params: &ModelParams) -> f64 {
    let (p1, p2) = (params.p1(), params.p2());
    libm::sqrt(p1 * (1.0 - p2) / (p2 * (1.0 - p1)))
}

/// Wealth pair at a time instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WealthState {
    pub l1: f64,
    pub l2: f64,
    pub t: f64,
}

impl WealthState {
    pub fn new(l1: f64, l2: f64, t: f64) -> Self {
        WealthState { l1, l2, t }
    }
}

pub fn drift(state: &WealthState, pi: f64, params: &ModelParams) -> [f64; 2] {
    [
        state.l1 * params.median_rate(pi),
        state.l2 * params.lower_rate(pi),
    ]
}

pub fn diffusion(state: &WealthState, pi: f64, params: &ModelParams) -> [[f64; 2]; 2] {
    let cov = covariance_matrix(params);
    let a = state.l1 * pi;
    let b = state.l2 * pi;
    [[a * cov.l11, a * cov.l12], [b * cov.l12, b * cov.l22]]
}
