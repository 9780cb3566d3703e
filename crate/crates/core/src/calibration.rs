//! Non-parametric calibration: returns, order-statistic quantiles, Gaussian
//! kernel density estimates and assembly of a [`ModelParams`] record.

use alloc::vec::Vec;
use chrono::NaiveDate;
use core::f64::consts::PI;
use libm::{exp, floor, pow, sqrt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{implied_correlation, ModelParams, ParamError, RawParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("price {price} on {date} is not strictly positive")]
    NonPositivePrice { date: NaiveDate, price: f64 },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("probability {0} must lie strictly inside (0, 1)")]
    Domain(f64),
    #[error("sample has zero dispersion")]
    DegenerateSample,
    #[error("bandwidth {0} must be positive")]
    Bandwidth(f64),
    #[error("missing subjective parameters: {0:?}")]
    MissingParameters(Vec<&'static str>),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Dated closing prices in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Sorts rows chronologically; rejects duplicate dates and non-positive
    /// prices.
    pub fn new(mut rows: Vec<(NaiveDate, f64)>) -> Result<Self, CalibrationError> {
        if rows.len() < 2 {
            return Err(CalibrationError::InsufficientData {
                needed: 2,
                got: rows.len(),
            });
        }
        for (i, &(date, price)) in rows.iter().enumerate() {
            if !price.is_finite() {
                return Err(CalibrationError::NonFinite(i));
            }
            if price <= 0.0 {
                return Err(CalibrationError::NonPositivePrice { date, price });
            }
        }
        rows.sort_by_key(|&(d, _)| d);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CalibrationError::DuplicateDate(w[0].0));
        }
        let (dates, prices) = rows.into_iter().unzip();
        Ok(PriceSeries { dates, prices })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Per-period returns, possibly centered by `shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
    shift: f64,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, CalibrationError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CalibrationError::NonFinite(i));
        }
        Ok(ReturnSeries { values, shift: 0.0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Subtracts `shift` from every value; the total shift is accumulated.
    pub fn centered(&self, shift: f64) -> ReturnSeries {
        ReturnSeries {
            values: self.values.iter().map(|v| v - shift).collect(),
            shift: self.shift + shift,
        }
    }

    /// The uncentered values.
    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v + self.shift).collect()
    }
}

pub fn compute_returns(prices: &PriceSeries) -> ReturnSeries {
    let values = prices
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    ReturnSeries { values, shift: 0.0 }
}

fn order_index(n: usize, p: f64) -> Result<usize, CalibrationError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(CalibrationError::Domain(p));
    }
    if n == 0 {
        return Err(CalibrationError::InsufficientData { needed: 1, got: 0 });
    }
    let r = floor(n as f64 * p) as usize;
    Ok(r.clamp(1, n))
}

/// The `floor(N p)`-th smallest value (1-indexed, clamped to at least 1).
pub fn sample_quantile(returns: &ReturnSeries, p: f64) -> Result<f64, CalibrationError> {
    quantile_of(returns.values(), p)
}

fn quantile_of(values: &[f64], p: f64) -> Result<f64, CalibrationError> {
    let r = order_index(values.len(), p)?;
    let mut scratch = values.to_vec();
    let (_, v, _) = scratch.select_nth_unstable_by(r - 1, f64::total_cmp);
    Ok(*v)
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, sqrt(ss / (n - 1.0)))
}

/// Rule-of-thumb bandwidth `0.9 min(sd, IQR / 1.34) N^{-1/5}`. When the IQR
/// vanishes but the standard deviation does not, the standard deviation is
/// used alone.
pub fn silverman_bandwidth(returns: &ReturnSeries) -> Result<f64, CalibrationError> {
    let n = returns.len();
    if n < 2 {
        return Err(CalibrationError::InsufficientData { needed: 2, got: n });
    }
    let v = returns.values();
    if v.iter().all(|&x| x == v[0]) {
        return Err(CalibrationError::DegenerateSample);
    }
    let (_, sd) = mean_and_sd(v);
    if !(sd > 0.0) {
        return Err(CalibrationError::DegenerateSample);
    }
    let iqr = sample_quantile(returns, 0.75)? - sample_quantile(returns, 0.25)?;
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * pow(n as f64, -0.2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Gaussian,
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => exp(-0.5 * u * u) / sqrt(2.0 * PI),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    sample: Vec<f64>,
    bandwidth: f64,
    kernel: Kernel,
}

impl DensityEstimate {
    pub fn new(sample: Vec<f64>, bandwidth: f64, kernel: Kernel) -> Result<Self, CalibrationError> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(CalibrationError::Bandwidth(bandwidth));
        }
        if sample.is_empty() {
            return Err(CalibrationError::InsufficientData { needed: 1, got: 0 });
        }
        Ok(DensityEstimate {
            sample,
            bandwidth,
            kernel,
        })
    }

    /// Gaussian estimate with the rule-of-thumb bandwidth.
    pub fn silverman(returns: &ReturnSeries) -> Result<Self, CalibrationError> {
        let h = silverman_bandwidth(returns)?;
        DensityEstimate::new(returns.values().to_vec(), h, Kernel::Gaussian)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }
}

/// `(1 / (n h)) sum_i K((x - x_i) / h)`.
pub fn kde_density(estimate: &DensityEstimate, x: f64) -> f64 {
    let h = estimate.bandwidth;
    let total: f64 = estimate
        .sample
        .iter()
        .map(|xi| estimate.kernel.eval((x - xi) / h))
        .sum();
    total / (estimate.sample.len() as f64 * h)
}

/// Any subset of the parameter record; set fields win over estimates.
///
/// Serializes with the same field names as [`ModelParams`], omitting unset
/// fields; unknown fields are rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q05: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<f64>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl ParamOverrides {
    pub const FIELDS: [&'static str; 14] = [
        "p1", "p2", "f1", "f2", "b2", "r", "beta", "gamma", "alpha", "epsilon", "q05", "psi",
        "psi0", "T",
    ];

    pub fn field_mut(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match name {
            "p1" => &mut self.p1,
            "p2" => &mut self.p2,
            "f1" => &mut self.f1,
            "f2" => &mut self.f2,
            "b2" => &mut self.b2,
            "r" => &mut self.r,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "alpha" => &mut self.alpha,
            "epsilon" => &mut self.epsilon,
            "q05" => &mut self.q05,
            "psi" => &mut self.psi,
            "psi0" => &mut self.psi0,
            "T" => &mut self.horizon,
            _ => return None,
        })
    }

    /// Fields of `other` that are set replace those of `self`.
    pub fn merged(mut self, other: &ParamOverrides) -> ParamOverrides {
        let mut other = *other;
        for name in Self::FIELDS {
            if let Some(v) = *other.field_mut(name).expect("known field") {
                *self.field_mut(name).expect("known field") = Some(v);
            }
        }
        self
    }

    pub fn from_params(p: &ModelParams) -> ParamOverrides {
        let r = p.raw();
        ParamOverrides {
            p1: Some(r.p1),
            p2: Some(r.p2),
            f1: Some(r.f1),
            f2: Some(r.f2),
            b2: Some(r.b2),
            r: Some(r.r),
            beta: Some(r.beta),
            gamma: Some(r.gamma),
            alpha: Some(r.alpha),
            epsilon: Some(r.epsilon),
            q05: Some(r.q05),
            psi: Some(r.psi),
            psi0: Some(r.psi0),
            horizon: Some(r.horizon),
        }
    }

    /// A complete record, or the list of unset fields.
    pub fn complete(&self) -> Result<ModelParams, CalibrationError> {
        let mut me = *self;
        let missing: Vec<&'static str> = Self::FIELDS
            .iter()
            .copied()
            .filter(|n| me.field_mut(n).expect("known field").is_none())
            .collect();
        if !missing.is_empty() {
            return Err(CalibrationError::MissingParameters(missing));
        }
        let g = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Ok(ModelParams::new(RawParams {
            p1: g(self.p1),
            p2: g(self.p2),
            f1: g(self.f1),
            f2: g(self.f2),
            b2: g(self.b2),
            r: g(self.r),
            beta: g(self.beta),
            gamma: g(self.gamma),
            alpha: g(self.alpha),
            epsilon: g(self.epsilon),
            q05: g(self.q05),
            psi: g(self.psi),
            psi0: g(self.psi0),
            horizon: g(self.horizon),
        })?)
    }
}

pub const DEFAULT_P1: f64 = 0.05;
pub const DEFAULT_P2: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CalibrationOptions {
    /// Replaces the rule-of-thumb bandwidth.
    pub bandwidth: Option<f64>,
}

/// What the estimators produced, before overrides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub n: usize,
    pub p1: f64,
    pub p2: f64,
    pub quantile_p1: f64,
    pub quantile_p2: f64,
    pub bandwidth: f64,
    pub f1: f64,
    pub f2: f64,
    pub b2: f64,
    pub q05: f64,
    pub rho: f64,
}

/// Estimates `f1`, `f2`, `b2`, `q05` from `returns` and fills the rest of
/// the record from `overrides`. Every set override wins over its estimate.
pub fn calibrate(
    returns: &ReturnSeries,
    overrides: &ParamOverrides,
) -> Result<ModelParams, CalibrationError> {
    calibrate_with_report(returns, overrides, &CalibrationOptions::default()).map(|c| c.0)
}

pub fn calibrate_with_report(
    returns: &ReturnSeries,
    overrides: &ParamOverrides,
    options: &CalibrationOptions,
) -> Result<(ModelParams, CalibrationReport), CalibrationError> {
    let p1 = overrides.p1.unwrap_or(DEFAULT_P1);
    let p2 = overrides.p2.unwrap_or(DEFAULT_P2);
    let xi1 = sample_quantile(returns, p1)?;
    let xi2 = sample_quantile(returns, p2)?;
    let bandwidth = match options.bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(returns)?,
    };
    let kde = DensityEstimate::new(returns.values().to_vec(), bandwidth, Kernel::Gaussian)?;
    let f1 = kde_density(&kde, xi1);
    let f2 = kde_density(&kde, xi2);
    // location of the p2 quantile relative to the p1 quantile
    let b2 = xi2 - xi1;
    let q05 = xi1 + returns.shift();

    let estimates = ParamOverrides {
        p1: Some(p1),
        p2: Some(p2),
        f1: Some(f1),
        f2: Some(f2),
        b2: Some(b2),
        q05: Some(q05),
        ..ParamOverrides::default()
    };
    let params = estimates.merged(overrides).complete()?;
    let report = CalibrationReport {
        n: returns.len(),
        p1,
        p2,
        quantile_p1: xi1,
        quantile_p2: xi2,
        bandwidth,
        f1,
        f2,
        b2,
        q05,
        rho: implied_correlation(&params),
    };
    Ok((params, report))
}
