//! Closed-form adjoint (co-state) processes with zero martingale parts.
//!
//! With `q = 0` the first-order adjoint equations become linear ODEs
//!
//! ```text
//! ds1/dt + (1 - pi) r s1          = psi0 e^{-beta t} L1^{gamma-1},   s1(T) = 0
//! ds2/dt + (r - r pi + b2 pi) s2  = psi k1(L2),                      s2(T) = 0
//! ```
//!
//! solved with `L1`, `L2` and `pi` frozen at their evaluation-time values.
//! The second-order adjoint `S` is evaluated from its printed element-wise
//! closed forms. Those do not all honour `S(T) = 0`; see
//! [`second_terminal_defect`]. `S` never enters the optimal strategy.

use libm::{exp, pow};
use thiserror::Error;

use crate::model::{covariance_matrix, ModelParams};
use crate::smoothing::SmoothedConstraint;

/// Denominators closer to zero than this raise a [`Singularity`].
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Which closed-form denominator vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    /// `(1 - pi) r - beta`
    MedianDiscounted,
    /// `r - r pi + b2 pi`
    LowerRate,
    /// `2 (1 - pi) r + pi^2 (l11^2 + l12^2) - beta`
    SecondMedian,
    /// first denominator of the `S22` expression
    SecondLowerLead,
    /// second denominator of the `S22` expression
    SecondLowerTail,
}

impl core::fmt::Display for Denominator {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Denominator::MedianDiscounted => "(1 - pi) r - beta",
            Denominator::LowerRate => "r - r pi + b2 pi",
            Denominator::SecondMedian => "2 (1 - pi) r + pi^2 (l11^2 + l12^2) - beta",
            Denominator::SecondLowerLead => "2 (r - r pi + b2 pi) + 2 pi^2 l22^2 - beta",
            Denominator::SecondLowerTail => "2 (1 - pi) r + 2 pi^2 l22^2 - beta",
        };
        f.write_str(s)
    }
}

/// A closed-form denominator vanished. When the singularity is removable,
/// `limit` carries the value of the limiting expression.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("closed form is singular: {denominator} = {value:e}")]
pub struct Singularity {
    pub denominator: Denominator,
    pub value: f64,
    pub limit: Option<f64>,
}

impl Singularity {
    /// The limit value, for callers that accept removable singularities.
    pub fn removable(self) -> Result<f64, Singularity> {
        self.limit.ok_or(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointFirst {
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointSecond {
    pub s11: f64,
    pub s12: f64,
    pub s21: f64,
    pub s22: f64,
}

impl AdjointSecond {
    pub fn max_abs(&self) -> f64 {
        self.s11
            .abs()
            .max(self.s12.abs())
            .max(self.s21.abs())
            .max(self.s22.abs())
    }
}

fn guard(denominator: Denominator, value: f64, limit: Option<f64>) -> Result<(), Singularity> {
    if value.abs() <= SINGULARITY_TOL {
        Err(Singularity {
            denominator,
            value,
            limit,
        })
    } else {
        Ok(())
    }
}

/// First-order adjoint `s1(t)` for frozen `l1bar > 0` and `pibar`.
pub fn s1_of_t(t: f64, l1bar: f64, pibar: f64, params: &ModelParams) -> Result<f64, Singularity> {
    let horizon = params.horizon();
    let beta = params.beta();
    let rate = params.median_rate(pibar);
    let denom = rate - beta;
    let forcing = params.psi0() * pow(l1bar, params.gamma() - 1.0);
    guard(
        Denominator::MedianDiscounted,
        denom,
        Some(forcing * exp(-beta * t) * (t - horizon)),
    )?;
    let scale = forcing / denom;
    Ok(scale * exp(-beta * t) - scale * exp(-beta * horizon) * exp(-rate * (t - horizon)))
}

/// First-order adjoint `s2(t)`; `k1` is evaluated at `l2bar`.
pub fn s2_of_t(t: f64, l2bar: f64, pibar: f64, params: &ModelParams) -> Result<f64, Singularity> {
    let horizon = params.horizon();
    let rate = params.lower_rate(pibar);
    let k1 = SmoothedConstraint::from_params(params).k1(l2bar);
    let forcing = params.psi() * k1;
    guard(
        Denominator::LowerRate,
        rate,
        Some(forcing * (t - horizon)),
    )?;
    let scale = forcing / rate;
    Ok(scale - scale * exp(-rate * (t - horizon)))
}

pub fn first_adjoint(
    t: f64,
    l1bar: f64,
    l2bar: f64,
    pibar: f64,
    params: &ModelParams,
) -> Result<AdjointFirst, Singularity> {
    Ok(AdjointFirst {
        s1: s1_of_t(t, l1bar, pibar, params)?,
        s2: s2_of_t(t, l2bar, pibar, params)?,
    })
}

/// Second-order adjoint `S(t)` from its element-wise closed forms.
///
/// `S12` and `S21` are pure exponentials in `t` (equal to 1 at `t = 0`).
/// `S22` mixes the two growth rates between its terms, as printed. The
/// exponents of `S11` and `S22` are applied to `(t - T)` as a whole.
#[allow(non_snake_case)]
pub fn S_of_t(
    t: f64,
    l1bar: f64,
    l2bar: f64,
    pibar: f64,
    params: &ModelParams,
) -> Result<AdjointSecond, Singularity> {
    let horizon = params.horizon();
    let beta = params.beta();
    let (p1, f1, f2) = (params.p1(), params.f1(), params.f2());
    let cov = covariance_matrix(params);
    let pi2 = pibar * pibar;
    let median = params.median_rate(pibar);
    let lower = params.lower_rate(pibar);

    // S11
    let a11 = 2.0 * median + pi2 * cov.l11 * cov.l11 + pi2 * cov.l12 * cov.l12;
    let d11 = a11 - beta;
    let forcing11 = params.psi0() * (params.gamma() - 1.0) * pow(l1bar, params.gamma() - 2.0);
    guard(
        Denominator::SecondMedian,
        d11,
        Some(-forcing11 * exp(-beta * t) * (t - horizon)),
    )?;
    let s11 = -forcing11 * exp(-beta * t) / d11
        + forcing11 * exp(-beta * horizon) / d11 * exp(-a11 * (t - horizon));

    // S12, S21: the printed cross coefficient uses p1 (1 - p1) / (f1 f2)
    let cross = pi2 * cov.l11 * cov.l12 + pi2 * (p1 * (1.0 - p1) / (f1 * f2)) * cov.l22;
    let s12 = exp(-(2.0 * median + cross) * t);
    let s21 = exp(-(2.0 * lower + cross) * t);

    // S22: both squared-volatility slots repeat l22 as printed
    let k2 = SmoothedConstraint::from_params(params).k2(l2bar);
    let forcing22 = params.psi() * k2;
    let vol22 = pi2 * cov.l22 * cov.l22 + pi2 * cov.l22 * cov.l22;
    let lead = 2.0 * lower + vol22 - beta;
    let tail_rate = 2.0 * median + vol22;
    let tail = tail_rate - beta;
    guard(Denominator::SecondLowerLead, lead, None)?;
    guard(Denominator::SecondLowerTail, tail, None)?;
    let s22 = -forcing22 / lead + forcing22 / tail * exp(-tail_rate * (t - horizon));

    Ok(AdjointSecond { s11, s12, s21, s22 })
}

/// `S(T)`: the amount by which the closed forms miss the terminal condition.
pub fn second_terminal_defect(
    l1bar: f64,
    l2bar: f64,
    pibar: f64,
    params: &ModelParams,
) -> Result<AdjointSecond, Singularity> {
    S_of_t(params.horizon(), l1bar, l2bar, pibar, params)
}
