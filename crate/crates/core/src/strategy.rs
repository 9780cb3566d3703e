//! Optimal risky-asset fraction.
//!
//! The stationarity condition of the maximized Hamiltonian is
//!
//! ```text
//! R(pi) = s2(t; pi) L2 (b2 - r) - s1(t; pi) L1 r = 0
//! ```
//!
//! where the adjoints are evaluated at the candidate `pi`. [`solve_pi_full`]
//! finds a root of `R` on a bracket; [`solve_pi`] splits the default bracket
//! at the poles, scans for sign changes and picks the root nearest a
//! reference control. [`solve_pi_approx`] evaluates the explicit formula
//! obtained by setting the exponential ratio to one.

use alloc::vec::Vec;
use libm::{exp, pow};
use thiserror::Error;

use crate::adjoint::{s1_of_t, s2_of_t, AdjointFirst, Denominator, Singularity};
use crate::model::ModelParams;
use crate::roots::{self, RootError};
use crate::smoothing::SmoothedConstraint;

/// Minimum distance in `pi` from a pole of the residual.
pub const POLE_TOL: f64 = 1e-10;
/// Default residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap of the bracketed solver.
pub const MAX_ITER: usize = 200;
/// Default search bracket for [`solve_pi`].
pub const DEFAULT_BRACKET: (f64, f64) = (-5.0, 5.0);
/// Denominator floor of the explicit formula.
pub const APPROX_DENOM_TOL: f64 = 1e-14;

const SCAN_POINTS: usize = 64;
const POLE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyQuery {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub params: ModelParams,
}

impl StrategyQuery {
    pub fn new(t: f64, l1: f64, l2: f64, params: ModelParams) -> Result<Self, StrategyError> {
        if !(t >= 0.0 && t <= params.horizon()) {
            return Err(StrategyError::InvalidQuery("t must lie in [0, T]"));
        }
        if !(l1 > 0.0 && l1.is_finite()) {
            return Err(StrategyError::InvalidQuery("l1 must be positive"));
        }
        if !l2.is_finite() {
            return Err(StrategyError::InvalidQuery("l2 must be finite"));
        }
        Ok(StrategyQuery { t, l1, l2, params })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FullRoot,
    ApproxClosedForm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::FullRoot => "full-root",
            Method::ApproxClosedForm => "approx-closed-form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyResult {
    pub pi: f64,
    pub method: Method,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StrategyError {
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
    #[error("pi = {pi} is within {POLE_TOL:e} of the pole {pole} where {denominator} vanishes")]
    Pole {
        denominator: Denominator,
        pi: f64,
        pole: f64,
    },
    #[error("pole at pi = {pole} ({denominator} = 0) lies inside the bracket; split it there")]
    BracketSplit { denominator: Denominator, pole: f64 },
    #[error("stationarity residual has no sign change over [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("stationarity residual vanishes identically; the control is undetermined")]
    Indeterminate,
    #[error("root search stalled at pi = {pi} with residual {residual:e}")]
    ToleranceNotMet { pi: f64, residual: f64 },
    #[error("explicit strategy is degenerate: {0}")]
    Degenerate(&'static str),
}

/// Values of `pi` where a closed-form denominator of the residual vanishes.
pub fn poles(params: &ModelParams) -> impl Iterator<Item = (Denominator, f64)> {
    let (r, b2, beta) = (params.r(), params.b2(), params.beta());
    let median = (r != 0.0).then(|| (Denominator::MedianDiscounted, 1.0 - beta / r));
    let lower = (b2 != r).then(|| (Denominator::LowerRate, -r / (b2 - r)));
    median.into_iter().chain(lower)
}

fn check_poles(pi: f64, params: &ModelParams) -> Result<(), StrategyError> {
    if params.b2() == params.r() && params.r() == 0.0 {
        return Err(StrategyError::Pole {
            denominator: Denominator::LowerRate,
            pi,
            pole: pi,
        });
    }
    for (denominator, pole) in poles(params) {
        if (pi - pole).abs() < POLE_TOL {
            return Err(StrategyError::Pole {
                denominator,
                pi,
                pole,
            });
        }
    }
    Ok(())
}

fn singular(pi: f64, s: Singularity) -> StrategyError {
    StrategyError::Pole {
        denominator: s.denominator,
        pi,
        pole: pi,
    }
}

/// Derivative of the maximized Hamiltonian in `pi`.
pub fn stationarity_residual(pi: f64, query: &StrategyQuery) -> Result<f64, StrategyError> {
    let p = &query.params;
    check_poles(pi, p)?;
    let s1 = s1_of_t(query.t, query.l1, pi, p).map_err(|e| singular(pi, e))?;
    let s2 = s2_of_t(query.t, query.l2, pi, p).map_err(|e| singular(pi, e))?;
    Ok(s2 * query.l2 * (p.b2() - p.r()) - s1 * query.l1 * p.r())
}

// residual with removable singularities replaced by their limits
fn residual_with_limits(pi: f64, query: &StrategyQuery) -> f64 {
    let p = &query.params;
    let s1 = s1_of_t(query.t, query.l1, pi, p)
        .or_else(Singularity::removable)
        .unwrap_or(f64::NAN);
    let s2 = s2_of_t(query.t, query.l2, pi, p)
        .or_else(Singularity::removable)
        .unwrap_or(f64::NAN);
    s2 * query.l2 * (p.b2() - p.r()) - s1 * query.l1 * p.r()
}

/// The Hamiltonian with `q = 0`, at control `pi` and adjoint values `s`.
pub fn hamiltonian(query: &StrategyQuery, pi: f64, s: AdjointFirst) -> f64 {
    let p = &query.params;
    let utility = p.psi0() * exp(-p.beta() * query.t) * pow(query.l1, p.gamma()) / p.gamma();
    let constraint = p.psi() * SmoothedConstraint::from_params(p).j2(query.l2);
    -utility - constraint
        + s.s1 * query.l1 * p.median_rate(pi)
        + s.s2 * query.l2 * p.lower_rate(pi)
}

/// `(1 - e^{-c2 (t-T)}) / (1 - e^{-(c-beta)(t-T)})` with `c = (1-pi) r` and
/// `c2 = r - r pi + b2 pi`; the explicit formula assumes it is one.
pub fn exponential_ratio(pi: f64, query: &StrategyQuery) -> f64 {
    let p = &query.params;
    let tau = query.t - p.horizon();
    let num = 1.0 - exp(-p.lower_rate(pi) * tau);
    let den = 1.0 - exp(-(p.median_rate(pi) - p.beta()) * tau);
    num / den
}

/// Root of the residual on `bracket`, to `|R| <= tol`.
pub fn solve_pi_full(
    query: &StrategyQuery,
    bracket: (f64, f64),
    tol: f64,
) -> Result<StrategyResult, StrategyError> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    for (denominator, pole) in poles(&query.params) {
        if pole > lo + POLE_TOL && pole < hi - POLE_TOL {
            return Err(StrategyError::BracketSplit { denominator, pole });
        }
    }
    check_poles(lo, &query.params)?;
    check_poles(hi, &query.params)?;
    let f = |pi: f64| stationarity_residual(pi, query).unwrap_or(f64::NAN);
    match roots::bracketed(f, lo, hi, tol, MAX_ITER) {
        Ok(root) => Ok(StrategyResult {
            pi: root.x,
            method: Method::FullRoot,
            residual: root.fx,
        }),
        Err(RootError::NoSignChange { .. }) => Err(StrategyError::NoRoot { lo, hi }),
        Err(RootError::NoConvergence { x, fx, .. }) => {
            Err(StrategyError::ToleranceNotMet { pi: x, residual: fx })
        }
        Err(RootError::NonFinite { x }) => {
            Err(check_poles(x, &query.params).err().unwrap_or(
                StrategyError::ToleranceNotMet {
                    pi: x,
                    residual: f64::NAN,
                },
            ))
        }
    }
}

/// Sub-brackets of `bracket` with the poles cut out. The gap left around a
/// pole keeps the vanishing denominator above the singularity threshold.
pub fn split_at_poles(params: &ModelParams, bracket: (f64, f64)) -> Vec<(f64, f64)> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let mut cuts: Vec<(f64, f64)> = poles(params)
        .filter(|&(_, p)| p > lo && p < hi)
        .map(|(d, p)| {
            let slope = match d {
                Denominator::MedianDiscounted => params.r().abs(),
                _ => (params.b2() - params.r()).abs(),
            };
            (p, POLE_GAP.max(1e-10 / slope))
        })
        .collect();
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = lo;
    for (c, gap) in cuts {
        let end = c - gap;
        if end > start {
            out.push((start, end));
        }
        start = c + gap;
    }
    if hi > start {
        out.push((start, hi));
    }
    out
}

/// Every root found on `bracket` (split at poles and scanned for sign
/// changes), returning the one closest to `reference`.
///
/// `reference` defaults to `r / (b2 - r)`, the explicit strategy when the
/// constraint is inactive.
pub fn solve_pi(
    query: &StrategyQuery,
    reference: Option<f64>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<StrategyResult, StrategyError> {
    let p = &query.params;
    let reference = reference.unwrap_or_else(|| p.r() / (p.b2() - p.r()));
    let mut best: Option<StrategyResult> = None;
    let mut all_zero = true;
    let mut consider = |candidate: StrategyResult| {
        let closer = match &best {
            None => true,
            Some(b) => (candidate.pi - reference).abs() < (b.pi - reference).abs(),
        };
        if closer {
            best = Some(candidate);
        }
    };
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    for (a, b) in split_at_poles(p, bracket) {
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=SCAN_POINTS {
            let x = a + (b - a) * (i as f64) / (SCAN_POINTS as f64);
            let fx = residual_with_limits(x, query);
            if !fx.is_finite() {
                prev = None;
                continue;
            }
            if fx != 0.0 {
                all_zero = false;
            }
            if fx == 0.0 {
                consider(StrategyResult {
                    pi: x,
                    method: Method::FullRoot,
                    residual: 0.0,
                });
            } else if let Some((px, pf)) = prev {
                if pf != 0.0 && (pf < 0.0) != (fx < 0.0) {
                    consider(solve_pi_full(query, (px, x), tol)?);
                }
            }
            prev = Some((x, fx));
        }
    }
    if all_zero {
        return Err(StrategyError::Indeterminate);
    }
    best.ok_or(StrategyError::NoRoot { lo, hi })
}

/// The explicit strategy
///
/// ```text
/// pi = (A r^2 - B (b2 - r)(r - beta)) / ((A - B)(b2 - r) r)
/// A  = e^{-beta t} psi0 L1^gamma,   B = psi k1(L2) L2
/// ```
///
/// With `k1 = 0` this is exactly `r / (b2 - r)`.
pub fn solve_pi_approx(query: &StrategyQuery) -> Result<StrategyResult, StrategyError> {
    let p = &query.params;
    let (r, b2, beta) = (p.r(), p.b2(), p.beta());
    if b2 == r {
        return Err(StrategyError::Degenerate("b2 equals r"));
    }
    let a = exp(-beta * query.t) * p.psi0() * pow(query.l1, p.gamma());
    let b = p.psi() * SmoothedConstraint::from_params(p).k1(query.l2) * query.l2;
    let excess = b2 - r;
    if ((a - b) * excess * r).abs() <= APPROX_DENOM_TOL {
        return Err(StrategyError::Degenerate("vanishing denominator"));
    }
    // divide through by A so that B = 0 reduces to r^2 / ((b2 - r) r) bit-for-bit
    let pi = if a != 0.0 {
        let kappa = b / a;
        (r * r - kappa * excess * (r - beta)) / ((1.0 - kappa) * excess * r)
    } else {
        (a * r * r - b * excess * (r - beta)) / ((a - b) * excess * r)
    };
    Ok(StrategyResult {
        pi,
        method: Method::ApproxClosedForm,
        residual: residual_with_limits(pi, query),
    })
}

/// Root of the stationarity condition with the exponential ratio set to
/// one, `B (b2 - r)((1 - pi) r - beta) = A r (r - r pi + b2 pi)`:
///
/// ```text
/// pi = (A r^2 - B (b2 - r)(r - beta)) / (-(A + B)(b2 - r) r)
/// ```
///
/// Diagnostic companion to [`solve_pi_approx`]; the printed explicit formula
/// differs from it in the sign of the `pi (b2 - r)` growth term.
pub fn linearized_pi(query: &StrategyQuery) -> Result<f64, StrategyError> {
    let p = &query.params;
    let (r, b2, beta) = (p.r(), p.b2(), p.beta());
    let a = exp(-beta * query.t) * p.psi0() * pow(query.l1, p.gamma());
    let b = p.psi() * SmoothedConstraint::from_params(p).k1(query.l2) * query.l2;
    let den = -(a + b) * (b2 - r) * r;
    if den.abs() <= APPROX_DENOM_TOL {
        return Err(StrategyError::Degenerate("vanishing denominator"));
    }
    Ok((a * r * r - b * (b2 - r) * (r - beta)) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::table_params;

    fn query(t: f64, l1: f64, l2: f64) -> StrategyQuery {
        StrategyQuery::new(t, l1, l2, table_params()).unwrap()
    }

    #[test]
    fn inactive_constraint_gives_r_over_excess() {
        let q = query(0.0, 1.0, 1.0);
        let res = solve_pi_approx(&q).unwrap();
        assert!((res.pi - 0.023932).abs() < 1e-6);
        assert_eq!(res.method, Method::ApproxClosedForm);
        assert!(res.residual.is_finite());
    }

    #[test]
    fn inactive_constraint_has_no_root() {
        let q = query(0.0, 1.0, 1.0);
        assert!(matches!(
            solve_pi(&q, None, DEFAULT_BRACKET, DEFAULT_TOL),
            Err(StrategyError::NoRoot { .. })
        ));
    }

    #[test]
    fn terminal_residual_is_zero() {
        let q = query(795.0, 1.0, 0.00077);
        for pi in [-0.5, 0.02, 0.3] {
            assert_eq!(stationarity_residual(pi, &q).unwrap(), 0.0);
        }
        assert_eq!(
            solve_pi(&q, None, DEFAULT_BRACKET, DEFAULT_TOL),
            Err(StrategyError::Indeterminate)
        );
    }

    #[test]
    fn pole_inside_bracket_requests_split() {
        let q = query(0.0, 1.0, 1.0);
        let e = solve_pi_full(&q, (-1.0, 1.0), DEFAULT_TOL).unwrap_err();
        assert!(matches!(
            e,
            StrategyError::BracketSplit {
                denominator: Denominator::LowerRate,
                ..
            }
        ));
        let pole = -0.00014 / (0.00599 - 0.00014);
        assert!(matches!(
            stationarity_residual(pole, &q),
            Err(StrategyError::Pole { .. })
        ));
        let pieces = split_at_poles(&q.params, DEFAULT_BRACKET);
        assert_eq!(pieces.len(), 2);
        assert!(pieces[0].1 < pole && pieces[1].0 > pole);
    }

    #[test]
    fn degenerate_excess_return() {
        let p = table_params().with(|r| r.b2 = r.r).unwrap();
        let q = StrategyQuery::new(0.0, 1.0, 1.0, p).unwrap();
        assert_eq!(
            solve_pi_approx(&q),
            Err(StrategyError::Degenerate("b2 equals r"))
        );
    }

    #[test]
    fn query_validation() {
        assert!(StrategyQuery::new(-1.0, 1.0, 1.0, table_params()).is_err());
        assert!(StrategyQuery::new(800.0, 1.0, 1.0, table_params()).is_err());
        assert!(StrategyQuery::new(0.0, 0.0, 1.0, table_params()).is_err());
    }
}
