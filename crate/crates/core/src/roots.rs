//! Scalar root finding: bisection, secant, and a bracketed hybrid that
//! interleaves the two.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change over [{lo}, {hi}] (f = {f_lo:e}, {f_hi:e})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("no convergence after {iterations} iterations (best x = {x}, f = {fx:e})")]
    NoConvergence { iterations: usize, x: f64, fx: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

fn eval<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64, RootError> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(RootError::NonFinite { x })
    }
}

fn opposite(a: f64, b: f64) -> bool {
    (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
}

// bracket is exhausted once no float lies strictly between its ends
fn collapsed(a: f64, b: f64) -> bool {
    let m = 0.5 * (a + b);
    m <= a.min(b) || m >= a.max(b)
}

/// Plain bisection, run until the bracket collapses to adjacent floats,
/// `|f| <= ftol`, or the width drops below `xtol`.
pub fn bisection<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root, RootError> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = eval(&mut f, a)?;
    let fb = eval(&mut f, b)?;
    if fa.abs() <= ftol {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb.abs() <= ftol {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if !opposite(fa, fb) {
        return Err(RootError::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    for i in 1..=max_iter {
        let m = 0.5 * (a + b);
        let fm = eval(&mut f, m)?;
        if fm.abs() <= ftol || (b - a).abs() <= xtol || collapsed(a, b) {
            return Ok(Root { x: m, fx: fm, iterations: i });
        }
        if opposite(fa, fm) {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    let m = 0.5 * (a + b);
    Err(RootError::NoConvergence {
        iterations: max_iter,
        x: m,
        fx: f(m),
    })
}

/// Unbracketed secant iteration from two starting points.
pub fn secant<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    x1: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root, RootError> {
    let (mut xa, mut xb) = (x0, x1);
    let mut fa = eval(&mut f, xa)?;
    let mut fb = eval(&mut f, xb)?;
    for i in 1..=max_iter {
        if fb.abs() <= ftol {
            return Ok(Root { x: xb, fx: fb, iterations: i - 1 });
        }
        let slope = fb - fa;
        if slope == 0.0 {
            break;
        }
        let next = xb - fb * (xb - xa) / slope;
        let fnext = eval(&mut f, next)?;
        let step = (next - xb).abs();
        xa = xb;
        fa = fb;
        xb = next;
        fb = fnext;
        if step <= xtol {
            return Ok(Root { x: xb, fx: fb, iterations: i });
        }
    }
    Err(RootError::NoConvergence {
        iterations: max_iter,
        x: xb,
        fx: fb,
    })
}

/// Bracketed hybrid: odd iterations bisect, even iterations take a
/// false-position (secant through the bracket ends) step when it lands
/// strictly inside the bracket. Stops once `|f| <= ftol`.
pub fn bracketed<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<Root, RootError> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = eval(&mut f, a)?;
    let mut fb = eval(&mut f, b)?;
    if fa.abs() <= ftol {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb.abs() <= ftol {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if !opposite(fa, fb) {
        return Err(RootError::NoSignChange { lo, hi, f_lo: fa, f_hi: fb });
    }
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for i in 1..=max_iter {
        let mut x = 0.5 * (a + b);
        if i % 2 == 0 {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a && s < b {
                x = s;
            }
        }
        let fx = eval(&mut f, x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= ftol {
            return Ok(Root { x, fx, iterations: i });
        }
        if opposite(fa, fx) {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
        if collapsed(a, b) {
            break;
        }
    }
    Err(RootError::NoConvergence {
        iterations: max_iter,
        x: best.0,
        fx: best.1,
    })
}
