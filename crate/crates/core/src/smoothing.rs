//! Logistic smoothing of the VaR indicator `1/T * I(l2 >= Q)`.
//!
//! Inside the open window `(Q - eps, Q + eps)` the indicator is replaced by
//! `1/T * sigma(alpha (l2 - Q))`; outside it keeps its flat values. `k1` and
//! `k2` are the first and second derivatives in `l2`, both zero outside the
//! window.

use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedConstraint {
    pub alpha: f64,
    pub epsilon: f64,
    pub q05: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Below,
    Window,
    Above,
}

impl SmoothedConstraint {
    pub fn from_params(params: &ModelParams) -> Self {
        SmoothedConstraint {
            alpha: params.alpha(),
            epsilon: params.epsilon(),
            q05: params.q05(),
            horizon: params.horizon(),
        }
    }

    fn region(&self, l2: f64) -> Region {
        if l2 <= self.q05 - self.epsilon {
            Region::Below
        } else if l2 >= self.q05 + self.epsilon {
            Region::Above
        } else {
            Region::Window
        }
    }

    // logistic value at u = alpha (l2 - q05), evaluated without overflow
    fn sigmoid(&self, l2: f64) -> f64 {
        let u = self.alpha * (l2 - self.q05);
        if u >= 0.0 {
            1.0 / (1.0 + libm::exp(-u))
        } else {
            let e = libm::exp(u);
            e / (1.0 + e)
        }
    }

    pub fn j2(&self, l2: f64) -> f64 {
        match self.region(l2) {
            Region::Below => 0.0,
            Region::Above => 1.0 / self.horizon,
            Region::Window => self.sigmoid(l2) / self.horizon,
        }
    }

    pub fn k1(&self, l2: f64) -> f64 {
        match self.region(l2) {
            Region::Window => {
                let s = self.sigmoid(l2);
                self.alpha * s * (1.0 - s) / self.horizon
            }
            _ => 0.0,
        }
    }

    /// Exact derivative of [`k1`](Self::k1):
    /// `alpha^2 sigma (1 - sigma) (1 - 2 sigma) / T` inside the window.
    pub fn k2(&self, l2: f64) -> f64 {
        match self.region(l2) {
            Region::Window => {
                if l2 == self.q05 {
                    return 0.0;
                }
                let s = self.sigmoid(l2);
                let a2 = self.alpha * self.alpha;
                a2 * s * (1.0 - s) * (1.0 - 2.0 * s) / self.horizon
            }
            _ => 0.0,
        }
    }

    /// Maximum of `k1`, attained at `l2 = q05`.
    pub fn k1_peak(&self) -> f64 {
        self.alpha * 0.25 / self.horizon
    }
}
