//! The smoothing family `f_t` for `|s|^p`, its quadratic extension on an
//! interval, and the per-phase extended loss with value, gradient and
//! diagonal Hessian.
//!
//! `f_t` replaces `|s|^p` by a quadratic on `[-t, t]` and shifts the outer
//! branch so value and first derivative are continuous:
//!
//! ```text
//! f_t(s) = (p/2) t^{p-2} s^2            if |s| <= t
//!        = |s|^p + (p/2 - 1) t^p        otherwise
//! ```

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Value and derivatives of `f_t` at a point: `d/ds`, `d^2/ds^2`, and the
/// mixed derivative `d/dt (f_t')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothEval {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub dt_of_first: f64,
}

/// Evaluates `f_t` and its derivatives at `s`. Requires `t > 0`, `p > 1`.
pub fn eval(t: f64, p: f64, s: f64) -> SmoothEval {
    debug_assert!(t > 0.0 && p > 1.0);
    let a = s.abs();
    if a <= t {
        let scale = p * t.powf(p - 2.0);
        SmoothEval {
            value: 0.5 * scale * s * s,
            first: scale * s,
            second: scale,
            dt_of_first: p * (p - 2.0) * t.powf(p - 3.0) * s,
        }
    } else {
        SmoothEval {
            value: a.powf(p) + (0.5 * p - 1.0) * t.powf(p),
            first: p * a.powf(p - 2.0) * s,
            second: p * (p - 1.0) * a.powf(p - 2.0),
            dt_of_first: 0.0,
        }
    }
}

/// Value and first two derivatives of the quadratic extension of `f_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedEval {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

fn extended_unchecked(t: f64, p: f64, lo: f64, hi: f64, s: f64) -> ExtendedEval {
    if s > hi {
        let anchor = eval(t, p, hi);
        let ds = s - hi;
        ExtendedEval {
            value: anchor.value + anchor.first * ds + 0.5 * anchor.second * ds * ds,
            first: anchor.first + anchor.second * ds,
            second: anchor.second,
        }
    } else if s < lo {
        let anchor = eval(t, p, lo);
        let ds = s - lo;
        ExtendedEval {
            value: anchor.value + anchor.first * ds + 0.5 * anchor.second * ds * ds,
            first: anchor.first + anchor.second * ds,
            second: anchor.second,
        }
    } else {
        let e = eval(t, p, s);
        ExtendedEval { value: e.value, first: e.first, second: e.second }
    }
}

/// Quadratic extension of `f_t` on `[lo, hi]`: equals `f_t` inside the
/// interval and continues with the second-order Taylor expansion anchored at
/// the nearer endpoint outside it.
pub fn eval_extended(t: f64, p: f64, lo: f64, hi: f64, s: f64) -> Result<ExtendedEval> {
    if !(0.0 <= lo && lo <= hi) {
        return Err(Error::Parameter(format!(
            "extension interval needs 0 <= lo <= hi, got [{lo}, {hi}]"
        )));
    }
    Ok(extended_unchecked(t, p, lo, hi, s))
}

/// Per-coordinate extension intervals from a reference residual:
/// `[(max(0, |s_i|^{p/2} - gamma))^{2/p}, (|s_i|^{p/2} + gamma)^{2/p}]`.
///
/// The lower endpoint is clamped at zero before the `2/p` power; the band is
/// a set of `|s|` values and truncates there naturally.
pub fn build_intervals(s_ref: &DVector<f64>, gamma: f64, p: f64) -> Vec<(f64, f64)> {
    debug_assert!(gamma >= 0.0);
    let inv = 2.0 / p;
    s_ref
        .iter()
        .map(|&s| {
            let m = s.abs().powf(0.5 * p);
            let lo = (m - gamma).max(0.0).powf(inv);
            let hi = (m + gamma).powf(inv);
            (lo, hi)
        })
        .collect()
}

/// A smoothing radius and exponent, with optional per-coordinate extension
/// intervals for the phase loss. Pure data; all evaluation is thread-safe.
#[derive(Clone, Debug)]
pub struct SmoothedLoss {
    t: f64,
    p: f64,
    intervals: Option<Vec<(f64, f64)>>,
}

impl SmoothedLoss {
    pub fn new(t: f64, p: f64) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Parameter(format!("smoothing radius must be positive, got {t}")));
        }
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::Parameter(format!("exponent must satisfy p > 1, got {p}")));
        }
        Ok(SmoothedLoss { t, p, intervals: None })
    }

    pub fn with_intervals(t: f64, p: f64, intervals: Vec<(f64, f64)>) -> Result<Self> {
        let mut loss = Self::new(t, p)?;
        for &(lo, hi) in &intervals {
            if !(0.0 <= lo && lo <= hi) {
                return Err(Error::Parameter(format!(
                    "extension interval needs 0 <= lo <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        loss.intervals = Some(intervals);
        Ok(loss)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        self.intervals.as_deref()
    }

    /// Sum of plain `f_t` over a residual vector: value, gradient and
    /// diagonal Hessian. Sums in ascending row order.
    pub fn eval_sum(&self, s: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
        let n = s.len();
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DVector::zeros(n);
        for i in 0..n {
            let e = eval(self.t, self.p, s[i]);
            value += e.value;
            grad[i] = e.first;
            hess[i] = e.second;
        }
        (value, grad, hess)
    }

    /// One coordinate of the extended phase loss at radius `(1-h) t`.
    ///
    /// The extension is evaluated at `|s|` with the sign carried to the
    /// first derivative, keeping the loss even in each coordinate.
    pub fn tilde_coord(&self, h: f64, i: usize, s: f64) -> ExtendedEval {
        let (lo, hi) = self.intervals.as_ref().expect("tilde needs intervals")[i];
        let e = extended_unchecked((1.0 - h) * self.t, self.p, lo, hi, s.abs());
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        ExtendedEval { value: e.value, first: sign * e.first, second: e.second }
    }

    /// Extended phase loss over a residual vector: value, gradient and
    /// diagonal Hessian. Requires intervals, one per coordinate.
    pub fn tilde_eval(&self, h: f64, s: &DVector<f64>) -> Result<(f64, DVector<f64>, DVector<f64>)> {
        let intervals = self
            .intervals
            .as_ref()
            .ok_or_else(|| Error::Parameter("tilde evaluation needs extension intervals".into()))?;
        if intervals.len() != s.len() {
            return Err(Error::Dimension {
                object: "extension intervals",
                expected: s.len(),
                found: intervals.len(),
            });
        }
        let n = s.len();
        let mut value = 0.0;
        let mut grad = DVector::zeros(n);
        let mut hess = DVector::zeros(n);
        for i in 0..n {
            let e = self.tilde_coord(h, i, s[i]);
            debug_assert!(e.value.is_finite() && e.first.is_finite() && e.second.is_finite());
            value += e.value;
            grad[i] = e.first;
            hess[i] = e.second;
        }
        Ok((value, grad, hess))
    }
}

/// Uniform gap `max_s |f_t(s) - |s|^p| = |p/2 - 1| t^p`.
///
/// The absolute value makes the bound valid on both sides of `p = 2`: the
/// gap sits above `|s|^p` for `p >= 2` and below it for `p <= 2`.
pub fn uniform_gap(t: f64, p: f64) -> f64 {
    debug_assert!(t >= 0.0);
    (0.5 * p - 1.0).abs() * t.powf(p)
}
