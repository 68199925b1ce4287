//! Accelerated gradient descent for objectives whose Hessian is sandwiched
//! between an orthogonal projection `Q` and `kappa Q`.
//!
//! In that geometry the strong convexity constant on range(`Q`) is 1 and the
//! smoothness constant is `kappa`, so the classic constant-parameter scheme
//! applies: step `1/kappa`, momentum `(sqrt(kappa)-1)/(sqrt(kappa)+1)`.
//! Gradients of the preconditioned objective lie in range(`Q`) by
//! construction, so iterates never leave the subspace.
//!
//! Termination is certificate-based, through two channels that are both
//! exact consequences of strong convexity:
//!
//! - value channel: `min g >= g(w) - ||grad g(w)||^2 / 2` at every evaluated
//!   point, so the best observed value minus the best lower bound is a gap
//!   certificate; its resolution is limited by rounding in `g` itself.
//! - gradient channel: `gap(w) <= ||grad g(w)||^2 / 2`, which involves no
//!   value differencing and keeps certifying long after value differences
//!   drown in rounding noise.
//!
//! The run stops when either certificate reaches the target, or when both
//! have stagnated at their numerical floors.

use nalgebra::DVector;

use crate::error::{Error, Result};

use super::objective::Objective;

/// Certified gap below which value differences are rounding noise.
fn value_floor(scale: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + scale.abs())
}

/// Iterations without relative gradient-norm improvement after which the
/// gradient is taken to sit at its numerical floor.
const STALL_WINDOW: usize = 64;

/// Minimizes `obj` from `y0` until the gap has certifiably dropped to
/// `target_gap_ratio` times the initial gap (or both certificates hit their
/// numerical floors). Returns the certified iterate and the number of
/// momentum steps taken.
pub fn agd_minimize<O: Objective>(
    obj: &O,
    y0: DVector<f64>,
    kappa: f64,
    target_gap_ratio: f64,
) -> Result<(DVector<f64>, usize)> {
    if !kappa.is_finite() || kappa < 1.0 {
        return Err(Error::Parameter(format!("kappa must be at least 1, got {kappa}")));
    }
    if !(target_gap_ratio > 0.0 && target_gap_ratio < 0.5) {
        return Err(Error::Parameter(format!(
            "target gap ratio must lie in (0, 1/2), got {target_gap_ratio}"
        )));
    }

    let step = 1.0 / kappa;
    let sqrt_k = kappa.sqrt();
    let beta = (sqrt_k - 1.0) / (sqrt_k + 1.0);
    let cap = (100.0 * sqrt_k * (kappa / target_gap_ratio).ln()).ceil().max(16.0) as usize;

    let (f0, g0) = obj.value_grad(&y0);
    let floor = value_floor(f0);
    // lower bound on the initial gap, from smoothness
    let gap0_from_grad = g0.norm_squared() / (2.0 * kappa);

    let mut lower = f0 - 0.5 * g0.norm_squared();
    let mut best_f = f0;
    let mut best_y = y0.clone();
    let mut best_grad_sq = g0.norm_squared();
    let mut best_grad_y = y0.clone();
    let mut stall_anchor = best_grad_sq;
    let mut stall_count = 0usize;

    if best_f - lower <= floor || 0.5 * best_grad_sq <= floor * f64::EPSILON {
        return Ok((best_y, 0));
    }

    let mut y_prev = y0.clone();
    let mut y = &y0 - step * &g0;
    let mut iterations = 1usize;

    loop {
        let w = &y + beta * (&y - &y_prev);
        let (fw, gw) = obj.value_grad(&w);
        iterations += 1;
        let grad_sq = gw.norm_squared();
        lower = lower.max(fw - 0.5 * grad_sq);
        if fw < best_f {
            best_f = fw;
            best_y.copy_from(&w);
        }
        if grad_sq < best_grad_sq {
            best_grad_sq = grad_sq;
            best_grad_y.copy_from(&w);
        }

        let progress_lb = (f0 - best_f).max(gap0_from_grad);
        let target = target_gap_ratio * progress_lb;
        let remaining_value = best_f - lower;
        let remaining_grad = 0.5 * best_grad_sq;
        if remaining_grad <= target {
            return Ok((best_grad_y, iterations));
        }
        // the value certificate carries rounding noise of order `floor`;
        // it can only vouch for targets above that
        if remaining_value <= target && floor <= target {
            return Ok((best_y, iterations));
        }

        // numerical-floor exits: the value certificate has drowned in
        // rounding and the gradient norm has stopped improving
        if grad_sq > stall_anchor * (1.0 - 1e-3) {
            stall_count += 1;
        } else {
            stall_anchor = grad_sq.min(stall_anchor);
            stall_count = 0;
        }
        if remaining_value <= floor && stall_count >= STALL_WINDOW {
            return Ok((best_grad_y, iterations));
        }

        if iterations >= cap {
            return Err(Error::NonConvergence {
                phase: None,
                msg: format!(
                    "AGD exceeded {cap} iterations (kappa {kappa:.3e}, ratio {target_gap_ratio:.3e}, \
                     certified gap {:.3e} vs target {target:.3e})",
                    remaining_grad.min(remaining_value)
                ),
            });
        }

        y_prev = std::mem::replace(&mut y, &w - step * &gw);
    }
}
