//! Mini-batch variance-reduced accelerated solver for the sketched phase
//! objective, plus the batch-size selection rule.
//!
//! The objective is the sum `F(y) = sum_i F_i(y)` with
//! `F_i(y) = (1/n) c . P'' y + tilde_f_i(a_i . P'' y - b_i)`. Each stochastic
//! step samples a mini-batch of rows with probability proportional to their
//! smoothness constants `L_i`, forms the variance-reduced estimator against
//! the current snapshot, and takes an accelerated step with negative
//! momentum toward the snapshot.
//!
//! Every iterate is maintained together with its image under `P''`, so one
//! step costs the sampled rows plus dense `d x d` work; the problem matrix
//! is only row-accessed for the batch, which the row counter audits.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::CountedRows;

use super::objective::PreconditionedObjective;

/// Inputs to a phase solve: batch size and the phase constants.
#[derive(Clone, Debug)]
pub struct KatyushaOptions {
    pub batch: usize,
    /// Strong convexity constant in the sketched metric.
    pub sigma: f64,
    /// Global smoothness bound `L`.
    pub l_total: f64,
    /// Per-row smoothness bounds `L_i`; also the sampling weights.
    pub l_each: DVector<f64>,
    pub target_gap_ratio: f64,
    pub seed: u64,
}

/// Work accounting for a phase solve.
#[derive(Clone, Copy, Debug)]
pub struct KatyushaStats {
    pub epochs: usize,
    /// Stochastic steps taken.
    pub steps: usize,
    /// Rows of `A` read by stochastic steps; snapshots are not included.
    pub rows_touched: u64,
    pub batch: usize,
}

struct Snapshot {
    /// Per-coordinate first derivatives of the extended loss at the
    /// snapshot residual.
    der: DVector<f64>,
    /// Full gradient in y-space.
    mu: DVector<f64>,
    /// Image of the full gradient under `P''`.
    mu_img: DVector<f64>,
    value: f64,
    grad_norm_sq: f64,
}

fn gap_floor(scale: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + scale.abs())
}

/// Minimizes the sketched phase objective from `y0` until the expected-gap
/// contract `F(y) - min F <= ratio (F(y0) - min F)` is certified.
pub fn katyusha_minimize(
    obj: &PreconditionedObjective<'_>,
    y0: DVector<f64>,
    opts: &KatyushaOptions,
) -> Result<(DVector<f64>, KatyushaStats)> {
    let sp = obj
        .precond()
        .sketched_parts()
        .ok_or_else(|| Error::Parameter("the stochastic solver needs the sketched preconditioner".into()))?;
    let problem = obj.problem();
    let a = problem.matrix();
    let n = problem.n();
    if y0.len() != n {
        return Err(Error::Dimension { object: "warm start y0", expected: n, found: y0.len() });
    }
    if opts.batch == 0 || opts.batch > n {
        return Err(Error::Parameter(format!("batch must lie in [1, {n}], got {}", opts.batch)));
    }
    if !(opts.target_gap_ratio > 0.0 && opts.target_gap_ratio < 0.5) {
        return Err(Error::Parameter(format!(
            "target gap ratio must lie in (0, 1/2), got {}",
            opts.target_gap_ratio
        )));
    }
    if opts.l_each.len() != n {
        return Err(Error::Dimension { object: "per-row smoothness", expected: n, found: opts.l_each.len() });
    }

    let loss = obj.loss();
    let h = obj.h();
    let b_vec = problem.b();
    let c_vec = problem.c();
    let counted = CountedRows::new(a);

    let sum_li: f64 = opts.l_each.iter().sum();
    let sampler = if sum_li > 1e-300 {
        Some(WeightedIndex::new(opts.l_each.iter().cloned()).map_err(|e| {
            Error::Parameter(format!("invalid sampling weights: {e}"))
        })?)
    } else {
        None // all rows are flat: the estimator is the snapshot gradient
    };

    let batch_f = opts.batch as f64;
    let m = n.div_ceil(opts.batch).max(1);
    let l_variance = sum_li / batch_f;
    let l_combined = opts.l_total + l_variance;
    let tau1 = (m as f64 * opts.sigma / (3.0 * l_combined)).sqrt().min(0.5);
    let tau2 = 0.5;
    let alpha = 1.0 / (3.0 * tau1 * l_combined);
    let theta = 1.0 + alpha * opts.sigma;
    let grad_step = 1.0 / (3.0 * l_combined);

    // iteration cap shaped like the expected complexity, with a wide
    // safety factor
    let sigma = opts.sigma.max(1e-12);
    let iter_budget = (n as f64 / batch_f)
        + (opts.l_total / sigma).sqrt()
        + (n as f64 * sum_li / sigma).sqrt() / batch_f;
    let cap = (100.0 * iter_budget * (1.0 / opts.target_gap_ratio).ln()).ceil().max(64.0) as usize;

    let refresh = |point: &DVector<f64>, image: &DVector<f64>| -> Snapshot {
        let s = a.matvec(image) - b_vec;
        let mut value = c_vec.dot(image);
        let mut der = DVector::zeros(n);
        for i in 0..n {
            let e = loss.tilde_coord(h, i, s[i]);
            value += e.value;
            der[i] = e.first;
        }
        let w_hat = c_vec + a.tr_matvec(&der);
        let mu_img = sp.solve_image(&w_hat);
        let mu = sp.scatter(&mu_img);
        let grad_norm_sq = mu.norm_squared();
        let _ = point;
        Snapshot { der, mu, mu_img, value, grad_norm_sq }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut z = y0.clone();
    let mut y = y0.clone();
    let mut xt = y0.clone();
    let mut iz = obj.to_x(&y0);
    let mut iy = iz.clone();
    let mut ixt = iz.clone();

    let mut snap = refresh(&xt, &ixt);
    let f0 = snap.value;
    let grad0_sq = snap.grad_norm_sq;
    let floor = gap_floor(f0);
    // sigma = 1/2 in the sketched metric is the provable constant (the
    // sparsifier slack sits on the lower side); certificates use it.
    let sigma_cert = 0.5;
    let mut lower = snap.value - snap.grad_norm_sq / (2.0 * sigma_cert);
    let mut best_f = snap.value;
    let mut best_y = xt.clone();
    let mut best_grad_sq = snap.grad_norm_sq;
    let mut best_grad_y = xt.clone();
    let mut stall_count = 0usize;
    let mut stats = KatyushaStats { epochs: 0, steps: 0, rows_touched: 0, batch: opts.batch };

    if best_f - lower <= floor {
        return Ok((best_y, stats));
    }

    let d_cols = problem.d();
    let mut scratch = DVector::zeros(d_cols);
    loop {
        let mut acc = DVector::zeros(n);
        let mut acc_img = DVector::zeros(d_cols);
        let mut wsum = 0.0;
        let mut wj = 1.0;
        for _ in 0..m {
            // mixed point x_k = tau1 z + tau2 x~ + (1 - tau1 - tau2) y
            let mut xk = &z * tau1;
            xk.axpy(tau2, &xt, 1.0);
            xk.axpy(1.0 - tau1 - tau2, &y, 1.0);
            let mut ixk = &iz * tau1;
            ixk.axpy(tau2, &ixt, 1.0);
            ixk.axpy(1.0 - tau1 - tau2, &iy, 1.0);

            // variance-reduced batch estimator; the (1/n) c-terms cancel in
            // the correction, so only row derivatives enter
            let mut v = DVector::zeros(d_cols);
            if let Some(sampler) = &sampler {
                for _ in 0..opts.batch {
                    let i = sampler.sample(&mut rng);
                    counted.row_into(i, &mut scratch);
                    let s_i = scratch.dot(&ixk) - b_vec[i];
                    let der_now = loss.tilde_coord(h, i, s_i).first;
                    let p_i = opts.l_each[i] / sum_li;
                    let coeff = (der_now - snap.der[i]) / (batch_f * p_i);
                    v.axpy(coeff, &scratch, 1.0);
                }
            }
            let pv = sp.solve_image(&v);
            let grad_est = &snap.mu + sp.scatter(&pv);
            let grad_est_img = &snap.mu_img + &pv;

            // mirror step with the explicit strong convexity term
            let denom = 1.0 + alpha * opts.sigma;
            z.axpy(alpha * opts.sigma, &xk, 1.0);
            z.axpy(-alpha, &grad_est, 1.0);
            z /= denom;
            iz.axpy(alpha * opts.sigma, &ixk, 1.0);
            iz.axpy(-alpha, &grad_est_img, 1.0);
            iz /= denom;

            // gradient step from the mixed point
            y = xk;
            y.axpy(-grad_step, &grad_est, 1.0);
            iy = ixk;
            iy.axpy(-grad_step, &grad_est_img, 1.0);

            acc.axpy(wj, &y, 1.0);
            acc_img.axpy(wj, &iy, 1.0);
            wsum += wj;
            wj *= theta;
            if wj > 1e100 {
                acc /= wj;
                acc_img /= wj;
                wsum /= wj;
                wj = 1.0;
            }
            stats.steps += 1;
        }
        stats.epochs += 1;
        stats.rows_touched = counted.rows_touched();

        xt = acc / wsum;
        ixt = acc_img / wsum;
        snap = refresh(&xt, &ixt);
        lower = lower.max(snap.value - snap.grad_norm_sq / (2.0 * sigma_cert));
        if snap.value < best_f {
            best_f = snap.value;
            best_y.copy_from(&xt);
        }
        if snap.grad_norm_sq < best_grad_sq * (1.0 - 1e-3) {
            best_grad_sq = snap.grad_norm_sq;
            best_grad_y.copy_from(&xt);
            stall_count = 0;
        } else {
            if snap.grad_norm_sq < best_grad_sq {
                best_grad_sq = snap.grad_norm_sq;
                best_grad_y.copy_from(&xt);
            }
            stall_count += 1;
        }

        let progress_lb = (f0 - best_f).max(grad0_sq / (2.0 * opts.l_total.max(1.0)));
        let target = opts.target_gap_ratio * progress_lb;
        let remaining_value = best_f - lower;
        // gradient-only certificate: gap <= ||grad||^2 / (2 sigma)
        let remaining_grad = best_grad_sq / (2.0 * sigma_cert);
        if remaining_grad <= target {
            return Ok((best_grad_y, stats));
        }
        // the value certificate carries rounding noise of order `floor`
        if remaining_value <= target && floor <= target {
            return Ok((best_y, stats));
        }
        // both channels at their numerical floors
        if remaining_value <= floor && stall_count >= 8 {
            return Ok((best_grad_y, stats));
        }
        if stats.steps >= cap {
            return Err(Error::NonConvergence {
                phase: None,
                msg: format!(
                    "stochastic solver exceeded {cap} steps (batch {}, certified gap {:.3e})",
                    remaining_grad.min(remaining_value),
                    opts.batch
                ),
            });
        }
    }
}

/// Batch size from the per-phase cost balance: with `Z` stored nonzeros,
/// `b = ceil(sqrt(n^{3/2} d^{5/2} / Z))` when `kappa d >= n` and
/// `b = ceil(sqrt(n^2 d^2 / (Z sqrt(kappa))))` otherwise, clamped to `[1, n]`.
pub fn batch_size(n: usize, d: usize, z: usize, kappa: f64) -> usize {
    let (nf, df, zf) = (n as f64, d as f64, z as f64);
    let raw = if kappa * df >= nf {
        (nf.powf(1.5) * df.powf(2.5) / zf).sqrt()
    } else {
        (nf * nf * df * df / (zf * kappa.sqrt())).sqrt()
    };
    (raw.ceil() as usize).clamp(1, n)
}
