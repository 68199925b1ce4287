//! Leverage-score row sampling and the verified spectral sparsifier used by
//! the sketched preconditioner.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{generalized_extreme_eigenvalues, SymEig};
use crate::matrix::Matrix;

/// Oversampling factor on top of the `8 d ln d` base sample count.
pub const SPARSIFY_OVERSAMPLE: f64 = 4.0;
/// Sampling attempts before falling back to the exact diagonal.
pub const SPARSIFY_MAX_ATTEMPTS: u32 = 8;
/// Verification slack on the exact `[1/2, 2]` spectral bounds.
const VERIFY_SLACK: f64 = 1e-9;

/// Weighted leverage scores: `tau_i = (sqrt(D) A (A^T D A)^+ A^T sqrt(D))_{ii}`.
///
/// They are diagonal entries of a projection matrix, so each lies in
/// `[0, 1]` and they sum to the rank of `sqrt(D) A`.
pub fn leverage_scores(a: &Matrix, d: &DVector<f64>) -> DVector<f64> {
    let pinv = SymEig::new(&a.gram_weighted(d)).pinv();
    let n = a.nrows();
    let mut tau = DVector::zeros(n);
    for i in 0..n {
        let row = a.row_vector(i);
        tau[i] = (d[i] * row.dot(&(&pinv * &row))).clamp(0.0, 1.0);
    }
    tau
}

/// Outcome of a sparsification attempt (or of the exact fallback).
#[derive(Clone, Debug)]
pub struct SparsifyResult {
    /// The sampled diagonal as (row, weight) pairs.
    pub weights: Vec<(usize, f64)>,
    /// Whether the two-sided spectral check passed.
    pub accepted: bool,
    /// Sampling attempts consumed (0 when the fallback was taken directly).
    pub attempts: u32,
}

fn exact_fallback(d: &DVector<f64>) -> Vec<(usize, f64)> {
    d.iter().enumerate().map(|(i, &w)| (i, w)).collect()
}

/// Verifies `1/2 A^T D A <= A^T W A <= 2 A^T D A` through the extreme
/// generalized eigenvalues of the pencil restricted to the range.
pub fn verify_sparsifier(a: &Matrix, d: &DVector<f64>, weights: &[(usize, f64)]) -> (f64, f64, bool) {
    let mut w_full = DVector::zeros(a.nrows());
    for &(row, w) in weights {
        w_full[row] += w;
    }
    let b = a.gram_weighted(&w_full);
    let ceig = SymEig::new(&a.gram_weighted(d));
    let (lo, hi) = generalized_extreme_eigenvalues(&b, &ceig);
    let ok = lo >= 0.5 * (1.0 - VERIFY_SLACK) && hi <= 2.0 * (1.0 + VERIFY_SLACK);
    (lo, hi, ok)
}

/// One sampling attempt: draws `ceil(8 d ln(max(d,2)) * oversample)` rows
/// with replacement, with probability proportional to the weighted leverage
/// scores, rescaled so the expectation equals `A^T D A`; then verifies the
/// two-sided spectral bound.
pub fn sparsify(a: &Matrix, d: &DVector<f64>, seed: u64) -> SparsifyResult {
    let tau = leverage_scores(a, d);
    let total: f64 = tau.iter().sum();
    if total.is_nan() || total <= 1e-300 {
        // zero matrix: the exact diagonal is the only sensible sparsifier
        return SparsifyResult { weights: exact_fallback(d), accepted: true, attempts: 0 };
    }
    let d_cols = a.ncols() as f64;
    let m = (8.0 * d_cols * (d_cols.max(2.0)).ln() * SPARSIFY_OVERSAMPLE).ceil() as usize;
    let dist = WeightedIndex::new(tau.iter().cloned()).expect("positive leverage mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = std::collections::BTreeMap::<usize, f64>::new();
    for _ in 0..m {
        let i = dist.sample(&mut rng);
        // q_i = tau_i / total; each pick contributes d_i / (m q_i)
        *w.entry(i).or_insert(0.0) += d[i] * total / (m as f64 * tau[i]);
    }
    let weights: Vec<(usize, f64)> = w.into_iter().collect();
    let (_, _, ok) = verify_sparsifier(a, d, &weights);
    SparsifyResult { weights, accepted: ok, attempts: 1 }
}

/// Sampling with retries: up to [`SPARSIFY_MAX_ATTEMPTS`] seeds derived from
/// `seed`, then the exact diagonal `W = D` (always accepted).
pub fn sparsify_accepted(a: &Matrix, d: &DVector<f64>, seed: u64) -> SparsifyResult {
    let mut attempts = 0;
    for offset in 0..SPARSIFY_MAX_ATTEMPTS {
        let mut result = sparsify(a, d, seed.wrapping_add(offset as u64));
        attempts += result.attempts;
        if result.accepted {
            result.attempts = attempts;
            return result;
        }
    }
    log::warn!("sparsifier rejected {SPARSIFY_MAX_ATTEMPTS} times; using the exact diagonal");
    SparsifyResult { weights: exact_fallback(d), accepted: true, attempts }
}

/// Smoothness and strong-convexity constants for the stochastic solver:
/// `L = 2 kappa`, `sigma = 1` in the sketched metric, and per-row
/// `L_i = 2 kappa tau_i`, so `sum L_i <= 2 kappa d`.
pub fn smoothness_constants(
    a: &Matrix,
    d: &DVector<f64>,
    _w: &[(usize, f64)],
    kappa: f64,
) -> (f64, f64, DVector<f64>) {
    let li = leverage_scores(a, d) * (2.0 * kappa);
    (2.0 * kappa, 1.0, li)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LpProblem;
    use nalgebra::DMatrix;

    #[test]
    fn leverage_identity_and_ones_column() {
        let a = Matrix::Dense(DMatrix::identity(4, 4));
        let ones = DVector::from_element(4, 1.0);
        let tau = leverage_scores(&a, &ones);
        for v in tau.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((tau.sum() - 4.0).abs() < 1e-10);

        let a = Matrix::Dense(DMatrix::from_element(3, 1, 1.0));
        let ones = DVector::from_element(3, 1.0);
        let tau = leverage_scores(&a, &ones);
        for v in tau.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((tau.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leverage_sums_to_rank() {
        let prob = LpProblem::generate_random(50, 5, 3.0, 1.0, 77).unwrap();
        let d = DVector::from_fn(50, |i, _| 0.1 + (i % 7) as f64 * 0.5);
        let tau = leverage_scores(prob.matrix(), &d);
        assert!((tau.sum() - 5.0).abs() <= 1e-8);
        for v in tau.iter() {
            assert!((-1e-12..=1.0 + 1e-12).contains(v));
        }
    }

    #[test]
    fn exact_copy_verifies_at_one() {
        let prob = LpProblem::generate_random(12, 3, 4.0, 1.0, 5).unwrap();
        let d = DVector::from_element(12, 1.0);
        let copy = exact_fallback(&d);
        let (lo, hi, ok) = verify_sparsifier(prob.matrix(), &d, &copy);
        assert!(ok);
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn square_identity_needs_full_coverage_and_fallback_succeeds() {
        // n = d: every leverage score is 1 and the sparsifier must keep all
        // coordinates or fail verification; the fallback always passes.
        let a = Matrix::Dense(DMatrix::identity(6, 6));
        let d = DVector::from_element(6, 1.0);
        let res = sparsify_accepted(&a, &d, 1);
        assert!(res.accepted);
        let (_, _, ok) = verify_sparsifier(&a, &d, &res.weights);
        assert!(ok);
    }

    #[test]
    fn tall_random_instances_mostly_accept_first_try() {
        let prob = LpProblem::generate_random(200, 5, 3.0, 1.0, 99).unwrap();
        let d = DVector::from_element(200, 1.0);
        let mut first_try = 0;
        for seed in 0..20 {
            if sparsify(prob.matrix(), &d, seed).accepted {
                first_try += 1;
            }
        }
        assert!(first_try >= 18, "only {first_try}/20 first-try acceptances");
    }

    #[test]
    fn smoothness_constants_identity_case() {
        let a = Matrix::Dense(DMatrix::identity(5, 5));
        let d = DVector::from_element(5, 1.0);
        let (l, sigma, li) = smoothness_constants(&a, &d, &[], 8.0);
        assert_eq!(l, 16.0);
        assert_eq!(sigma, 1.0);
        for v in li.iter() {
            assert!((v - 16.0).abs() < 1e-10);
        }
        assert!((li.sum() - 16.0 * 5.0).abs() < 1e-9);
    }

    #[test]
    fn li_sum_matches_trace_identity() {
        let prob = LpProblem::generate_random(40, 6, 4.0, 1.0, 13).unwrap();
        let d = DVector::from_fn(40, |i, _| 1.0 + (i as f64) * 0.01);
        let kappa = 100.0;
        let (l, _, li) = smoothness_constants(prob.matrix(), &d, &[], kappa);
        assert!((li.sum() - 2.0 * kappa * 6.0).abs() <= 1e-6 * (2.0 * kappa * 6.0));
        for v in li.iter() {
            assert!(*v >= 0.0 && *v <= l + 1e-9);
        }
    }
}
