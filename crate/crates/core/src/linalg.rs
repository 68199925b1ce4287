//! Dense symmetric-eigendecomposition helpers.
//!
//! Every pseudo-inverse in the crate goes through [`SymEig`] with the same
//! relative eigenvalue cutoff, so rank decisions are made consistently.

use nalgebra::{DMatrix, DVector};

/// Relative eigenvalue cutoff for pseudo-inverses: eigenvalues below
/// `REL_CUTOFF * lambda_max` are treated as zero.
pub const REL_CUTOFF: f64 = 1e-12;

/// Eigendecomposition of a symmetric positive semidefinite matrix with
/// rank-aware apply/solve helpers.
#[derive(Clone, Debug)]
pub struct SymEig {
    vals: DVector<f64>,
    vecs: DMatrix<f64>,
    cutoff: f64,
}

impl SymEig {
    /// Decomposes `m` (assumed symmetric PSD up to rounding). Small negative
    /// eigenvalues from rounding are clamped to zero.
    pub fn new(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "SymEig needs a square matrix");
        let eig = m.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        SymEig {
            vals: eig.eigenvalues,
            vecs: eig.eigenvectors,
            cutoff: REL_CUTOFF * max,
        }
    }

    pub fn dim(&self) -> usize {
        self.vals.len()
    }

    /// Number of eigenvalues above the cutoff.
    pub fn rank(&self) -> usize {
        self.vals.iter().filter(|&&v| v > self.cutoff).count()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.vals.iter().cloned().fold(0.0_f64, f64::max)
    }

    fn apply_fn(&self, v: &DVector<f64>, f: impl Fn(f64) -> f64) -> DVector<f64> {
        // V f(Lambda) V^T v, restricted to the numerical range.
        let mut out = DVector::zeros(self.dim());
        for j in 0..self.dim() {
            let lam = self.vals[j];
            if lam > self.cutoff {
                let col = self.vecs.column(j);
                out.axpy(f(lam) * col.dot(v), &col.clone_owned(), 1.0);
            }
        }
        out
    }

    /// `M^dagger v`.
    pub fn pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_fn(v, |lam| 1.0 / lam)
    }

    /// `M^{1/2} v`.
    pub fn sqrt_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_fn(v, f64::sqrt)
    }

    /// Orthogonal projection of `v` onto range(M).
    pub fn project_range(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_fn(v, |_| 1.0)
    }

    /// `v^T M^dagger v` (nonnegative for PSD input).
    pub fn pinv_quad_form(&self, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim() {
            let lam = self.vals[j];
            if lam > self.cutoff {
                let c = self.vecs.column(j).dot(v);
                acc += c * c / lam;
            }
        }
        acc
    }

    fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut scaled = DMatrix::zeros(n, n);
        for j in 0..n {
            let lam = self.vals[j];
            if lam > self.cutoff {
                let w = f(lam);
                for i in 0..n {
                    scaled[(i, j)] = self.vecs[(i, j)] * w;
                }
            }
        }
        &scaled * self.vecs.transpose()
    }

    /// Explicit `M^dagger`.
    pub fn pinv(&self) -> DMatrix<f64> {
        self.matrix_fn(|lam| 1.0 / lam)
    }

    /// Explicit `(M^dagger)^{1/2}`.
    pub fn pinv_sqrt(&self) -> DMatrix<f64> {
        self.matrix_fn(|lam| 1.0 / lam.sqrt())
    }

    /// Orthonormal basis of range(M), one column per retained eigenvalue.
    pub fn range_basis(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.dim()).filter(|&j| self.vals[j] > self.cutoff).collect();
        let mut basis = DMatrix::zeros(self.dim(), cols.len());
        for (k, &j) in cols.iter().enumerate() {
            basis.set_column(k, &self.vecs.column(j));
        }
        basis
    }

    /// Retained eigenvalues, in the order of [`Self::range_basis`] columns.
    pub fn range_eigenvalues(&self) -> Vec<f64> {
        self.vals.iter().cloned().filter(|&v| v > self.cutoff).collect()
    }
}

/// Extreme eigenvalues of a symmetric matrix, as (min, max).
pub fn symmetric_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Extreme generalized eigenvalues of the pencil (B, C) restricted to
/// range(C), where both matrices are symmetric PSD. `ceig` must be the
/// decomposition of C.
pub fn generalized_extreme_eigenvalues(b: &DMatrix<f64>, ceig: &SymEig) -> (f64, f64) {
    let basis = ceig.range_basis();
    if basis.ncols() == 0 {
        return (1.0, 1.0); // zero pencil: nothing to compare
    }
    let lams = ceig.range_eigenvalues();
    // E = Lambda^{-1/2} V^T B V Lambda^{-1/2}
    let mut vb = basis.transpose() * b * &basis;
    for i in 0..lams.len() {
        for j in 0..lams.len() {
            vb[(i, j)] /= (lams[i] * lams[j]).sqrt();
        }
    }
    symmetric_extreme_eigenvalues(&vb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0, 0.0]));
        let eig = SymEig::new(&m);
        assert_eq!(eig.rank(), 2);
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let out = eig.pinv_apply(&v);
        assert!((out[0] - 0.25).abs() < 1e-14);
        assert!((out[1] - 1.0 / 9.0).abs() < 1e-14);
        assert!(out[2].abs() < 1e-14);
    }

    #[test]
    fn pinv_sqrt_matches_hand_value() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let p = SymEig::new(&m).pinv_sqrt();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((p[(1, 1)] - 1.0 / 3.0).abs() < 1e-14);
        assert!(p[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent() {
        // rank-1 PSD matrix
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let m = &u * u.transpose();
        let eig = SymEig::new(&m);
        let v = DVector::from_vec(vec![0.3, -0.7, 2.0]);
        let p1 = eig.project_range(&v);
        let p2 = eig.project_range(&p1);
        assert!((&p1 - &p2).norm() < 1e-12 * (1.0 + p1.norm()));
    }

    #[test]
    fn generalized_eigenvalues_of_equal_pencil_are_one() {
        let u = DMatrix::from_fn(4, 2, |i, j| ((i + 1) * (j + 2)) as f64 * 0.1);
        let c = u.transpose() * &u; // 2x2 PSD
        let eig = SymEig::new(&c);
        let (lo, hi) = generalized_extreme_eigenvalues(&c, &eig);
        assert!((lo - 1.0).abs() < 1e-10);
        assert!((hi - 1.0).abs() < 1e-10);
    }
}
