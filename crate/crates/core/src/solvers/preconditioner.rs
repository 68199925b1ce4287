//! The three phase preconditioners.
//!
//! All of them realize a change of variables `x = P y` under which the
//! extended phase loss has a Hessian sandwiched between an orthogonal
//! projection and `kappa` times it:
//!
//! - dense: `P = ((A^T D A)^+)^{1/2}` as an explicit `d x d` matrix, `y` in R^d;
//! - factored: `P' = (A^T D A)^+ A^T sqrt(D)` applied through linear solves,
//!   `y` in R^n;
//! - sketched: `P'' = (A^T W A)^+ A^T sqrt(W)` with a sampled diagonal `W`
//!   and `(A^T W A)^+` retained as a dense matrix, `y` in R^n.

use nalgebra::{DMatrix, DVector};

use crate::linalg::SymEig;
use crate::matrix::Matrix;

/// Dense preconditioner with its Gram decomposition retained for preimages.
#[derive(Debug)]
pub struct DensePre {
    p: DMatrix<f64>,
    gram_eig: SymEig,
    d_dim: usize,
    metric: DVector<f64>,
}

/// Solve backend for the factored preconditioner: Cholesky when the weighted
/// Gram matrix is numerically positive definite, eigendecomposition with
/// pseudo-inverse semantics otherwise.
#[derive(Debug)]
enum SolveBackend {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Eig(SymEig),
}

impl SolveBackend {
    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SolveBackend::Cholesky(ch) => ch.solve(v),
            SolveBackend::Eig(eig) => eig.pinv_apply(v),
        }
    }
}

#[derive(Debug)]
pub struct FactoredPre<'a> {
    a: &'a Matrix,
    backend: SolveBackend,
    sqrt_d: DVector<f64>,
    metric: DVector<f64>,
}

#[derive(Debug)]
pub struct SketchedPre {
    /// Sampled diagonal as (row, weight) with positive weights, ascending rows.
    support: Vec<(usize, f64)>,
    sqrt_w: Vec<f64>,
    /// Dense copies of the support rows, extracted once so applications do
    /// not re-read the problem matrix.
    rows: Vec<DVector<f64>>,
    /// `(A^T W A)^+` kept explicit.
    w_gram_pinv: DMatrix<f64>,
    /// The sampled diagonal as a full vector (zeros off support).
    metric: DVector<f64>,
    n: usize,
    d_dim: usize,
}

impl SketchedPre {
    /// `(A^T W A)^+ v`.
    pub fn solve_image(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.w_gram_pinv * v
    }

    /// `sqrt(W) A z` for an already-solved `z`: the support-sparse half of a
    /// pullback.
    pub fn scatter(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (k, &(row, _)) in self.support.iter().enumerate() {
            out[row] += self.sqrt_w[k] * self.rows[k].dot(z);
        }
        out
    }

    pub fn support(&self) -> &[(usize, f64)] {
        &self.support
    }
}

/// One of the three interchangeable preconditioners, borrowing the problem
/// matrix for the duration of a phase.
#[derive(Debug)]
pub enum Preconditioner<'a> {
    Dense(DensePre),
    Factored(FactoredPre<'a>),
    Sketched(SketchedPre),
}

impl<'a> Preconditioner<'a> {
    /// Explicit `P = ((A^T D A)^+)^{1/2}` via symmetric eigendecomposition.
    pub fn dense(a: &'a Matrix, d: &DVector<f64>) -> Self {
        debug_assert!(d.iter().all(|&v| v > 0.0));
        let gram_eig = SymEig::new(&a.gram_weighted(d));
        let p = gram_eig.pinv_sqrt();
        Preconditioner::Dense(DensePre { p, gram_eig, d_dim: a.ncols(), metric: d.clone() })
    }

    /// Solve-based `P' = (A^T D A)^+ A^T sqrt(D)`.
    pub fn factored(a: &'a Matrix, d: &DVector<f64>) -> Self {
        debug_assert!(d.iter().all(|&v| v > 0.0));
        let gram = a.gram_weighted(d);
        let backend = match nalgebra::Cholesky::new(gram.clone()) {
            Some(ch) => SolveBackend::Cholesky(ch),
            None => {
                log::warn!("weighted Gram matrix is numerically singular; using pseudo-inverse solves");
                SolveBackend::Eig(SymEig::new(&gram))
            }
        };
        Preconditioner::Factored(FactoredPre { a, backend, sqrt_d: d.map(f64::sqrt), metric: d.clone() })
    }

    /// Sketched `P'' = (A^T W A)^+ A^T sqrt(W)` from a sampled diagonal.
    pub fn sketched(a: &'a Matrix, weights: Vec<(usize, f64)>) -> Self {
        let mut support = weights;
        support.retain(|&(_, w)| w > 0.0);
        support.sort_unstable_by_key(|&(row, _)| row);
        let mut w_full = DVector::zeros(a.nrows());
        for &(row, w) in &support {
            w_full[row] += w;
        }
        let w_gram_pinv = SymEig::new(&a.gram_weighted(&w_full)).pinv();
        let sqrt_w = support.iter().map(|&(_, w)| w.sqrt()).collect();
        let rows = support.iter().map(|&(row, _)| a.row_vector(row)).collect();
        Preconditioner::Sketched(SketchedPre {
            support,
            sqrt_w,
            rows,
            w_gram_pinv,
            metric: w_full,
            n: a.nrows(),
            d_dim: a.ncols(),
        })
    }

    /// Dimension of the preconditioned variable `y`.
    pub fn y_dim(&self) -> usize {
        match self {
            Preconditioner::Dense(dp) => dp.d_dim,
            Preconditioner::Factored(fp) => fp.a.nrows(),
            Preconditioner::Sketched(sp) => sp.n,
        }
    }

    /// `x = P y`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Dense(dp) => &dp.p * y,
            Preconditioner::Factored(fp) => {
                let weighted = DVector::from_fn(y.len(), |i, _| fp.sqrt_d[i] * y[i]);
                fp.backend.solve(&fp.a.tr_matvec(&weighted))
            }
            Preconditioner::Sketched(sp) => {
                let mut rhs = DVector::zeros(sp.d_dim);
                for (k, &(row, _)) in sp.support.iter().enumerate() {
                    let coeff = sp.sqrt_w[k] * y[row];
                    if coeff != 0.0 {
                        rhs.axpy(coeff, &sp.rows[k], 1.0);
                    }
                }
                sp.solve_image(&rhs)
            }
        }
    }

    /// `P^T w` for a `d`-vector `w`: the pullback of an `x`-space gradient
    /// into `y`-space.
    pub fn pullback(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Dense(dp) => &dp.p * w, // P is symmetric
            Preconditioner::Factored(fp) => {
                let solved = fp.backend.solve(w);
                let mut out = fp.a.matvec(&solved);
                for i in 0..out.len() {
                    out[i] *= fp.sqrt_d[i];
                }
                out
            }
            Preconditioner::Sketched(sp) => sp.scatter(&sp.solve_image(w)),
        }
    }

    /// Minimum-norm `y` with `P y = x` for `x` in the row space:
    /// `(A^T D A)^{1/2} x` for the dense kind, `sqrt(D) A x` and
    /// `sqrt(W) A x` for the operator kinds.
    pub fn preimage(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Preconditioner::Dense(dp) => dp.gram_eig.sqrt_apply(x),
            Preconditioner::Factored(fp) => {
                let mut out = fp.a.matvec(x);
                for i in 0..out.len() {
                    out[i] *= fp.sqrt_d[i];
                }
                out
            }
            Preconditioner::Sketched(sp) => {
                let mut out = DVector::zeros(sp.n);
                for (k, &(row, _)) in sp.support.iter().enumerate() {
                    out[row] = sp.sqrt_w[k] * sp.rows[k].dot(x);
                }
                out
            }
        }
    }

    /// The explicit matrix of the dense kind.
    pub fn dense_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Preconditioner::Dense(dp) => Some(&dp.p),
            _ => None,
        }
    }

    pub fn sketched_parts(&self) -> Option<&SketchedPre> {
        match self {
            Preconditioner::Sketched(sp) => Some(sp),
            _ => None,
        }
    }

    /// Row weights of the metric this preconditioner was built against:
    /// the phase diagonal `D` for the dense and factored kinds, the sampled
    /// diagonal `W` for the sketched kind. The phase projection is
    /// `(A P)^T diag(metric) (A P)`.
    pub fn metric_weights(&self) -> &DVector<f64> {
        match self {
            Preconditioner::Dense(dp) => &dp.metric,
            Preconditioner::Factored(fp) => &fp.metric,
            Preconditioner::Sketched(sp) => &sp.metric,
        }
    }

    /// Sampled diagonal of the sketched kind, empty otherwise.
    pub fn sketch_weights(&self) -> &[(usize, f64)] {
        match self {
            Preconditioner::Sketched(sp) => &sp.support,
            _ => &[],
        }
    }
}
