//! The regression instance: `min_x c.x + ||Ax - b||_p^p`.
//!
//! Construction validates dimensions and the exponent, and replaces `c` by
//! its row-space projection (the problem is unbounded below otherwise).

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SymEig;
use crate::matrix::{self, CsrMatrix, Matrix};

/// Stored-entry density below which a loaded coordinate matrix stays sparse.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.25;

/// Relative residual above which the constructor logs that `c` was moved
/// into the row space.
const PROJECTION_WARN_TOL: f64 = 1e-8;

/// An lp regression instance. Immutable after construction.
#[derive(Debug)]
pub struct LpProblem {
    a: Matrix,
    b: DVector<f64>,
    c: DVector<f64>,
    p: f64,
    nnz: usize,
    gram_eig: OnceLock<SymEig>,
}

impl LpProblem {
    /// Validates and assembles an instance. `c` is replaced by its
    /// orthogonal projection onto the row space of `A`.
    pub fn new(a: Matrix, b: DVector<f64>, c: DVector<f64>, p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::Parameter(format!("p must satisfy p > 1 and be finite, got {p}")));
        }
        let (n, d) = (a.nrows(), a.ncols());
        if n == 0 || d == 0 {
            return Err(Error::Parameter(format!("matrix must be nonempty, got {n} x {d}")));
        }
        if b.len() != n {
            return Err(Error::Dimension { object: "b", expected: n, found: b.len() });
        }
        if c.len() != d {
            return Err(Error::Dimension { object: "c", expected: d, found: c.len() });
        }
        let nnz = a.nnz();
        let problem = LpProblem { a, b, c, p, nnz, gram_eig: OnceLock::new() };
        let projected = problem.project_rowspace(&problem.c);
        let drift = (&projected - &problem.c).norm();
        if drift > PROJECTION_WARN_TOL * problem.c.norm() {
            log::warn!(
                "c is outside the row space of A (residual {:.3e}); replaced by its projection",
                drift
            );
        }
        Ok(LpProblem { c: projected, ..problem })
    }

    /// Loads an instance from a Matrix Market file and two plain-text
    /// vector files.
    pub fn load(matrix_path: &Path, b_path: &Path, c_path: &Path, p: f64) -> Result<Self> {
        let a = matrix::read_matrix_market(matrix_path)?;
        let b = matrix::read_vector(b_path)?;
        let c = matrix::read_vector(c_path)?;
        Self::new(a, b, c, p)
    }

    /// Generates a random overdetermined instance, deterministic in `seed`.
    ///
    /// Entries of `A` are standard normal, each kept with probability
    /// `density` (stored sparse when `density < 1`); `b` is standard normal;
    /// `c = A^T w / ||A^T w||` for a standard normal `w`, which places it in
    /// the row space by construction.
    pub fn generate_random(n: usize, d: usize, p: f64, density: f64, seed: u64) -> Result<Self> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(Error::Parameter(format!("density must lie in (0, 1], got {density}")));
        }
        if n < d {
            return Err(Error::Parameter(format!(
                "generator targets overdetermined instances, need n >= d (got n={n}, d={d})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let a = if density < 1.0 {
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..d {
                    if rng.random::<f64>() < density {
                        entries.push((i, j, normal.sample(&mut rng)));
                    }
                }
            }
            Matrix::Sparse(CsrMatrix::from_triplets(n, d, entries))
        } else {
            // row-major fill so the stream order matches the sparse path
            let mut dense = DMatrix::zeros(n, d);
            for i in 0..n {
                for j in 0..d {
                    dense[(i, j)] = normal.sample(&mut rng);
                }
            }
            Matrix::Dense(dense)
        };
        let b = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
        let w = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
        let mut c = a.tr_matvec(&w);
        let norm = c.norm();
        if norm > 1e-300 {
            c /= norm;
        } else {
            c.fill(0.0);
        }
        Self::new(a, b, c, p)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Residual `Ax - b`.
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.matvec(x) - &self.b
    }

    /// `c.x + sum_i |(Ax - b)_i|^p`, summed in ascending row order.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let s = self.residual(x);
        let mut acc = self.c.dot(x);
        for i in 0..s.len() {
            acc += s[i].abs().powf(self.p);
        }
        acc
    }

    /// Eigendecomposition of `A^T A`, computed once and cached.
    pub fn gram_eig(&self) -> &SymEig {
        self.gram_eig.get_or_init(|| SymEig::new(&self.a.gram()))
    }

    /// Orthogonal projection onto the row space of `A` using the cached Gram
    /// decomposition.
    pub fn project_rowspace(&self, v: &DVector<f64>) -> DVector<f64> {
        self.gram_eig().project_range(v)
    }
}

/// Orthogonal projection of `v` onto the row space of `a`. Stand-alone
/// variant that decomposes `A^T A` on each call; prefer
/// [`LpProblem::project_rowspace`] when a problem object is available.
pub fn project_to_rowspace(a: &Matrix, v: &DVector<f64>) -> DVector<f64> {
    SymEig::new(&a.gram()).project_range(v)
}
