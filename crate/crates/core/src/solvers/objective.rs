//! The preconditioned phase objective
//! `g(y) = c . P y + tilde_f(A P y - b)` with its analytic gradient
//! `P^T c + P^T A^T grad(tilde_f)`.

use nalgebra::{DMatrix, DVector};

use crate::problem::LpProblem;
use crate::smoothing::SmoothedLoss;

use super::preconditioner::Preconditioner;

/// Anything the accelerated inner solver can minimize. The sandwich
/// hypothesis (Hessian between a projection `Q` and `kappa Q`) is the
/// caller's responsibility.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value_grad(&self, y: &DVector<f64>) -> (f64, DVector<f64>);
}

/// The per-phase extended loss composed with a preconditioner.
pub struct PreconditionedObjective<'a> {
    problem: &'a LpProblem,
    loss: &'a SmoothedLoss,
    h: f64,
    precond: &'a Preconditioner<'a>,
    /// `P^T c`, reused every gradient evaluation.
    pullback_c: DVector<f64>,
    /// `A P` cached for the dense kind: one `n x d` product per phase buys a
    /// plain gemv per iteration.
    ap: Option<DMatrix<f64>>,
}

impl<'a> PreconditionedObjective<'a> {
    pub fn new(
        problem: &'a LpProblem,
        loss: &'a SmoothedLoss,
        h: f64,
        precond: &'a Preconditioner<'a>,
    ) -> Self {
        let pullback_c = precond.pullback(problem.c());
        let ap = precond.dense_matrix().map(|p| problem.matrix().to_dense() * p);
        PreconditionedObjective { problem, loss, h, precond, pullback_c, ap }
    }

    pub fn problem(&self) -> &LpProblem {
        self.problem
    }

    pub fn loss(&self) -> &SmoothedLoss {
        self.loss
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn precond(&self) -> &Preconditioner<'a> {
        self.precond
    }

    /// `x = P y`.
    pub fn to_x(&self, y: &DVector<f64>) -> DVector<f64> {
        self.precond.apply(y)
    }

    /// Columns of `A P` materialized, for validators that assemble the
    /// Hessian explicitly. Cheap only at diagnostic scale.
    pub fn linearized_map(&self) -> DMatrix<f64> {
        if let Some(ap) = &self.ap {
            return ap.clone();
        }
        let n = self.problem.n();
        let ydim = self.precond.y_dim();
        let mut out = DMatrix::zeros(n, ydim);
        let mut e = DVector::zeros(ydim);
        for j in 0..ydim {
            e[j] = 1.0;
            let col = self.problem.matrix().matvec(&self.precond.apply(&e));
            out.set_column(j, &col);
            e[j] = 0.0;
        }
        out
    }
}

impl Objective for PreconditionedObjective<'_> {
    fn dim(&self) -> usize {
        self.precond.y_dim()
    }

    fn value_grad(&self, y: &DVector<f64>) -> (f64, DVector<f64>) {
        match &self.ap {
            Some(ap) => {
                let mut s = ap * y;
                s -= self.problem.b();
                let (tilde, grad_s, _) = self.loss.tilde_eval(self.h, &s).expect("phase intervals");
                let value = self.pullback_c.dot(y) + tilde;
                let mut grad = self.pullback_c.clone();
                grad.gemv_tr(1.0, ap, &grad_s, 1.0);
                (value, grad)
            }
            None => {
                let x = self.precond.apply(y);
                let s = self.problem.residual(&x);
                let (tilde, grad_s, _) = self.loss.tilde_eval(self.h, &s).expect("phase intervals");
                let value = self.problem.c().dot(&x) + tilde;
                let pulled = self.precond.pullback(&self.problem.matrix().tr_matvec(&grad_s));
                (value, &self.pullback_c + pulled)
            }
        }
    }
}
