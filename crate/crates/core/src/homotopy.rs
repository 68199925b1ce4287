//! The outer continuation loop.
//!
//! The smoothing radius follows the schedule `t_k = (1 - h)^k t_0` with
//! `h = 1/(2p)`. Each phase freezes a neighborhood of the current residual,
//! builds the diagonal metric and a preconditioner for it, and inner-solves
//! the preconditioned extended loss from a warm start. Termination is the
//! radius at which the smoothed and true objectives agree to the target
//! accuracy.

use std::time::Instant;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymEig;
use crate::problem::LpProblem;
use crate::smoothing::{self, SmoothedLoss};
use crate::solvers::{self, KatyushaOptions, PreconditionedObjective, Preconditioner};

/// Safety factor applied to the closed-form start's hypotheses before a
/// phase run begins; the computed radius is doubled until they hold.
const START_SAFETY: f64 = 1.01;
const MAX_T0_DOUBLINGS: u32 = 64;

/// Which inner solver drives each phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "agd-dense")]
    AgdDense,
    #[serde(rename = "agd-sparse")]
    AgdSparse,
    #[serde(rename = "katyusha")]
    Katyusha,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverKind::AgdDense => "agd-dense",
            SolverKind::AgdSparse => "agd-sparse",
            SolverKind::Katyusha => "katyusha",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agd-dense" => Ok(SolverKind::AgdDense),
            "agd-sparse" => Ok(SolverKind::AgdSparse),
            "katyusha" => Ok(SolverKind::Katyusha),
            other => Err(Error::Parameter(format!(
                "unknown solver '{other}' (expected agd-dense, agd-sparse or katyusha)"
            ))),
        }
    }
}

/// Outer-loop configuration.
#[derive(Clone, Debug)]
pub struct HomotopyConfig {
    /// Target additive error on the objective.
    pub epsilon: f64,
    pub solver_kind: SolverKind,
    /// Inner solves run to relative gap `n^{-inner_tolerance_exponent}`.
    pub inner_tolerance_exponent: u32,
    /// Safety cap on the number of phases.
    pub max_phases: usize,
    pub seed: u64,
}

impl HomotopyConfig {
    pub fn new(epsilon: f64) -> Self {
        HomotopyConfig {
            epsilon,
            solver_kind: SolverKind::AgdDense,
            inner_tolerance_exponent: 6,
            max_phases: 10_000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_phases == 0 {
            return Err(Error::Parameter("max_phases must be at least 1".into()));
        }
        if self.inner_tolerance_exponent == 0 {
            return Err(Error::Parameter("inner tolerance exponent must be positive".into()));
        }
        Ok(())
    }
}

/// Snapshot of the continuation at a phase boundary.
#[derive(Clone, Debug)]
pub struct HomotopyState {
    pub k: usize,
    pub t: f64,
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub gamma: f64,
    pub d: DVector<f64>,
    pub kappa: f64,
}

/// Problem echo carried in reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemSummary {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub nnz: usize,
}

/// One phase of a solve.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PhaseRecord {
    pub k: usize,
    pub t_k: f64,
    pub inner_iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
    pub wall_ms: f64,
}

/// Where the final iterate lives in a report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum FinalX {
    Inline(Vec<f64>),
    Path(String),
}

/// Full machine-readable solve record.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub problem: ProblemSummary,
    pub t0: f64,
    pub phases: Vec<PhaseRecord>,
    pub solver_kind: SolverKind,
    pub final_x: FinalX,
    pub total_wall_ms: f64,
    pub seed: u64,
}

impl SolveReport {
    pub fn final_x_vector(&self) -> Option<DVector<f64>> {
        match &self.final_x {
            FinalX::Inline(v) => Some(DVector::from_vec(v.clone())),
            FinalX::Path(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Formula operations
// ---------------------------------------------------------------------------

/// The continuation step `h = 1/(2p)`.
pub fn phase_step(p: f64) -> f64 {
    1.0 / (2.0 * p)
}

/// Initial smoothing radius `max((2 c^T (A^T A)^+ c)^{1/(p-1)}, 2 ||b||_2)`,
/// with the degenerate all-zero case mapped to 1.
pub fn initial_t0(problem: &LpProblem) -> f64 {
    let q = problem.gram_eig().pinv_quad_form(problem.c());
    let p = problem.p();
    let from_c = (2.0 * q).powf(1.0 / (p - 1.0));
    let from_b = 2.0 * problem.b().norm();
    let t0 = from_c.max(from_b);
    if t0 > 0.0 {
        t0
    } else {
        1.0 // b = 0 and c = 0: the minimizer is the origin, any radius works
    }
}

fn closed_form_hypotheses(problem: &LpProblem, t: f64, safety: f64) -> bool {
    let q = problem.gram_eig().pinv_quad_form(problem.c());
    let p = problem.p();
    t.powf(p - 1.0) > safety * (2.0 / p) * q && t > safety * 2.0 * problem.b().norm()
}

/// The radius a run actually starts from: the closed-form value, doubled
/// until the start hypotheses hold with a safety factor.
pub fn starting_radius(problem: &LpProblem) -> Result<f64> {
    let mut t0 = initial_t0(problem);
    let mut doublings = 0;
    while !closed_form_hypotheses(problem, t0, START_SAFETY) {
        t0 *= 2.0;
        doublings += 1;
        if doublings > MAX_T0_DOUBLINGS {
            return Err(Error::Precondition(
                "could not reach a radius satisfying the closed-form start after 64 doublings".into(),
            ));
        }
    }
    Ok(t0)
}

/// Closed-form point on the path for a large enough radius:
/// `x(t) = (A^T A)^+ A^T b - (1/p) t^{2-p} (A^T A)^+ c`.
///
/// Refuses radii that violate the hypotheses `t^{p-1} > (2/p) c^T (A^T A)^+ c`
/// and `t > 2 ||b||_2`.
pub fn initial_point(problem: &LpProblem, t: f64) -> Result<DVector<f64>> {
    if !closed_form_hypotheses(problem, t, 1.0) {
        return Err(Error::Precondition(format!(
            "radius {t} too small for the closed-form start; enlarge t"
        )));
    }
    let p = problem.p();
    let eig = problem.gram_eig();
    let gram = problem.matrix().gram();
    // one round of iterative refinement keeps the normal-equation residual
    // near machine precision; stationarity of the start amplifies it by
    // p t^{p-2}
    let refined_pinv = |rhs: &DVector<f64>| {
        let mut sol = eig.pinv_apply(rhs);
        let residual = rhs - &gram * &sol;
        sol += eig.pinv_apply(&residual);
        sol
    };
    let atb = problem.matrix().tr_matvec(problem.b());
    let mut x = refined_pinv(&atb);
    let gc = refined_pinv(problem.c());
    x.axpy(-t.powf(2.0 - p) / p, &gc, 1.0);
    Ok(x)
}

/// Neighborhood width `gamma = (1 + p^3/(p-1) sqrt(n) h) t^{p/2}`.
pub fn gamma(t: f64, p: f64, h: f64, n: usize) -> Result<f64> {
    let h_max = phase_step(p) * (1.0 + 1e-12);
    if !(0.0..=1.0).contains(&h) || h > h_max {
        return Err(Error::Parameter(format!("h must lie in [0, 1/(2p)] = [0, {}], got {h}", phase_step(p))));
    }
    Ok((1.0 + p.powi(3) / (p - 1.0) * (n as f64).sqrt() * h) * t.powf(0.5 * p))
}

/// Condition bound `kappa = (2p^2/(p-1)) (3 + (2p^3/(p-1)) sqrt(n) h)^{|2-4/p|}`.
pub fn kappa(p: f64, h: f64, n: usize) -> f64 {
    debug_assert!((0.0..=phase_step(p) * (1.0 + 1e-12)).contains(&h));
    let lead = 2.0 * p * p / (p - 1.0);
    let inner = 3.0 + 2.0 * p.powi(3) / (p - 1.0) * (n as f64).sqrt() * h;
    lead * inner.powf((2.0 - 4.0 / p).abs())
}

/// Diagonal metric of the phase: entry `i` is
/// `(p-1)/2 * max(t^{p/2}, |s_i|^{p/2} - sign(p-2) gamma)^{2-4/p}`.
pub fn diag_dt(s: &DVector<f64>, t: f64, p: f64, gamma: f64) -> DVector<f64> {
    debug_assert!(t > 0.0 && gamma >= 0.0);
    let xi = (p - 2.0).signum();
    let xi = if p == 2.0 { 0.0 } else { xi };
    let expo = 2.0 - 4.0 / p;
    let t_pow = t.powf(0.5 * p);
    DVector::from_fn(s.len(), |i, _| {
        let m = s[i].abs().powf(0.5 * p);
        0.5 * (p - 1.0) * t_pow.max(m - xi * gamma).powf(expo)
    })
}

/// Whether every coordinate of `s_new` stays within `gamma` of `s_ref` in
/// the `|.|^{p/2}` scale.
pub fn in_neighborhood(s_new: &DVector<f64>, s_ref: &DVector<f64>, gamma: f64, p: f64) -> Result<bool> {
    if s_new.len() != s_ref.len() {
        return Err(Error::Dimension {
            object: "residual vectors",
            expected: s_ref.len(),
            found: s_new.len(),
        });
    }
    let half_p = 0.5 * p;
    Ok(s_new
        .iter()
        .zip(s_ref.iter())
        .all(|(&a, &b)| (a.abs().powf(half_p) - b.abs().powf(half_p)).abs() <= gamma))
}

/// Radius below which the smoothed minimizer meets the target accuracy:
/// `(epsilon / (n p))^{1/p}`.
pub fn termination_t(epsilon: f64, n: usize, p: f64) -> f64 {
    (epsilon / (n as f64 * p)).powf(1.0 / p)
}

/// Norm of the stationarity residual `c + A^T f_t'(Ax - b)` projected onto
/// the row space of `A`.
pub fn kkt_residual(problem: &LpProblem, t: f64, x: &DVector<f64>) -> f64 {
    let s = problem.residual(x);
    let deriv = DVector::from_fn(s.len(), |i, _| smoothing::eval(t, problem.p(), s[i]).first);
    let r = problem.c() + problem.matrix().tr_matvec(&deriv);
    problem.project_rowspace(&r).norm()
}

/// Path velocity `dx/dt = -(A^T H_t A)^+ A^T (d/dt f_t')(s)` with `H_t` the
/// diagonal of `f_t''` at the current residual. Diagnostic only; meaningful
/// when `x` is close enough to the path that the KKT residual is small.
pub fn path_velocity(problem: &LpProblem, t: f64, x: &DVector<f64>) -> DVector<f64> {
    let s = problem.residual(x);
    let p = problem.p();
    let mut hess = DVector::zeros(s.len());
    let mut dt_first = DVector::zeros(s.len());
    for i in 0..s.len() {
        let e = smoothing::eval(t, p, s[i]);
        hess[i] = e.second;
        dt_first[i] = e.dt_of_first;
    }
    let m = problem.matrix().gram_weighted(&hess);
    let rhs = problem.matrix().tr_matvec(&dt_first);
    -SymEig::new(&m).pinv_apply(&rhs)
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Result of advancing the continuation by one phase.
#[derive(Clone, Debug)]
pub struct PhaseOutcome {
    pub record: PhaseRecord,
    /// Neighborhood width of the completed phase.
    pub gamma: f64,
    /// Residual at the phase start.
    pub s_before: DVector<f64>,
    /// Residual at the new point.
    pub s_after: DVector<f64>,
    /// Whether the new residual stayed inside the phase neighborhood.
    pub contained: bool,
}

/// Owns the continuation state and advances it one phase at a time.
pub struct HomotopyDriver<'a> {
    problem: &'a LpProblem,
    config: HomotopyConfig,
    h: f64,
    t0: f64,
    t: f64,
    t_stop: f64,
    k: usize,
    x: DVector<f64>,
    s: DVector<f64>,
    inner_ratio: f64,
    rng: ChaCha8Rng,
    phases: Vec<PhaseRecord>,
    /// Per-phase row-access audit of the stochastic solver: `Some(true)`
    /// while every phase touched exactly `batch` rows per step.
    stochastic_rows_ok: Option<bool>,
    started: Instant,
}

impl<'a> HomotopyDriver<'a> {
    /// Computes the starting radius (doubling until the closed-form start's
    /// hypotheses hold with a safety factor) and the initial point.
    pub fn new(problem: &'a LpProblem, config: HomotopyConfig) -> Result<Self> {
        config.validate()?;
        let p = problem.p();
        let h = phase_step(p);
        let t0 = starting_radius(problem)?;
        let x = initial_point(problem, t0)?;
        let s = problem.residual(&x);
        // Relative inner accuracy n^{-e}; n = 1 would make this 1, so the
        // base is floored at 2 to keep the ratio inside (0, 1/2).
        let n_base = (problem.n().max(2)) as f64;
        let inner_ratio = n_base.powi(-(config.inner_tolerance_exponent as i32));
        let t_stop = termination_t(config.epsilon, problem.n(), p);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(HomotopyDriver {
            problem,
            config,
            h,
            t0,
            t: t0,
            t_stop,
            k: 0,
            x,
            s,
            inner_ratio,
            rng,
            phases: Vec::new(),
            stochastic_rows_ok: None,
            started: Instant::now(),
        })
    }

    pub fn problem(&self) -> &LpProblem {
        self.problem
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn phase_count(&self) -> usize {
        self.k
    }

    /// The continuation stops once the radius reaches the termination value.
    pub fn finished(&self) -> bool {
        self.t <= self.t_stop
    }

    /// Current phase state, with the neighborhood quantities materialized.
    pub fn state(&self) -> HomotopyState {
        let p = self.problem.p();
        let g = gamma(self.t, p, self.h, self.problem.n()).expect("driver h is in range");
        HomotopyState {
            k: self.k,
            t: self.t,
            x: self.x.clone(),
            s: self.s.clone(),
            gamma: g,
            d: diag_dt(&self.s, self.t, p, g),
            kappa: kappa(p, self.h, self.problem.n()),
        }
    }

    /// Runs one phase: freeze the neighborhood at the current residual,
    /// inner-solve the preconditioned extended loss, and step the radius.
    pub fn step(&mut self) -> Result<PhaseOutcome> {
        let phase_started = Instant::now();
        let p = self.problem.p();
        let n = self.problem.n();
        let a = self.problem.matrix();
        let g = gamma(self.t, p, self.h, n)?;
        let d = diag_dt(&self.s, self.t, p, g);
        let intervals = smoothing::build_intervals(&self.s, g, p);
        let loss = SmoothedLoss::with_intervals(self.t, p, intervals)?;
        let kap = kappa(p, self.h, n);
        let phase = self.k;

        let (precond, inner_iterations, y) = match self.config.solver_kind {
            SolverKind::AgdDense => {
                let precond = Preconditioner::dense(a, &d);
                let obj = PreconditionedObjective::new(self.problem, &loss, self.h, &precond);
                let y0 = precond.preimage(&self.x);
                let (y, iters) = solvers::agd_minimize(&obj, y0, kap, self.inner_ratio)
                    .map_err(|e| attach_phase(e, phase))?;
                (precond, iters, y)
            }
            SolverKind::AgdSparse => {
                let precond = Preconditioner::factored(a, &d);
                let obj = PreconditionedObjective::new(self.problem, &loss, self.h, &precond);
                let y0 = precond.preimage(&self.x);
                let (y, iters) = solvers::agd_minimize(&obj, y0, kap, self.inner_ratio)
                    .map_err(|e| attach_phase(e, phase))?;
                (precond, iters, y)
            }
            SolverKind::Katyusha => {
                let sketch = solvers::sparsify_accepted(a, &d, self.rng.next_u64());
                let precond = Preconditioner::sketched(a, sketch.weights);
                let obj = PreconditionedObjective::new(self.problem, &loss, self.h, &precond);
                let y0 = precond.preimage(&self.x);
                let (l, sigma, li) = solvers::smoothness_constants(a, &d, precond.sketch_weights(), kap);
                let batch = solvers::batch_size(n, self.problem.d(), self.problem.nnz(), kap);
                let opts = KatyushaOptions {
                    batch,
                    sigma,
                    l_total: l,
                    l_each: li,
                    target_gap_ratio: self.inner_ratio,
                    seed: self.rng.next_u64(),
                };
                let (y, stats) = solvers::katyusha_minimize(&obj, y0, &opts)
                    .map_err(|e| attach_phase(e, phase))?;
                let consistent = stats.rows_touched == stats.steps as u64 * stats.batch as u64;
                self.stochastic_rows_ok = Some(self.stochastic_rows_ok.unwrap_or(true) && consistent);
                (precond, stats.steps, y)
            }
        };

        let x_new = self.problem.project_rowspace(&precond.apply(&y));
        let s_new = self.problem.residual(&x_new);
        let contained = in_neighborhood(&s_new, &self.s, g, p)?;
        let t_next = self.t * (1.0 - self.h);
        let record = PhaseRecord {
            k: self.k,
            t_k: self.t,
            inner_iterations,
            objective: self.problem.objective(&x_new),
            kkt_residual: kkt_residual(self.problem, t_next, &x_new),
            wall_ms: phase_started.elapsed().as_secs_f64() * 1e3,
        };
        self.phases.push(record.clone());
        let s_before = std::mem::replace(&mut self.s, s_new.clone());
        self.x = x_new;
        self.t = t_next;
        self.k += 1;
        Ok(PhaseOutcome { record, gamma: g, s_before, s_after: s_new, contained })
    }

    pub fn current_x(&self) -> &DVector<f64> {
        &self.x
    }

    /// `Some(true)` when every stochastic phase so far touched exactly
    /// `batch` rows per step; `None` for the deterministic solvers.
    pub fn stochastic_rows_ok(&self) -> Option<bool> {
        self.stochastic_rows_ok
    }

    /// Builds the report for the phases completed so far.
    pub fn report(&self) -> SolveReport {
        SolveReport {
            problem: ProblemSummary {
                n: self.problem.n(),
                d: self.problem.d(),
                p: self.problem.p(),
                nnz: self.problem.nnz(),
            },
            t0: self.t0,
            phases: self.phases.clone(),
            solver_kind: self.config.solver_kind,
            final_x: FinalX::Inline(self.x.iter().cloned().collect()),
            total_wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            seed: self.config.seed,
        }
    }
}

fn attach_phase(e: Error, phase: usize) -> Error {
    match e {
        Error::NonConvergence { msg, .. } => Error::NonConvergence { phase: Some(phase), msg },
        other => other,
    }
}

/// Runs the continuation to termination and returns the report.
pub fn run(problem: &LpProblem, config: &HomotopyConfig) -> Result<SolveReport> {
    let mut driver = HomotopyDriver::new(problem, config.clone())?;
    while !driver.finished() {
        if driver.phase_count() >= config.max_phases {
            return Err(Error::MaxPhases {
                max_phases: config.max_phases,
                report: Box::new(driver.report()),
            });
        }
        driver.step()?;
    }
    Ok(driver.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use nalgebra::DMatrix;

    fn one_dim(a: f64, b: f64, c: f64, p: f64) -> LpProblem {
        LpProblem::new(
            Matrix::Dense(DMatrix::from_element(1, 1, a)),
            DVector::from_vec(vec![b]),
            DVector::from_vec(vec![c]),
            p,
        )
        .unwrap()
    }

    #[test]
    fn t0_hand_values() {
        // c = 0, ||b|| = 3 -> 6
        let prob = LpProblem::new(
            Matrix::Dense(DMatrix::identity(2, 2)),
            DVector::from_vec(vec![3.0, 0.0]),
            DVector::zeros(2),
            4.0,
        )
        .unwrap();
        assert!((initial_t0(&prob) - 6.0).abs() < 1e-12);

        // A = I2, c = (1, 0), b = 0, p = 2 -> (2 c^T c)^1 = 2
        let prob = LpProblem::new(
            Matrix::Dense(DMatrix::identity(2, 2)),
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, 0.0]),
            2.0,
        )
        .unwrap();
        assert!((initial_t0(&prob) - 2.0).abs() < 1e-12);

        // degenerate: b = 0, c = 0 -> 1
        let prob = LpProblem::new(Matrix::Dense(DMatrix::identity(2, 2)), DVector::zeros(2), DVector::zeros(2), 3.0)
            .unwrap();
        assert_eq!(initial_t0(&prob), 1.0);
    }

    #[test]
    fn initial_point_cases() {
        // c = 0: least-squares solution
        let prob = LpProblem::new(
            Matrix::Dense(DMatrix::from_column_slice(2, 1, &[1.0, 1.0])),
            DVector::from_vec(vec![1.0, 3.0]),
            DVector::zeros(1),
            3.0,
        )
        .unwrap();
        let x = initial_point(&prob, 100.0).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);

        // A = I_d, b = 0, small c, p = 4, large t: x = -(1/4) t^{-2} c, KKT = 0
        let prob = LpProblem::new(
            Matrix::Dense(DMatrix::identity(3, 3)),
            DVector::zeros(3),
            DVector::from_vec(vec![1e-3, -2e-3, 5e-4]),
            4.0,
        )
        .unwrap();
        let t = 50.0;
        let x = initial_point(&prob, t).unwrap();
        for i in 0..3 {
            assert!((x[i] + 0.25 * t.powi(-2) * prob.c()[i]).abs() < 1e-15);
        }
        assert!(kkt_residual(&prob, t, &x) <= 1e-8 * (1.0 + prob.c().norm()));

        // below threshold: refuse
        assert!(initial_point(&prob, 1e-9).is_err());
    }

    #[test]
    fn gamma_hand_values() {
        assert!((gamma(1.0, 4.0, 0.125, 16).unwrap() - 35.0 / 3.0).abs() < 1e-12);
        assert!((gamma(2.5, 3.0, 0.0, 9).unwrap() - 2.5_f64.powf(1.5)).abs() < 1e-12);
        assert!((gamma(4.0, 2.0, 0.25, 1).unwrap() - 12.0).abs() < 1e-12);
        assert!(gamma(1.0, 4.0, 0.2, 4).is_err()); // h > 1/(2p)
    }

    #[test]
    fn kappa_hand_values() {
        assert!((kappa(4.0, 0.125, 16) - 2336.0 / 9.0).abs() < 1e-10);
        assert!((kappa(2.0, 0.1, 77) - 8.0).abs() < 1e-12);
        // independent re-derivation for p = 8, h = 1/16, n = 4
        let p: f64 = 8.0;
        let expect = (2.0 * p * p / (p - 1.0)) * (3.0 + 2.0 * p.powi(3) / (p - 1.0) * 2.0 / 16.0).powf(1.5);
        assert!((kappa(8.0, 1.0 / 16.0, 4) - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn diag_dt_hand_values() {
        let d = diag_dt(&DVector::from_vec(vec![2.0]), 1.0, 4.0, 35.0 / 3.0);
        assert!((d[0] - 1.5).abs() < 1e-12);

        let d = diag_dt(&DVector::from_vec(vec![9.0, -0.4, 0.0]), 0.7, 2.0, 3.0);
        for v in d.iter() {
            assert_eq!(*v, 0.5);
        }

        let d = diag_dt(&DVector::from_vec(vec![3.0]), 1.0, 4.0, 0.5);
        assert!((d[0] - 12.75).abs() < 1e-12);
    }

    #[test]
    fn neighborhood_hand_values() {
        let s = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        assert!(in_neighborhood(&s, &s, 0.0, 4.0).unwrap());

        let s_ref = DVector::from_vec(vec![1.0]);
        let s_new = DVector::from_vec(vec![2.0]);
        assert!(!in_neighborhood(&s_new, &s_ref, 2.9, 4.0).unwrap());
        assert!(in_neighborhood(&s_new, &s_ref, 3.0, 4.0).unwrap());

        assert!(in_neighborhood(&DVector::zeros(2), &DVector::zeros(3), 1.0, 4.0).is_err());
    }

    #[test]
    fn termination_hand_values() {
        assert!((termination_t(800.0, 100, 8.0) - 1.0).abs() < 1e-12); // eps = n p
        assert!((termination_t(1e-6, 100, 4.0) - 7.071067811865475e-3).abs() < 1e-15);
        // monotone: shrinks in n, grows in eps
        assert!(termination_t(1e-6, 200, 4.0) < termination_t(1e-6, 100, 4.0));
        assert!(termination_t(1e-5, 100, 4.0) > termination_t(1e-6, 100, 4.0));
    }

    #[test]
    fn kkt_zero_cases() {
        let prob = one_dim(1.0, 0.0, 0.0, 3.0);
        assert_eq!(kkt_residual(&prob, 1.0, &DVector::zeros(1)), 0.0);
    }

    #[test]
    fn kkt_grows_linearly_near_the_path() {
        let prob = LpProblem::generate_random(20, 3, 4.0, 1.0, 5).unwrap();
        let t = initial_t0(&prob) * 4.0;
        let x = initial_point(&prob, t).unwrap();
        let dir = DVector::from_fn(3, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0).normalize();
        let r1 = kkt_residual(&prob, t, &(&x + 1e-2 * &dir));
        let r2 = kkt_residual(&prob, t, &(&x + 1e-3 * &dir));
        let ratio = r1 / r2;
        assert!((5.0..20.0).contains(&ratio), "expected roughly linear growth, got ratio {ratio}");
    }

    #[test]
    fn path_velocity_support() {
        // p = 2: the mixed derivative vanishes identically
        let prob = one_dim(1.0, 1.0, 0.5, 2.0);
        let v = path_velocity(&prob, 0.3, &DVector::from_vec(vec![0.25]));
        assert_eq!(v[0], 0.0);

        // all residuals outside the quadratic region: velocity zero
        let prob = one_dim(1.0, 1.0, 0.1, 4.0);
        let v = path_velocity(&prob, 0.05, &DVector::from_vec(vec![0.5]));
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn schedule_ratio_is_exact() {
        let prob = LpProblem::generate_random(12, 2, 3.0, 1.0, 9).unwrap();
        let report = run(&prob, &HomotopyConfig::new(1e-3)).unwrap();
        let q = 1.0 - phase_step(3.0);
        for w in report.phases.windows(2) {
            let ratio = w[1].t_k / w[0].t_k;
            assert!((ratio - q).abs() <= 4.0 * f64::EPSILON * q);
        }
    }

    #[test]
    fn trivial_instance_solves_to_zero() {
        let prob = one_dim(1.0, 0.0, 0.0, 3.0);
        let report = run(&prob, &HomotopyConfig::new(1e-9)).unwrap();
        let x = report.final_x_vector().unwrap();
        assert!(x[0].abs() < 1e-9);
        assert!(prob.objective(&x) < 1e-9);
    }

    #[test]
    fn max_phases_error_carries_partial_report() {
        let prob = one_dim(1.0, 1.0, 1.0, 2.0);
        let mut config = HomotopyConfig::new(1e-10);
        config.max_phases = 2;
        match run(&prob, &config) {
            Err(Error::MaxPhases { max_phases, report }) => {
                assert_eq!(max_phases, 2);
                assert_eq!(report.phases.len(), 2);
            }
            other => panic!("expected MaxPhases, got {other:?}"),
        }
    }
}
