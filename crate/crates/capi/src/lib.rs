//! C ABI for the lpreg solver.
//!
//! All functions return an [`LpregStatus`] code; out-parameters receive
//! owned handles that must be released with the matching `_free` function.
//! A human-readable message for the most recent failure on the calling
//! thread is available from [`lpreg_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lpreg::error::Error;
use lpreg::homotopy::{self, HomotopyConfig, SolverKind};
use lpreg::matrix::{CsrMatrix, Matrix};
use lpreg::LpProblem;

/// Status code of every C-ABI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    DimensionMismatch = 5,
    PreconditionFailed = 6,
    SolverFailure = 7,
    IoError = 8,
    Panic = 9,
}

/// Inner solver selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpregSolver {
    AgdDense = 0,
    AgdSparse = 1,
    Katyusha = 2,
}

/// Solve configuration; obtain defaults from [`lpreg_solve_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LpregSolveOptions {
    /// Target additive objective accuracy (must be positive).
    pub epsilon: f64,
    pub solver: LpregSolver,
    /// Inner solves run to relative gap n^(-inner_tolerance_exponent).
    pub inner_tolerance_exponent: u32,
    pub max_phases: u64,
    pub seed: u64,
}

/// Opaque regression instance.
pub struct LpregProblem {
    inner: LpProblem,
}

/// Opaque solve result: solution vector plus the JSON report.
pub struct LpregSolution {
    x: Vec<f64>,
    objective: f64,
    phases: u64,
    report_json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> LpregStatus {
    match err {
        Error::Parse { .. } => LpregStatus::ParseError,
        Error::Dimension { .. } => LpregStatus::DimensionMismatch,
        Error::Parameter(_) => LpregStatus::InvalidArgument,
        Error::Precondition(_) => LpregStatus::PreconditionFailed,
        Error::NonConvergence { .. } | Error::MaxPhases { .. } => LpregStatus::SolverFailure,
        Error::Io { .. } => LpregStatus::IoError,
    }
}

fn fail(err: &Error) -> LpregStatus {
    remember_error(&err.to_string());
    status_for(err)
}

fn guarded<F: FnOnce() -> LpregStatus>(body: F) -> LpregStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            remember_error("internal panic");
            LpregStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for the call.
unsafe fn path_arg<'a>(s: *const c_char) -> Result<&'a Path, LpregStatus> {
    if s.is_null() {
        remember_error("null path argument");
        return Err(LpregStatus::NullPointer);
    }
    match CStr::from_ptr(s).to_str() {
        Ok(utf8) => Ok(Path::new(utf8)),
        Err(_) => {
            remember_error("path argument is not valid UTF-8");
            Err(LpregStatus::InvalidUtf8)
        }
    }
}

fn emit_problem(out: *mut *mut LpregProblem, problem: LpProblem) -> LpregStatus {
    if out.is_null() {
        remember_error("null output handle");
        return LpregStatus::NullPointer;
    }
    let handle = Box::new(LpregProblem { inner: problem });
    unsafe { *out = Box::into_raw(handle) };
    LpregStatus::Ok
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lpreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads an instance from a Matrix Market file and two plain-text vector
/// files (one value per line).
///
/// # Safety
/// Path arguments must be NUL-terminated strings; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_load(
    matrix_path: *const c_char,
    b_path: *const c_char,
    c_path: *const c_char,
    p: f64,
    out: *mut *mut LpregProblem,
) -> LpregStatus {
    guarded(|| {
        let matrix = match path_arg(matrix_path) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let b = match path_arg(b_path) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let c = match path_arg(c_path) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match LpProblem::load(matrix, b, c, p) {
            Ok(problem) => emit_problem(out, problem),
            Err(e) => fail(&e),
        }
    })
}

/// Generates a seeded random instance (entries of `A` standard normal kept
/// with probability `density`; `c` projected into the row space).
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_generate(
    n: u64,
    d: u64,
    p: f64,
    density: f64,
    seed: u64,
    out: *mut *mut LpregProblem,
) -> LpregStatus {
    guarded(|| match LpProblem::generate_random(n as usize, d as usize, p, density, seed) {
        Ok(problem) => emit_problem(out, problem),
        Err(e) => fail(&e),
    })
}

/// Builds an instance from caller-owned buffers: `a` is `n x d` row-major,
/// `b` has length `n`, `c` has length `d`. Entries equal to zero are kept
/// sparse when their share is below the storage threshold.
///
/// # Safety
/// `a`, `b`, `c` must point to buffers of the stated lengths; `out` must be
/// a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_from_dense(
    n: u64,
    d: u64,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    p: f64,
    out: *mut *mut LpregProblem,
) -> LpregStatus {
    guarded(|| {
        if a.is_null() || b.is_null() || c.is_null() {
            remember_error("null data pointer");
            return LpregStatus::NullPointer;
        }
        let (n, d) = (n as usize, d as usize);
        let a_slice = std::slice::from_raw_parts(a, n * d);
        let b_vec = nalgebra::DVector::from_column_slice(std::slice::from_raw_parts(b, n));
        let c_vec = nalgebra::DVector::from_column_slice(std::slice::from_raw_parts(c, d));
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..d {
                let v = a_slice[i * d + j];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        let density = entries.len() as f64 / (n.max(1) * d.max(1)) as f64;
        let matrix = if density < lpreg::problem::SPARSE_DENSITY_THRESHOLD {
            Matrix::Sparse(CsrMatrix::from_triplets(n, d, entries))
        } else {
            Matrix::Dense(nalgebra::DMatrix::from_row_slice(n, d, a_slice))
        };
        match LpProblem::new(matrix, b_vec, c_vec, p) {
            Ok(problem) => emit_problem(out, problem),
            Err(e) => fail(&e),
        }
    })
}

/// Row count, or -1 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_rows(problem: *const LpregProblem) -> i64 {
    problem.as_ref().map_or(-1, |p| p.inner.n() as i64)
}

/// Column count, or -1 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_cols(problem: *const LpregProblem) -> i64 {
    problem.as_ref().map_or(-1, |p| p.inner.d() as i64)
}

/// Stored nonzeros, or -1 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_nnz(problem: *const LpregProblem) -> i64 {
    problem.as_ref().map_or(-1, |p| p.inner.nnz() as i64)
}

/// Evaluates `c.x + ||Ax - b||_p^p` at a caller-supplied point.
///
/// # Safety
/// `x` must point to `len` doubles; `value` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_objective(
    problem: *const LpregProblem,
    x: *const f64,
    len: u64,
    value: *mut f64,
) -> LpregStatus {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            remember_error("null problem handle");
            return LpregStatus::NullPointer;
        };
        if x.is_null() || value.is_null() {
            remember_error("null data pointer");
            return LpregStatus::NullPointer;
        }
        if len as usize != problem.inner.d() {
            return fail(&Error::Dimension {
                object: "x",
                expected: problem.inner.d(),
                found: len as usize,
            });
        }
        let point =
            nalgebra::DVector::from_column_slice(std::slice::from_raw_parts(x, len as usize));
        *value = problem.inner.objective(&point);
        LpregStatus::Ok
    })
}

/// Releases a problem handle. Null is ignored.
///
/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lpreg_problem_free(problem: *mut LpregProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Default solve options: `agd-dense`, inner exponent 6, phase cap 10000.
#[no_mangle]
pub extern "C" fn lpreg_solve_options_default() -> LpregSolveOptions {
    LpregSolveOptions {
        epsilon: 1e-6,
        solver: LpregSolver::AgdDense,
        inner_tolerance_exponent: 6,
        max_phases: 10_000,
        seed: 0,
    }
}

/// Runs the homotopy solver. On success the out-parameter receives an owned
/// solution handle.
///
/// # Safety
/// `problem` must be a live handle; `options` null (defaults) or valid;
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solve(
    problem: *const LpregProblem,
    options: *const LpregSolveOptions,
    out: *mut *mut LpregSolution,
) -> LpregStatus {
    guarded(|| {
        let Some(problem) = problem.as_ref() else {
            remember_error("null problem handle");
            return LpregStatus::NullPointer;
        };
        if out.is_null() {
            remember_error("null output handle");
            return LpregStatus::NullPointer;
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| lpreg_solve_options_default());
        let mut config = HomotopyConfig::new(opts.epsilon);
        config.solver_kind = match opts.solver {
            LpregSolver::AgdDense => SolverKind::AgdDense,
            LpregSolver::AgdSparse => SolverKind::AgdSparse,
            LpregSolver::Katyusha => SolverKind::Katyusha,
        };
        config.inner_tolerance_exponent = opts.inner_tolerance_exponent;
        config.max_phases = opts.max_phases as usize;
        config.seed = opts.seed;
        match homotopy::run(&problem.inner, &config) {
            Ok(report) => {
                let x = match &report.final_x {
                    lpreg::FinalX::Inline(v) => v.clone(),
                    lpreg::FinalX::Path(_) => Vec::new(),
                };
                let objective =
                    problem.inner.objective(&nalgebra::DVector::from_column_slice(&x));
                let phases = report.phases.len() as u64;
                let json = serde_json::to_string(&report).unwrap_or_default();
                let solution = Box::new(LpregSolution {
                    x,
                    objective,
                    phases,
                    report_json: CString::new(json).unwrap_or_default(),
                });
                *out = Box::into_raw(solution);
                LpregStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Solution dimension, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_dim(solution: *const LpregSolution) -> u64 {
    solution.as_ref().map_or(0, |s| s.x.len() as u64)
}

/// Borrowed pointer to the solution vector; valid until the handle is freed.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_x(solution: *const LpregSolution) -> *const f64 {
    solution.as_ref().map_or(std::ptr::null(), |s| s.x.as_ptr())
}

/// Objective value at the returned solution (NaN for a null handle).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_objective(solution: *const LpregSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.objective)
}

/// Number of homotopy phases in the run, or 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_phase_count(solution: *const LpregSolution) -> u64 {
    solution.as_ref().map_or(0, |s| s.phases)
}

/// Borrowed NUL-terminated JSON report; valid until the handle is freed.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_report_json(
    solution: *const LpregSolution,
) -> *const c_char {
    solution.as_ref().map_or(std::ptr::null(), |s| s.report_json.as_ptr())
}

/// Releases a solution handle. Null is ignored.
///
/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lpreg_solution_free(solution: *mut LpregSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_solve_roundtrip_through_the_c_surface() {
        unsafe {
            let mut problem: *mut LpregProblem = std::ptr::null_mut();
            let status = lpreg_problem_generate(40, 3, 3.0, 1.0, 11, &mut problem);
            assert_eq!(status, LpregStatus::Ok);
            assert_eq!(lpreg_problem_rows(problem), 40);
            assert_eq!(lpreg_problem_cols(problem), 3);
            assert_eq!(lpreg_problem_nnz(problem), 120);

            let opts = lpreg_solve_options_default();
            let mut solution: *mut LpregSolution = std::ptr::null_mut();
            let status = lpreg_solve(problem, &opts, &mut solution);
            assert_eq!(status, LpregStatus::Ok);
            assert_eq!(lpreg_solution_dim(solution), 3);

            let x = lpreg_solution_x(solution);
            let mut value = f64::NAN;
            let status = lpreg_problem_objective(problem, x, 3, &mut value);
            assert_eq!(status, LpregStatus::Ok);
            assert!((value - lpreg_solution_objective(solution)).abs() <= 1e-12 * (1.0 + value.abs()));

            let json = CStr::from_ptr(lpreg_solution_report_json(solution));
            let parsed: serde_json::Value = serde_json::from_str(json.to_str().unwrap()).unwrap();
            assert!(parsed.get("phases").is_some());

            lpreg_solution_free(solution);
            lpreg_problem_free(problem);
        }
    }

    #[test]
    fn invalid_exponent_reports_invalid_argument() {
        unsafe {
            let mut problem: *mut LpregProblem = std::ptr::null_mut();
            let status = lpreg_problem_generate(10, 2, 1.0, 1.0, 0, &mut problem);
            assert_eq!(status, LpregStatus::InvalidArgument);
            let msg = CStr::from_ptr(lpreg_last_error_message());
            assert!(msg.to_str().unwrap().contains("p > 1"));
        }
    }

    #[test]
    fn null_handles_are_rejected() {
        unsafe {
            assert_eq!(lpreg_problem_rows(std::ptr::null()), -1);
            let mut value = 0.0;
            let status =
                lpreg_problem_objective(std::ptr::null(), std::ptr::null(), 0, &mut value);
            assert_eq!(status, LpregStatus::NullPointer);
            assert!(lpreg_solution_x(std::ptr::null()).is_null());
            lpreg_problem_free(std::ptr::null_mut());
            lpreg_solution_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn dense_buffer_construction_matches_objective() {
        unsafe {
            // 2x1 instance: A = [1; 1], b = (1, 1), c = 0
            let a = [1.0, 1.0];
            let b = [1.0, 1.0];
            let c = [0.0];
            let mut problem: *mut LpregProblem = std::ptr::null_mut();
            let status =
                lpreg_problem_from_dense(2, 1, a.as_ptr(), b.as_ptr(), c.as_ptr(), 3.0, &mut problem);
            assert_eq!(status, LpregStatus::Ok);
            let x = [0.0];
            let mut value = 0.0;
            lpreg_problem_objective(problem, x.as_ptr(), 1, &mut value);
            assert!((value - 2.0).abs() < 1e-15);
            lpreg_problem_free(problem);
        }
    }
}
