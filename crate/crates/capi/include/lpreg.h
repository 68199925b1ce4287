/* C interface to the lpreg lp-norm regression solver. */

#ifndef LPREG_H
#define LPREG_H

/* Generated by cbindgen; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every C-ABI call.
 */
typedef enum LpregStatus {
  LPREG_STATUS_OK = 0,
  LPREG_STATUS_NULL_POINTER = 1,
  LPREG_STATUS_INVALID_UTF8 = 2,
  LPREG_STATUS_INVALID_ARGUMENT = 3,
  LPREG_STATUS_PARSE_ERROR = 4,
  LPREG_STATUS_DIMENSION_MISMATCH = 5,
  LPREG_STATUS_PRECONDITION_FAILED = 6,
  LPREG_STATUS_SOLVER_FAILURE = 7,
  LPREG_STATUS_IO_ERROR = 8,
  LPREG_STATUS_PANIC = 9,
} LpregStatus;

/**
 * Inner solver selector.
 */
typedef enum LpregSolver {
  LPREG_SOLVER_AGD_DENSE = 0,
  LPREG_SOLVER_AGD_SPARSE = 1,
  LPREG_SOLVER_KATYUSHA = 2,
} LpregSolver;

/**
 * Opaque regression instance.
 */
typedef struct LpregProblem LpregProblem;

/**
 * Opaque solve result: solution vector plus the JSON report.
 */
typedef struct LpregSolution LpregSolution;

/**
 * Solve configuration; obtain defaults from [`lpreg_solve_options_default`].
 */
typedef struct LpregSolveOptions {
  /**
   * Target additive objective accuracy (must be positive).
   */
  double epsilon;
  enum LpregSolver solver;
  /**
   * Inner solves run to relative gap n^(-inner_tolerance_exponent).
   */
  uint32_t inner_tolerance_exponent;
  uint64_t max_phases;
  uint64_t seed;
} LpregSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lpreg_last_error_message(void);

/**
 * Loads an instance from a Matrix Market file and two plain-text vector
 * files (one value per line).
 *
 * # Safety
 * Path arguments must be NUL-terminated strings; `out` must be a valid
 * pointer to receive the handle.
 */
enum LpregStatus lpreg_problem_load(const char *matrix_path,
                                    const char *b_path,
                                    const char *c_path,
                                    double p,
                                    struct LpregProblem **out);

/**
 * Generates a seeded random instance (entries of `A` standard normal kept
 * with probability `density`; `c` projected into the row space).
 *
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
enum LpregStatus lpreg_problem_generate(uint64_t n,
                                        uint64_t d,
                                        double p,
                                        double density,
                                        uint64_t seed,
                                        struct LpregProblem **out);

/**
 * Builds an instance from caller-owned buffers: `a` is `n x d` row-major,
 * `b` has length `n`, `c` has length `d`. Entries equal to zero are kept
 * sparse when their share is below the storage threshold.
 *
 * # Safety
 * `a`, `b`, `c` must point to buffers of the stated lengths; `out` must be
 * a valid pointer to receive the handle.
 */
enum LpregStatus lpreg_problem_from_dense(uint64_t n,
                                          uint64_t d,
                                          const double *a,
                                          const double *b,
                                          const double *c,
                                          double p,
                                          struct LpregProblem **out);

/**
 * Row count, or -1 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle from this library.
 */
int64_t lpreg_problem_rows(const struct LpregProblem *problem);

/**
 * Column count, or -1 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle from this library.
 */
int64_t lpreg_problem_cols(const struct LpregProblem *problem);

/**
 * Stored nonzeros, or -1 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle from this library.
 */
int64_t lpreg_problem_nnz(const struct LpregProblem *problem);

/**
 * Evaluates `c.x + ||Ax - b||_p^p` at a caller-supplied point.
 *
 * # Safety
 * `x` must point to `len` doubles; `value` must be valid for writing.
 */
enum LpregStatus lpreg_problem_objective(const struct LpregProblem *problem,
                                         const double *x,
                                         uint64_t len,
                                         double *value);

/**
 * Releases a problem handle. Null is ignored.
 *
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void lpreg_problem_free(struct LpregProblem *problem);

/**
 * Default solve options: `agd-dense`, inner exponent 6, phase cap 10000.
 */
struct LpregSolveOptions lpreg_solve_options_default(void);

/**
 * Runs the homotopy solver. On success the out-parameter receives an owned
 * solution handle.
 *
 * # Safety
 * `problem` must be a live handle; `options` null (defaults) or valid;
 * `out` must be a valid pointer to receive the handle.
 */
enum LpregStatus lpreg_solve(const struct LpregProblem *problem,
                             const struct LpregSolveOptions *options,
                             struct LpregSolution **out);

/**
 * Solution dimension, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
uint64_t lpreg_solution_dim(const struct LpregSolution *solution);

/**
 * Borrowed pointer to the solution vector; valid until the handle is freed.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const double *lpreg_solution_x(const struct LpregSolution *solution);

/**
 * Objective value at the returned solution (NaN for a null handle).
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double lpreg_solution_objective(const struct LpregSolution *solution);

/**
 * Number of homotopy phases in the run, or 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
uint64_t lpreg_solution_phase_count(const struct LpregSolution *solution);

/**
 * Borrowed NUL-terminated JSON report; valid until the handle is freed.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const char *lpreg_solution_report_json(const struct LpregSolution *solution);

/**
 * Releases a solution handle. Null is ignored.
 *
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void lpreg_solution_free(struct LpregSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPREG_H */
