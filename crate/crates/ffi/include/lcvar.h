#ifndef LCVAR_H
#define LCVAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum LcvarStatus {
  LCVAR_STATUS_OK = 0,
  LCVAR_STATUS_NULL_POINTER = 1,
  LCVAR_STATUS_DIMENSION = 2,
  LCVAR_STATUS_INVALID_ARGUMENT = 3,
  LCVAR_STATUS_NUMERICAL = 4,
  LCVAR_STATUS_BUFFER_TOO_SMALL = 5,
  LCVAR_STATUS_PANIC = 6,
} LcvarStatus;

typedef enum LcvarConstraintKind {
  LCVAR_CONSTRAINT_KIND_CARDINALITY = 0,
  LCVAR_CONSTRAINT_KIND_RANK = 1,
  LCVAR_CONSTRAINT_KIND_L1_BALL = 2,
  LCVAR_CONSTRAINT_KIND_NUCLEAR_BALL = 3,
} LcvarConstraintKind;

typedef enum LcvarSolveStatus {
  LCVAR_SOLVE_STATUS_CONVERGED = 0,
  LCVAR_SOLVE_STATUS_MAX_ITERS = 1,
  LCVAR_SOLVE_STATUS_MONOTONICITY_VIOLATION = 2,
  LCVAR_SOLVE_STATUS_BACKTRACKING_EXHAUSTED = 3,
} LcvarSolveStatus;

// Opaque problem data.
typedef struct LcvarProblem LcvarProblem;

// Opaque solver result.
typedef struct LcvarReport LcvarReport;

typedef struct LcvarPalmOptions {
  double gamma1;
  double gamma2;
  size_t max_iters;
  double tol_step;
  // Nonzero to stop on a failed sufficient-decrease check.
  int32_t assert_monotone;
} LcvarPalmOptions;

typedef struct LcvarGpOptions {
  double armijo_sigma;
  double armijo_beta;
  double initial_step;
  size_t max_backtracks;
  size_t max_iters;
  double tol_step;
} LcvarGpOptions;

// Message describing the last failed call on this thread, or null. The
// pointer stays valid until the next failing call on the same thread.
const char *lcvar_last_error_message(void);

struct LcvarPalmOptions lcvar_palm_options_default(void);

struct LcvarGpOptions lcvar_gp_options_default(void);

// Creates a problem from `c`, `d` (`p × transitions`) and `s`, `q`
// (`p × p`), all row-major.
//
// # Safety
// Each matrix pointer must reference a buffer of the stated size and `out`
// must be a valid place to store the handle.
enum LcvarStatus lcvar_problem_new(size_t p,
                                   size_t transitions,
                                   const double *c,
                                   const double *d,
                                   const double *s,
                                   const double *q,
                                   double rho1,
                                   double rho2,
                                   double mu,
                                   struct LcvarProblem **out);

// # Safety
// `problem` must be null or a handle from [`lcvar_problem_new`] not yet
// freed.
void lcvar_problem_free(struct LcvarProblem *problem);

// # Safety
// `problem` must be a live problem handle; `options` may be null for the
// defaults; `out` must be a valid place to store the report handle.
enum LcvarStatus lcvar_palm_solve(const struct LcvarProblem *problem,
                                  enum LcvarConstraintKind kind,
                                  double bound,
                                  const struct LcvarPalmOptions *options,
                                  struct LcvarReport **out);

// Gradient projection; only the ℓ1 and nuclear-norm balls are accepted.
//
// # Safety
// Same contract as [`lcvar_palm_solve`].
enum LcvarStatus lcvar_gp_solve(const struct LcvarProblem *problem,
                                enum LcvarConstraintKind kind,
                                double bound,
                                const struct LcvarGpOptions *options,
                                struct LcvarReport **out);

// # Safety
// `report` must be null or a live report handle.
void lcvar_report_free(struct LcvarReport *report);

// Dimension `p` of the estimate, or 0 for a null handle.
//
// # Safety
// `report` must be null or a live report handle.
size_t lcvar_report_dim(const struct LcvarReport *report);

// Copies the `p × p` estimate into `out` (row-major, `len ≥ p²`).
//
// # Safety
// `report` must be a live report handle and `out` must hold `len` doubles.
enum LcvarStatus lcvar_report_estimate(const struct LcvarReport *report, double *out, size_t len);

// # Safety
// `report` must be a live report handle.
enum LcvarStatus lcvar_report_status(const struct LcvarReport *report, enum LcvarSolveStatus *out);

// Iteration count, final objective, projection count and the last step
// sizes. Any output pointer may be null.
//
// # Safety
// `report` must be a live report handle; non-null outputs must be writable.
enum LcvarStatus lcvar_report_summary(const struct LcvarReport *report,
                                      size_t *iterations,
                                      double *objective,
                                      size_t *projections,
                                      double *e_x,
                                      double *e_y,
                                      double *e_xy);

// Projects the row-major `p × p` matrix `v` onto the constraint set.
// `v` and `out` may alias.
//
// # Safety
// `v` and `out` must each reference `p²` doubles.
enum LcvarStatus lcvar_project(enum LcvarConstraintKind kind,
                               double bound,
                               size_t p,
                               const double *v,
                               double *out);

// Normalized error and cosine score of `a` (`p × p`) on the test series
// `states` (`p × m`, one column per time step), both row-major.
//
// # Safety
// Buffers must have the stated sizes; outputs must be writable.
enum LcvarStatus lcvar_evaluate(size_t p,
                                const double *a,
                                size_t m,
                                const double *states,
                                double *normalized_error,
                                double *cosine_score);

#endif  /* LCVAR_H */
