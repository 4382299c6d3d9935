#ifndef LQO_ROM_H
#define LQO_ROM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  LQO_STATUS_OK = 0,
  LQO_STATUS_NULL_POINTER = 1,
  LQO_STATUS_INVALID_ARGUMENT = 2,
  LQO_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * The state matrix has an eigenvalue with non-negative real part.
   */
  LQO_STATUS_NOT_STABLE = 4,
  /**
   * A factorisation or solve broke down (singular, indefinite, no convergence).
   */
  LQO_STATUS_NUMERICAL_FAILURE = 5,
  /**
   * The line search could not find an acceptable step.
   */
  LQO_STATUS_OPTIMIZATION_FAILED = 6,
  LQO_STATUS_IO = 7,
  LQO_STATUS_PANIC = 8,
} LqoStatus;

/**
 * Why the optimiser stopped.
 */
typedef enum {
  LQO_TERMINATION_RELATIVE_GRADIENT = 0,
  LQO_TERMINATION_COST_CHANGE = 1,
  LQO_TERMINATION_MAX_ITERATIONS = 2,
  LQO_TERMINATION_STATIONARY = 3,
  LQO_TERMINATION_LINE_SEARCH_FAILED = 4,
  LQO_TERMINATION_EVALUATION_FAILED = 5,
} LqoTermination;

/**
 * Reduced model in `J − R` form; opaque to C.
 */
typedef struct LqoRom LqoRom;

/**
 * Full-order model with its Gramians; opaque to C.
 */
typedef struct LqoSystem LqoSystem;

/**
 * Optimiser settings; obtain defaults from [`lqo_optimizer_options_default`].
 */
typedef struct {
  size_t memory_size;
  double armijo_c1;
  double backtrack_factor;
  double cautious_coefficient;
  double tol_rel_grad;
  double tol_f_change;
  double tol_abs_grad;
  size_t max_iterations;
  size_t max_backtracks;
} LqoOptimizerOptions;

/**
 * Outcome of [`lqo_reduce`].
 */
typedef struct {
  /**
   * H2 error of the balanced-truncation starting model.
   */
  double h2_bt;
  /**
   * H2 error of the optimised model.
   */
  double h2_opt;
  size_t iterations;
  LqoTermination termination;
  /**
   * Shift added to make the truncated model's dissipation positive definite.
   */
  double regularization;
} LqoReduceSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next `lqo_*` call on the same thread.
 */
const char *lqo_last_error(void);

/**
 * Builds `ẋ = A x + B u`, `y = C x + xᵀ M x + d` from row-major arrays:
 * `a` and `m` are `n × n`, `b` is `n × inputs`, `c` has `n` entries.
 * Fails with `LQO_STATUS_NOT_STABLE` unless `A` is Hurwitz.
 *
 * # Safety
 * Array pointers must reference the stated number of doubles; `out` must be writable.
 */
LqoStatus lqo_system_new(size_t n,
                         size_t inputs,
                         const double *a,
                         const double *b,
                         const double *c,
                         const double *m,
                         double d,
                         LqoSystem **out);

/**
 * The advection–diffusion benchmark on `n` interior nodes.
 *
 * # Safety
 * `out` must be writable.
 */
LqoStatus lqo_system_advection_diffusion(size_t n, double alpha, double beta, LqoSystem **out);

/**
 * Loads a system saved by `lqo-rom export` (a directory of Matrix Market files).
 *
 * # Safety
 * `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
 */
LqoStatus lqo_system_load(const char *dir, LqoSystem **out);

/**
 * # Safety
 * `system` must come from an `lqo_system_*` constructor and not be used afterwards. NULL is ignored.
 */
void lqo_system_free(LqoSystem *system);

/**
 * State dimension and number of inputs.
 *
 * # Safety
 * `system` must be a live handle; `n` and `inputs` may be NULL.
 */
LqoStatus lqo_system_dims(const LqoSystem *system, size_t *n, size_t *inputs);

/**
 * # Safety
 * `system` must be a live handle; `out` must be writable.
 */
LqoStatus lqo_system_h2_norm(const LqoSystem *system, double *out);

LqoOptimizerOptions lqo_optimizer_options_default(void);

/**
 * Reduces `system` to order `r`: balanced truncation, then Riemannian
 * LRBFGS on the H2 error. `options` may be NULL for the defaults and
 * `summary` may be NULL. On success `*rom` owns a new handle.
 *
 * # Safety
 * `system` must be a live handle; `rom` must be writable.
 */
LqoStatus lqo_reduce(const LqoSystem *system,
                     size_t r,
                     const LqoOptimizerOptions *options,
                     LqoRom **rom,
                     LqoReduceSummary *summary);

/**
 * # Safety
 * `rom` must come from [`lqo_reduce`] and not be used afterwards. NULL is ignored.
 */
void lqo_rom_free(LqoRom *rom);

/**
 * Reduced order and number of inputs.
 *
 * # Safety
 * `rom` must be a live handle; `r` and `inputs` may be NULL.
 */
LqoStatus lqo_rom_dims(const LqoRom *rom, size_t *r, size_t *inputs);

/**
 * Copies the state-space form `Â = J − R, B̂, Ĉ, M̂, d` into row-major
 * buffers (`r × r`, `r × inputs`, `r`, `r × r`). Any output may be NULL.
 *
 * # Safety
 * `rom` must be a live handle; non-NULL buffers must hold the stated sizes.
 */
LqoStatus lqo_rom_state_space(const LqoRom *rom,
                              double *a,
                              double *b,
                              double *c,
                              double *m,
                              double *d);

/**
 * Copies the skew-symmetric `J` and the positive definite `R` (both `r × r`, row-major).
 *
 * # Safety
 * `rom` must be a live handle; non-NULL buffers must hold `r × r` doubles.
 */
LqoStatus lqo_rom_factors(const LqoRom *rom, double *j, double *r);

/**
 * H2 norm of the error system between `system` and `rom`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
LqoStatus lqo_h2_error(const LqoSystem *system, const LqoRom *rom, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LQO_ROM_H */
