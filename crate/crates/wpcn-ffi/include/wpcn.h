/* C interface for the wpcn resource-allocation solvers.
 * Generated by cbindgen; do not edit by hand. */

#ifndef WPCN_H
#define WPCN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Operating mode selector.
 */
typedef enum wpcn_mode {
  /**
   * Full duplex, perfect self-interference cancellation.
   */
  WPCN_MODE_FD_PERFECT = 0,
  /**
   * Full duplex with residual self-interference.
   */
  WPCN_MODE_FD_SI = 1,
  /**
   * Half duplex (charge-then-transmit).
   */
  WPCN_MODE_HD = 2,
} wpcn_mode;

/**
 * Status code returned by every fallible call.
 */
typedef enum wpcn_status {
  /**
   * Success.
   */
  WPCN_OK = 0,
  /**
   * A required pointer argument was null.
   */
  WPCN_ERR_NULL_ARGUMENT = 1,
  /**
   * Arguments failed validation (dimensions, ranges, unknown mode).
   */
  WPCN_ERR_INVALID_ARGUMENT = 2,
  /**
   * The solver reported an error or did not converge.
   */
  WPCN_ERR_SOLVER_FAILED = 3,
  /**
   * An output buffer was smaller than the required length.
   */
  WPCN_ERR_BUFFER_TOO_SMALL = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  WPCN_ERR_PANIC = 5,
} wpcn_status;

/**
 * Opaque problem handle: system parameters plus one channel realization.
 */
typedef struct wpcn_problem {
  uint8_t _private[0];
} wpcn_problem;

/**
 * Opaque solution handle: one solver outcome.
 */
typedef struct wpcn_solution {
  uint8_t _private[0];
} wpcn_solution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, empty if none.
 * Valid until the next failing call on the same thread.
 */
const char *wpcn_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *wpcn_version(void);

/**
 * Creates a problem handle.
 *
 * `theta`, `weights`, and `h` are arrays of length `num_users` holding the
 * per-user harvesting efficiencies, objective weights, and end-to-end
 * channel power gains. `p_peak` may be `INFINITY` for an unconstrained
 * peak; `si_gamma` is the residual self-interference coefficient (0 for
 * perfect cancellation). On success writes the handle to `*out`; release
 * it with [`wpcn_problem_free`].
 *
 * # Safety
 * The array pointers must reference `num_users` readable doubles and `out`
 * a writable pointer slot.
 */
enum wpcn_status wpcn_problem_new(double p_avg,
                                  double p_peak,
                                  double sigma2,
                                  double gap,
                                  double si_gamma,
                                  const double *theta,
                                  const double *weights,
                                  const double *h,
                                  size_t num_users,
                                  struct wpcn_problem **out);

/**
 * Releases a problem handle; null is a no-op.
 *
 * # Safety
 * `handle` must be a live pointer from [`wpcn_problem_new`] (or null) and
 * must not be used afterwards.
 */
void wpcn_problem_free(struct wpcn_problem *handle);

/**
 * Number of users in the problem, 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live problem handle.
 */
size_t wpcn_problem_num_users(const struct wpcn_problem *handle);

/**
 * Solves the problem in the given mode and writes a solution handle to
 * `*out`; release it with [`wpcn_solution_free`].
 *
 * # Safety
 * `handle` must be a live problem handle and `out` a writable slot.
 */
enum wpcn_status wpcn_solve(const struct wpcn_problem *handle,
                            enum wpcn_mode mode,
                            struct wpcn_solution **out);

/**
 * Releases a solution handle; null is a no-op.
 *
 * # Safety
 * `handle` must be a live pointer from [`wpcn_solve`] (or null) and must
 * not be used afterwards.
 */
void wpcn_solution_free(struct wpcn_solution *handle);

/**
 * Number of schedule slots (`K + 1`), 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live solution handle.
 */
size_t wpcn_solution_num_slots(const struct wpcn_solution *handle);

/**
 * Achieved weighted sum rate (bps/Hz), NaN for a null handle.
 *
 * # Safety
 * `handle` must be null or a live solution handle.
 */
double wpcn_solution_wsr(const struct wpcn_solution *handle);

/**
 * 1 if the solver converged, 0 otherwise (solutions are only handed out
 * converged; this accessor exists for symmetry and null handles).
 *
 * # Safety
 * `handle` must be null or a live solution handle.
 */
int32_t wpcn_solution_converged(const struct wpcn_solution *handle);

/**
 * Iteration count of the dominant solve loop.
 *
 * # Safety
 * `handle` must be null or a live solution handle.
 */
size_t wpcn_solution_iterations(const struct wpcn_solution *handle);

/**
 * Copies the per-slot schedule into caller buffers of length `len`, which
 * must equal [`wpcn_solution_num_slots`]. Slot 0 is the dedicated charging
 * slot; slot `i ≥ 1` belongs to user `i`. `tau` receives slot durations,
 * `power` broadcast powers, `energy` broadcast energies.
 *
 * # Safety
 * `handle` must be a live solution handle and each buffer writable for
 * `len` doubles.
 */
enum wpcn_status wpcn_solution_schedule(const struct wpcn_solution *handle,
                                        double *tau,
                                        double *power,
                                        double *energy,
                                        size_t len);

/**
 * Copies the per-user rates (bps/Hz) into a caller buffer of length `len`,
 * which must be at least the number of users.
 *
 * # Safety
 * `handle` must be a live solution handle and `rates` writable for `len`
 * doubles.
 */
enum wpcn_status wpcn_solution_rates(const struct wpcn_solution *handle, double *rates, size_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* WPCN_H */
