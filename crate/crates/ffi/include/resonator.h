#ifndef RESONATOR_H
#define RESONATOR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RN_MAX_DIM 3

/**
 * Result codes.
 */
typedef enum RnStatus {
  RN_STATUS_OK = 0,
  /**
   * Null pointer, bad length or malformed UTF-8.
   */
  RN_STATUS_INVALID_ARGUMENT = 1,
  RN_STATUS_INVALID_PARAMETER = 2,
  /**
   * Configuration text failed validation.
   */
  RN_STATUS_INVALID_CONFIG = 3,
  RN_STATUS_NO_BRACKET = 4,
  RN_STATUS_STEP_UNDERFLOW = 5,
  RN_STATUS_PRECONDITION = 6,
  RN_STATUS_IO = 7,
  /**
   * Output buffer too small; the required size was still written.
   */
  RN_STATUS_BUFFER_TOO_SMALL = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  RN_STATUS_INTERNAL = 9,
} RnStatus;

/**
 * Stability class codes used in [`RnEquilibrium`].
 */
typedef enum RnStability {
  RN_STABILITY_STABLE_NODE = 0,
  RN_STABILITY_STABLE_FOCUS = 1,
  RN_STABILITY_UNSTABLE_NODE = 2,
  RN_STABILITY_UNSTABLE_FOCUS = 3,
  RN_STABILITY_SADDLE = 4,
  RN_STABILITY_CENTER_MARGINAL = 5,
} RnStability;

/**
 * Opaque neuron system.
 */
typedef struct RnSystem RnSystem;

/**
 * Opaque sampled trajectory.
 */
typedef struct RnTrajectory RnTrajectory;

/**
 * Parameters of the sodium-potassium model, in mV, ms, mA, mF and S.
 */
typedef struct RnInapikParams {
  double c_mem;
  double g_l;
  double g_na;
  double g_k;
  double e_l;
  double e_na;
  double e_k;
  double v_half_na;
  double v_half_k;
  double k_na;
  double k_k;
  double tau;
} RnInapikParams;

/**
 * One equilibrium; `state` entries past `dim` are zero.
 */
typedef struct RnEquilibrium {
  size_t dim;
  double state[RN_MAX_DIM];
  enum RnStability stability;
  bool stable;
  double residual;
} RnEquilibrium;

/**
 * Level-1 MOSFET; `p_channel` selects the P device.
 */
typedef struct RnMosfetParams {
  double k_trans;
  double v_t0;
  double lambda;
  bool p_channel;
} RnMosfetParams;

typedef struct RnMemristorParams {
  double r_on;
  double r_off;
  double alpha;
  double beta_rate;
  double v_rst;
  double v_set;
} RnMemristorParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid
 * until the next call into this library on the same thread.
 */
const char *rn_last_error(void);

/**
 * Caption parameters of the sodium-potassium model.
 */
struct RnInapikParams rn_inapik_default_params(void);

/**
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum RnStatus rn_inapik_new(const struct RnInapikParams *params, struct RnSystem **out_system);

/**
 * Build the neuron system described by scenario configuration text.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out_system` a valid pointer.
 */
enum RnStatus rn_system_from_config(const char *config, struct RnSystem **out_system);

/**
 * Build the neuron system of a named preset (e.g. `"fig6d"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out_system` a valid pointer.
 */
enum RnStatus rn_system_from_preset(const char *name, struct RnSystem **out_system);

/**
 * # Safety
 * `system` must come from a constructor in this library, or be null.
 */
void rn_system_free(struct RnSystem *system);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `system` must be a live handle or null.
 */
size_t rn_system_dim(const struct RnSystem *system);

/**
 * Time derivatives at `state` (length `dim`) under constant `current`.
 *
 * # Safety
 * `state` and `out_deriv` must point to `dim` doubles.
 */
enum RnStatus rn_system_derivatives(const struct RnSystem *system,
                                    const double *state,
                                    size_t dim,
                                    double current,
                                    double *out_deriv);

/**
 * Integrate under a constant current from `initial` (length `dim`).
 *
 * # Safety
 * Pointers must be valid; `out_traj` receives a handle to free with
 * [`rn_trajectory_free`].
 */
enum RnStatus rn_simulate_constant(const struct RnSystem *system,
                                   const double *initial,
                                   size_t dim,
                                   double current,
                                   double t_end,
                                   double tolerance,
                                   double sample_interval,
                                   struct RnTrajectory **out_traj);

/**
 * # Safety
 * `traj` must come from this library, or be null.
 */
void rn_trajectory_free(struct RnTrajectory *traj);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be a live handle or null.
 */
size_t rn_trajectory_len(const struct RnTrajectory *traj);

/**
 * Pointer to the `len` sample times; valid while the handle lives.
 *
 * # Safety
 * `traj` must be a live handle or null.
 */
const double *rn_trajectory_times(const struct RnTrajectory *traj);

/**
 * Copy state component `k` into `buffer` (capacity `cap`).
 *
 * # Safety
 * `buffer` must hold `cap` doubles.
 */
enum RnStatus rn_trajectory_component(const struct RnTrajectory *traj,
                                      size_t k,
                                      double *buffer,
                                      size_t cap);

/**
 * Equilibria at constant `current` with voltage in `[v_min, v_max]`.
 * `out_count` receives the number found even when `cap` is too small.
 *
 * # Safety
 * `buffer` must hold `cap` entries; `out_count` must be valid.
 */
enum RnStatus rn_find_equilibria(const struct RnSystem *system,
                                 double current,
                                 double v_min,
                                 double v_max,
                                 size_t resolution,
                                 struct RnEquilibrium *buffer,
                                 size_t cap,
                                 size_t *out_count);

/**
 * Refine a Hopf point bracketed by `[i_low, i_high]`.
 *
 * # Safety
 * `out_current` must be valid.
 */
enum RnStatus rn_hopf_locate(const struct RnSystem *system,
                             double i_low,
                             double i_high,
                             double tolerance,
                             double *out_current);

/**
 * Drain current of a level-1 MOSFET.
 *
 * # Safety
 * `params` and `out_current` must be valid.
 */
enum RnStatus rn_mosfet_ids(const struct RnMosfetParams *params,
                            double v_gs,
                            double v_ds,
                            double *out_current);

/**
 * Memristor current `v / r` and resistance rate at voltage `v`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RnStatus rn_memristor_eval(const struct RnMemristorParams *params,
                                double r,
                                double v,
                                double *out_current,
                                double *out_rate);

/**
 * Run a scenario given as configuration text, writing its files into
 * `out_dir`. `out_summary` receives the JSON summary; release it with
 * [`rn_string_free`].
 *
 * # Safety
 * Strings must be NUL-terminated; `out_summary` must be valid.
 */
enum RnStatus rn_run_scenario(const char *config,
                              const char *out_dir,
                              bool svg,
                              char **out_summary);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void rn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RESONATOR_H */
