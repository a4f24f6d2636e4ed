#ifndef LCRA_H
#define LCRA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LcraStatus {
  LCRA_STATUS_OK = 0,
  LCRA_STATUS_NULL_POINTER = 1,
  LCRA_STATUS_INVALID_UTF8 = 2,
  LCRA_STATUS_CONFIG = 3,
  LCRA_STATUS_DOMAIN = 4,
  LCRA_STATUS_PRECONDITION = 5,
  LCRA_STATUS_OVERFLOW = 6,
  LCRA_STATUS_INFEASIBLE = 7,
  LCRA_STATUS_USAGE = 8,
  LCRA_STATUS_IO = 9,
  LCRA_STATUS_PARSE = 10,
  /**
   * Output buffer shorter than the number of layers.
   */
  LCRA_STATUS_BUFFER_TOO_SMALL = 11,
  /**
   * A Rust panic was caught at the boundary.
   */
  LCRA_STATUS_PANIC = 12,
} LcraStatus;

/**
 * Parsed system configuration.
 */
typedef struct LcraConfig LcraConfig;

/**
 * Feasible power plan.
 */
typedef struct LcraPlan LcraPlan;

/**
 * One layer of a power plan.
 */
typedef struct LcraLayerLevel {
  /**
   * Receive power.
   */
  double v;
  /**
   * Noise plus residual interference seen by the layer.
   */
  double sigma2;
  /**
   * Post-MMSE SIR.
   */
  double gamma;
  /**
   * Outer radius of the ring.
   */
  double radius;
  /**
   * Transmit power at the ring edge.
   */
  double tx;
  double kappa;
  double rho;
} LcraLayerLevel;

/**
 * Detector settings for [`lcra_simulate`].
 */
typedef struct LcraSimOptions {
  size_t n_trials;
  /**
   * CAVI sweeps per layer; 0 selects the exhaustive MAP detector.
   */
  size_t cavi_sweeps;
  /**
   * Detect exactly the true number of active devices.
   */
  bool known_b;
} LcraSimOptions;

/**
 * Mean error counts over the trials of a simulation.
 */
typedef struct LcraMetrics {
  double mean_md;
  double mean_fa;
  /**
   * Standard error of the mean of `md + fa`.
   */
  double stderr;
} LcraMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *lcra_last_error(void);

/**
 * The default three-layer configuration. Never NULL.
 */
struct LcraConfig *lcra_config_default(void);

/**
 * Parses a flat `key = value` configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LcraStatus lcra_config_parse(const char *text, struct LcraConfig **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. NULL is a
 * no-op.
 */
void lcra_config_free(struct LcraConfig *cfg);

/**
 * Layer count `Q`, or 0 for NULL.
 *
 * # Safety
 * `cfg` must be NULL or a live handle.
 */
size_t lcra_config_num_layers(const struct LcraConfig *cfg);

/**
 * Overrides the configuration seed.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum LcraStatus lcra_config_set_seed(struct LcraConfig *cfg, uint64_t seed);

/**
 * Computes the power plan. Fails with `LCRA_STATUS_INFEASIBLE` when the
 * target SNR cannot be met.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum LcraStatus lcra_plan_new(const struct LcraConfig *cfg, struct LcraPlan **out);

/**
 * # Safety
 * `plan` must come from this library and not be used afterwards. NULL is a
 * no-op.
 */
void lcra_plan_free(struct LcraPlan *plan);

/**
 * # Safety
 * `plan` must be NULL or a live handle.
 */
size_t lcra_plan_num_layers(const struct LcraPlan *plan);

/**
 * Copies layer `index` (0 = strongest) into `out`.
 *
 * # Safety
 * `plan` must be a live handle and `out` a valid pointer.
 */
enum LcraStatus lcra_plan_layer(const struct LcraPlan *plan,
                                size_t index,
                                struct LcraLayerLevel *out);

/**
 * Large-system MMSE SIR at SNR `gamma` and load `kappa`; NaN outside the
 * domain.
 */
double lcra_beta(double gamma, double kappa);

/**
 * Chi-squared CDF with `dof` degrees of freedom.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LcraStatus lcra_chi2_cdf(uint32_t dof, double x, double *out);

/**
 * Monte Carlo run of the SIC pipeline. Writes one entry per layer into
 * `layers` (which must hold at least `Q` entries) and the sum over layers
 * into `total`. Reproducible for a given configuration seed.
 *
 * # Safety
 * `cfg` must be a live handle, `layers` must point to `capacity` writable
 * entries and `total` must be valid.
 */
enum LcraStatus lcra_simulate(const struct LcraConfig *cfg,
                              struct LcraSimOptions options,
                              struct LcraMetrics *layers,
                              size_t capacity,
                              struct LcraMetrics *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCRA_H */
