#ifndef GOALGAN_H
#define GOALGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero means success.
 */
typedef enum GgStatus {
  GG_STATUS_OK = 0,
  GG_STATUS_NULL_POINTER = 1,
  GG_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad configuration value, unknown key or unknown method.
   */
  GG_STATUS_CONFIG = 3,
  GG_STATUS_INVALID_ARGUMENT = 4,
  GG_STATUS_IO = 5,
  /**
   * The experiment stopped before finishing.
   */
  GG_STATUS_RUN = 6,
  /**
   * The requested value does not exist (for example no coverage was
   * estimated at that iteration).
   */
  GG_STATUS_NOT_FOUND = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  GG_STATUS_PANIC = 8,
} GgStatus;

/**
 * Experiment configuration.
 */
typedef struct GgConfig GgConfig;

/**
 * Policy loaded from a checkpoint together with its environment.
 */
typedef struct GgPolicy GgPolicy;

/**
 * Finished (or partially finished) experiment.
 */
typedef struct GgResult GgResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *gg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gg_version(void);

/**
 * New configuration holding the defaults.
 */
struct GgConfig *gg_config_default(void);

/**
 * Parse a TOML document into a new configuration stored in `*out`.
 */
enum GgStatus gg_config_from_toml(const char *text, struct GgConfig **out);

void gg_config_free(struct GgConfig *config);

/**
 * Set the method by name (`goalgan`, `uniform`, ...).
 */
enum GgStatus gg_config_set_method(struct GgConfig *config, const char *name);

/**
 * Select the environment: `multipath-maze` (dim must be 2) or `point-mass`.
 */
enum GgStatus gg_config_set_env(struct GgConfig *config, const char *kind, size_t dim);

enum GgStatus gg_config_set_seed(struct GgConfig *config, uint64_t seed);

enum GgStatus gg_config_set_iterations(struct GgConfig *config, size_t iterations);

/**
 * Check the configuration without running anything.
 */
enum GgStatus gg_config_validate(const struct GgConfig *config);

/**
 * Run the configured experiment. On `GG_STATUS_OK` or `GG_STATUS_RUN`
 * (stopped early) `*out` receives a result handle.
 */
enum GgStatus gg_run(const struct GgConfig *config, struct GgResult **out);

void gg_result_free(struct GgResult *result);

/**
 * Number of completed outer iterations.
 */
enum GgStatus gg_result_iterations(const struct GgResult *result, size_t *out);

/**
 * Coverage recorded after `iteration` (0 is the initial policy).
 */
enum GgStatus gg_result_coverage(const struct GgResult *result, size_t iteration, double *out);

/**
 * Coverage of the final policy with the final evaluation budget.
 */
enum GgStatus gg_result_final_coverage(const struct GgResult *result, double *out);

/**
 * Write all artifacts of the result into `directory`.
 */
enum GgStatus gg_result_write(const struct GgResult *result, const char *directory);

/**
 * Load the policy stored in a run checkpoint.
 */
enum GgStatus gg_policy_load(const char *path, struct GgPolicy **out);

void gg_policy_free(struct GgPolicy *policy);

/**
 * Goal-space dimension of the policy's environment.
 */
enum GgStatus gg_policy_dim(const struct GgPolicy *policy, size_t *out);

/**
 * Mean action for the given state and goal. All four arrays hold `dim`
 * values, which must equal the policy's dimension.
 */
enum GgStatus gg_policy_mean_action(const struct GgPolicy *policy,
                                    const double *position,
                                    const double *velocity,
                                    const double *goal,
                                    size_t dim,
                                    double *action_out);

/**
 * Coverage of the policy on the default evaluation grid of its
 * environment with `rollouts` episodes per goal.
 */
enum GgStatus gg_policy_coverage(const struct GgPolicy *policy,
                                 size_t rollouts,
                                 uint64_t seed,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOALGAN_H */
