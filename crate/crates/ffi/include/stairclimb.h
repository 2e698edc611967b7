#ifndef STAIRCLIMB_H
#define STAIRCLIMB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values accepted by [`sc_run`] as `goal`.
 */
typedef enum ScGoal {
  ScGoal_Plan = 0,
  ScGoal_Ik = 1,
  ScGoal_Simulate = 2,
  ScGoal_Tune = 3,
  ScGoal_RunCase = 4,
} ScGoal;

typedef enum ScStatus {
  ScStatus_Ok = 0,
  ScStatus_NullPointer = 1,
  ScStatus_InvalidUtf8 = 2,
  ScStatus_InvalidArgument = 3,
  ScStatus_Config = 4,
  ScStatus_Io = 5,
  ScStatus_Planning = 6,
  ScStatus_InverseKinematics = 7,
  ScStatus_Dynamics = 8,
  ScStatus_Stability = 9,
  ScStatus_Infeasible = 10,
  ScStatus_OutOfRange = 11,
  ScStatus_Panic = 12,
} ScStatus;

/**
 * A validated case configuration.
 */
typedef struct ScCase ScCase;

/**
 * Report and traces of one run.
 */
typedef struct ScOutcome ScOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sc_version(void);

/**
 * Parses and validates a TOML case configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum ScStatus sc_case_from_toml(const char *toml, struct ScCase **out);

/**
 * Loads and validates a TOML case configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum ScStatus sc_case_load(const char *path, struct ScCase **out);

/**
 * One of the shipped cases, `index` 0 to 2.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum ScStatus sc_case_shipped(size_t index, struct ScCase **out);

/**
 * # Safety
 * `case` must come from an `sc_case_*` constructor.
 */
enum ScStatus sc_case_set_seed(struct ScCase *case_, uint64_t seed);

/**
 * # Safety
 * `case` must come from an `sc_case_*` constructor, or be null.
 */
void sc_case_free(struct ScCase *case_);

/**
 * Runs `case` up to `goal` (an [`ScGoal`] value). With a non-null
 * `out_dir` the harness files are written there as well.
 *
 * # Safety
 * `case` must be valid, `out_dir` null or NUL-terminated, `out` writable.
 */
enum ScStatus sc_run(const struct ScCase *case_,
                     uint32_t goal,
                     const char *out_dir,
                     struct ScOutcome **out);

/**
 * # Safety
 * `outcome` must come from [`sc_run`], or be null.
 */
void sc_outcome_free(struct ScOutcome *outcome);

/**
 * The report as JSON with 17-digit floats. Free with [`sc_string_free`].
 *
 * # Safety
 * `outcome` must be valid and `out` writable.
 */
enum ScStatus sc_outcome_report_json(const struct ScOutcome *outcome, char **out);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void sc_string_free(char *s);

/**
 * Peak planned joint jerk, rad/s³.
 *
 * # Safety
 * `outcome` must be valid and `out` writable.
 */
enum ScStatus sc_outcome_planned_max_jerk(const struct ScOutcome *outcome, double *out);

/**
 * Number of rollout samples; 0 when the run had no rollout.
 *
 * # Safety
 * `outcome` must be valid and `out` writable.
 */
enum ScStatus sc_outcome_rollout_len(const struct ScOutcome *outcome, size_t *out);

/**
 * Rollout sample `k`: time, the nine joint angles and the nine torques.
 * A missing ZMP is reported as NaN in `zmp_margin`.
 *
 * # Safety
 * `outcome` must be valid; `t` and `zmp_margin` writable; `q` and `tau`
 * writable arrays of 9 doubles.
 */
enum ScStatus sc_outcome_rollout_sample(const struct ScOutcome *outcome,
                                        size_t k,
                                        double *t,
                                        double *q,
                                        double *tau,
                                        double *zmp_margin);

/**
 * Multi-mass ZMP of `n` point masses. `position` and `acceleration` hold
 * `2n` doubles as (x, z) pairs, heights above the supporting plane.
 *
 * # Safety
 * The arrays must hold the stated number of doubles; `out` writable.
 */
enum ScStatus sc_zmp(const double *position,
                     const double *acceleration,
                     const double *masses,
                     size_t n,
                     double gravity,
                     double k_slope,
                     double *out);

/**
 * Closed-form two-link leg angles with the knee forward.
 *
 * # Safety
 * `theta1` and `theta2` must be writable.
 */
enum ScStatus sc_two_link_ik(double hip_x,
                             double hip_z,
                             double ankle_x,
                             double ankle_z,
                             double l1,
                             double l2,
                             double *theta1,
                             double *theta2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STAIRCLIMB_H */
