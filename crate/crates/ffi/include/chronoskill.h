#ifndef CHRONOSKILL_H
#define CHRONOSKILL_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_DIMENSION = 3,
  CS_STATUS_USAGE = 4,
  CS_STATUS_NUMERIC = 5,
  CS_STATUS_FORMAT = 6,
  CS_STATUS_UNSUPPORTED_VERSION = 7,
  CS_STATUS_IO = 8,
  CS_STATUS_PANIC = 9,
} CsStatus;

/**
 * An environment instance. Create with [`cs_env_new`], release with [`cs_env_free`].
 */
typedef struct CsEnv CsEnv;

/**
 * A trained policy loaded from a checkpoint.
 */
typedef struct CsPolicy CsPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Head index `floor(t * heads / horizon)` for time step `t`.
 *
 * # Safety
 * `head` must be a valid pointer to writable memory.
 */
enum CsStatus cs_select_head(size_t t, size_t horizon, size_t heads, size_t *head);

/**
 * Creates an environment by name (`push-lite`, `pick-place-lite`,
 * `lid-close-lite`, `two-phase-probe`). Call [`cs_env_reset`] before stepping.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `env` a valid pointer.
 */
enum CsStatus cs_env_new(const char *name, struct CsEnv **env);

/**
 * # Safety
 * `env` must come from [`cs_env_new`]; output pointers must be valid.
 */
enum CsStatus cs_env_dims(const struct CsEnv *env,
                          size_t *obs_dim,
                          size_t *action_dim,
                          size_t *horizon);

/**
 * Starts an episode from reset seed `seed` and writes the first observation.
 *
 * # Safety
 * `env` must come from [`cs_env_new`]; `obs` must point to `obs_len` doubles.
 */
enum CsStatus cs_env_reset(struct CsEnv *env, uint64_t seed, double *obs, size_t obs_len);

/**
 * Applies one action (clipped to the action box) and writes the next
 * observation and outcome. Stepping past the horizon is a usage error.
 *
 * # Safety
 * `env` must come from [`cs_env_new`]; `action` must point to `action_len`
 * doubles, `obs` to `obs_len` doubles; the remaining pointers must be valid.
 */
enum CsStatus cs_env_step(struct CsEnv *env,
                          const double *action,
                          size_t action_len,
                          double *obs,
                          size_t obs_len,
                          double *reward,
                          bool *terminal,
                          bool *success);

/**
 * # Safety
 * `env` must come from [`cs_env_new`] and not be used afterwards. NULL is ignored.
 */
void cs_env_free(struct CsEnv *env);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `policy` a valid pointer.
 */
enum CsStatus cs_policy_load(const char *path, struct CsPolicy **policy);

/**
 * # Safety
 * `policy` must come from [`cs_policy_load`]; output pointers must be valid.
 */
enum CsStatus cs_policy_dims(const struct CsPolicy *policy,
                             size_t *obs_dim,
                             size_t *action_dim,
                             size_t *heads,
                             size_t *horizon);

/**
 * Deterministic action (the distribution mean) for observation `obs` at
 * time `t`. `head` receives the head used and may be NULL.
 *
 * # Safety
 * `policy` must come from [`cs_policy_load`]; `obs` must point to `obs_len`
 * doubles and `action` to `action_len` doubles.
 */
enum CsStatus cs_policy_act(const struct CsPolicy *policy,
                            const double *obs,
                            size_t obs_len,
                            size_t t,
                            double *action,
                            size_t action_len,
                            size_t *head);

/**
 * # Safety
 * `policy` must come from [`cs_policy_load`] and not be used afterwards. NULL is ignored.
 */
void cs_policy_free(struct CsPolicy *policy);

/**
 * Runs the training described by a config file, writing artifacts to its
 * output directory. Final evaluation figures are written to the optional
 * (nullable) outputs.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; output pointers must be
 * valid or NULL.
 */
enum CsStatus cs_train(const char *config_path, double *mean_return, double *success_rate);

/**
 * Evaluates a checkpoint on `episodes` mean-action episodes with reset
 * seeds `base_seed..base_seed + episodes`.
 *
 * # Safety
 * `checkpoint` and `env` must be NUL-terminated strings; output pointers
 * must be valid.
 */
enum CsStatus cs_evaluate(const char *checkpoint,
                          const char *env,
                          size_t episodes,
                          uint64_t base_seed,
                          double *mean_return,
                          double *success_rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHRONOSKILL_H */
