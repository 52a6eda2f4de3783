/* markovlens C API. Generated by cbindgen; do not edit. */

#ifndef MARKOVLENS_H
#define MARKOVLENS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code for every fallible call.
typedef enum MlvStatus {
  // Success; out-parameters are valid.
  MLV_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MLV_STATUS_NULL_POINTER = 1,
  // An argument failed validation (bad name, bad shape, out of range).
  MLV_STATUS_INVALID_ARGUMENT = 2,
  // The operation itself failed; see `mlv_last_error_message`.
  MLV_STATUS_RUNTIME = 3,
} MlvStatus;

// An owned simulation environment (CartPole-v1, Pendulum-v1, or Acrobot-v1).
typedef struct MlvEnv MlvEnv;

// A completed PCMCI analysis of one panel.
typedef struct MlvPcmci MlvPcmci;

// One step's scalar results; observations are returned separately.
typedef struct MlvStep {
  double reward;
  bool terminated;
  bool truncated;
} MlvStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread. Never NULL.
const char *mlv_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mlv_version(void);

// Creates an environment by name ("CartPole-v1", "Pendulum-v1",
// "Acrobot-v1"). On success writes a handle to `out`; free it with
// `mlv_env_free`.
//
// # Safety
// `name` must be a valid NUL-terminated string and `out` a valid pointer.
enum MlvStatus mlv_env_new(const char *name, struct MlvEnv **out);

// Destroys an environment handle. NULL is a no-op.
//
// # Safety
// `env` must be a handle from `mlv_env_new` that has not been freed.
void mlv_env_free(struct MlvEnv *env);

// Writes the environment's observation dimension to `out`.
//
// # Safety
// `env` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_env_observation_dim(const struct MlvEnv *env, size_t *out);

// Writes 1 to `out` if the action space is discrete (actions are indices
// passed to `mlv_env_step_discrete`), 0 if continuous (torques passed to
// `mlv_env_step_continuous`).
//
// # Safety
// `env` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_env_action_space_is_discrete(const struct MlvEnv *env, int32_t *out);

// Starts a new episode from a fresh RNG seeded with `seed` and writes the
// initial observation into `obs_out` (capacity `obs_capacity` doubles).
//
// # Safety
// `env` must be a live handle; `obs_out` must point to at least
// `obs_capacity` doubles.
enum MlvStatus mlv_env_reset_seeded(struct MlvEnv *env,
                                    uint64_t seed,
                                    double *obs_out,
                                    size_t obs_capacity);

// Starts a new episode drawing the initial state from the environment's
// current RNG stream.
//
// # Safety
// Same contract as `mlv_env_reset_seeded`.
enum MlvStatus mlv_env_reset(struct MlvEnv *env, double *obs_out, size_t obs_capacity);

// Overwrites the environment's internal state vector (the diagnostic layout,
// not the observation; CartPole and Acrobot use 4 values, Pendulum 2).
// Episode bookkeeping is untouched.
//
// # Safety
// `env` must be a live handle; `state` must point to `state_len` doubles.
enum MlvStatus mlv_env_set_state(struct MlvEnv *env, const double *state, size_t state_len);

// Advances a discrete-action environment by one step. Stepping a finished
// episode or passing an out-of-range action fails with `MLV_STATUS_RUNTIME`.
//
// # Safety
// `env` must be a live handle; `obs_out` must hold `obs_capacity` doubles;
// `step_out` must be a valid pointer.
enum MlvStatus mlv_env_step_discrete(struct MlvEnv *env,
                                     size_t action,
                                     double *obs_out,
                                     size_t obs_capacity,
                                     struct MlvStep *step_out);

// Advances a continuous-action environment by one step.
//
// # Safety
// Same contract as `mlv_env_step_discrete`.
enum MlvStatus mlv_env_step_continuous(struct MlvEnv *env,
                                       double action,
                                       double *obs_out,
                                       size_t obs_capacity,
                                       struct MlvStep *step_out);

// Runs PCMCI (PC1 parent selection + MCI partial-correlation tests) on a
// row-major panel of `n_steps` x `n_vars` doubles. On success writes a
// handle to `out`; free it with `mlv_pcmci_free`.
//
// # Safety
// `data` must point to `n_steps * n_vars` doubles; `out` must be valid.
enum MlvStatus mlv_pcmci_run(const double *data,
                             size_t n_steps,
                             size_t n_vars,
                             size_t tau_max,
                             double alpha,
                             struct MlvPcmci **out);

// Destroys a PCMCI handle. NULL is a no-op.
//
// # Safety
// `pcmci` must be a handle from `mlv_pcmci_run` that has not been freed.
void mlv_pcmci_free(struct MlvPcmci *pcmci);

// Writes the analyzed panel's variable count to `out`.
//
// # Safety
// `pcmci` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_pcmci_n_vars(const struct MlvPcmci *pcmci, size_t *out);

// Writes the analysis tau_max to `out`.
//
// # Safety
// `pcmci` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_pcmci_tau_max(const struct MlvPcmci *pcmci, size_t *out);

// Writes the MCI partial correlation for source -> target at `lag` steps in
// the past (lag 0 is contemporaneous).
//
// # Safety
// `pcmci` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_pcmci_val(const struct MlvPcmci *pcmci,
                             size_t source,
                             size_t target,
                             size_t lag,
                             double *out);

// Writes the MCI p-value for source -> target at `lag`.
//
// # Safety
// `pcmci` must be a live handle and `out` a valid pointer.
enum MlvStatus mlv_pcmci_pvalue(const struct MlvPcmci *pcmci,
                                size_t source,
                                size_t target,
                                size_t lag,
                                double *out);

// Computes the Markov Violation Score of an analyzed panel. `alpha` is the
// significance level for counting a link; `p_floor` caps the -ln p weight
// (pass 0 for the default 1e-10). Writes the score to `score_out` and the
// number of contributing links to `links_out` (NULL to skip the count).
//
// # Safety
// `pcmci` must be a live handle; `score_out` must be a valid pointer;
// `links_out` is optional.
enum MlvStatus mlv_mvs_compute(const struct MlvPcmci *pcmci,
                               double alpha,
                               double p_floor,
                               double *score_out,
                               size_t *links_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOVLENS_H */
