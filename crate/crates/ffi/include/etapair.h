#ifndef ETAPAIR_H
#define ETAPAIR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Feedback law applied after activation.
typedef enum EtapairControl {
  ETAPAIR_CONTROL_NONE = 0,
  ETAPAIR_CONTROL_LYAPUNOV_UP = 1,
  ETAPAIR_CONTROL_LYAPUNOV_DOWN = 2,
  ETAPAIR_CONTROL_ASYMPTOTIC = 3,
} EtapairControl;

typedef enum EtapairStatus {
  ETAPAIR_STATUS_OK = 0,
  ETAPAIR_STATUS_NULL_POINTER = 1,
  ETAPAIR_STATUS_INVALID_ARGUMENT = 2,
  ETAPAIR_STATUS_CONFIG = 3,
  ETAPAIR_STATUS_NUMERICAL = 4,
  ETAPAIR_STATUS_CACHE = 5,
  ETAPAIR_STATUS_IO = 6,
  ETAPAIR_STATUS_OUT_OF_RANGE = 7,
  ETAPAIR_STATUS_PANIC = 99,
} EtapairStatus;

typedef struct EtapairState EtapairState;

typedef struct EtapairSystem EtapairSystem;

typedef struct EtapairTrajectory EtapairTrajectory;

// sin²-envelope pump pulse.
typedef struct EtapairPulse {
  double omega_p;
  double phi0;
  uint32_t n_p;
  double t_l;
  double t_r;
} EtapairPulse;

// One recorded time step.
typedef struct EtapairSample {
  double t;
  double phi;
  double eta2_per_l;
  double q;
  double norm;
  bool control_active;
} EtapairSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *etapair_last_error(void);

// Half-filled chain with `sites` sites. `cache_dir` may be null.
//
// # Safety
// `cache_dir` is null or a NUL-terminated string; `out_system` is writable.
enum EtapairStatus etapair_system_new(uint32_t sites,
                                      double interaction,
                                      double hopping,
                                      const char *cache_dir,
                                      struct EtapairSystem **out_system);

// # Safety
// `system` is null or came from [`etapair_system_new`] and is not used afterwards.
void etapair_system_free(struct EtapairSystem *system);

// Hilbert-space dimension, or 0 for a null handle.
//
// # Safety
// `system` is null or a live handle.
size_t etapair_system_dim(const struct EtapairSystem *system);

// Largest `|λ|` of `Q` and largest eigenvalue of `η²`.
//
// # Safety
// `system` is a live handle; the out pointers are null or writable.
enum EtapairStatus etapair_system_extremes(const struct EtapairSystem *system,
                                           double *q_max,
                                           double *eta_sq_max);

// Ground state of the field-free Hamiltonian.
//
// # Safety
// `system` is a live handle; `out_state` is writable.
enum EtapairStatus etapair_ground_state(const struct EtapairSystem *system,
                                        double *energy,
                                        struct EtapairState **out_state);

// # Safety
// `state` is null or a live handle not used afterwards.
void etapair_state_free(struct EtapairState *state);

// `<η²>/L` of `state`.
//
// # Safety
// Handles are live; `out_value` is writable.
enum EtapairStatus etapair_state_eta2_per_l(const struct EtapairSystem *system,
                                            const struct EtapairState *state,
                                            double *out_value);

// Evolves the ground state under `pulse`, optionally handing over to
// `control` with the default activation rule of that law (windowed
// average for enhancement and the asymptotic law, post-delay integral for
// suppression). `out_state` may be null.
//
// # Safety
// Handles and `pulse` are valid; `out_trajectory` is writable.
enum EtapairStatus etapair_evolve_pulse(const struct EtapairSystem *system,
                                        const struct EtapairPulse *pulse,
                                        enum EtapairControl control,
                                        struct EtapairTrajectory **out_trajectory,
                                        struct EtapairState **out_state);

// Runs the evolution described by a TOML run configuration, on `system`
// (whose parameters must match the `[system]` block).
//
// # Safety
// `system` is live, `config_toml` is NUL-terminated, `out_trajectory` is writable.
enum EtapairStatus etapair_evolve_config(const struct EtapairSystem *system,
                                         const char *config_toml,
                                         struct EtapairTrajectory **out_trajectory);

// # Safety
// `trajectory` is null or a live handle not used afterwards.
void etapair_trajectory_free(struct EtapairTrajectory *trajectory);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `trajectory` is null or live.
size_t etapair_trajectory_len(const struct EtapairTrajectory *trajectory);

// # Safety
// `trajectory` is live; `out_sample` is writable.
enum EtapairStatus etapair_trajectory_sample(const struct EtapairTrajectory *trajectory,
                                             size_t index,
                                             struct EtapairSample *out_sample);

// Activation time of the feedback law; NaN when it never activated.
//
// # Safety
// `trajectory` is null or live.
double etapair_trajectory_t_act(const struct EtapairTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ETAPAIR_H */
