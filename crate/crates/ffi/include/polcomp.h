#ifndef POLCOMP_H
#define POLCOMP_H

#include <stdint.h>

// Result code of every fallible call.
typedef enum PolcompStatus {
  POLCOMP_STATUS_OK = 0,
  POLCOMP_STATUS_NULL_POINTER = 1,
  POLCOMP_STATUS_INVALID_ARGUMENT = 2,
  POLCOMP_STATUS_CONFIG = 3,
  POLCOMP_STATUS_IO = 4,
  POLCOMP_STATUS_SIMULATION = 5,
  POLCOMP_STATUS_DECOMPOSITION_FAILED = 6,
  POLCOMP_STATUS_PANIC = 7,
} PolcompStatus;

// Stepwise optimize-run handle.
typedef struct PolcompSession PolcompSession;

// Retarder stack handle.
typedef struct PolcompStack PolcompStack;

typedef struct PolcompSearchParams {
  uint32_t points_per_iteration;
  // Volts.
  double shrink_gain;
  double shrink_exponent;
  double qber_threshold;
  double r_min;
  double r_max;
} PolcompSearchParams;

// 2x2 complex matrix, row-major: element (r, c) is `re[2r + c] + i im[2r + c]`.
typedef struct PolcompUnitary {
  double re[4];
  double im[4];
} PolcompUnitary;

// One completed search iteration.
typedef struct PolcompIteration {
  uint64_t iteration;
  // Simulated seconds since the start of the run.
  double elapsed_s;
  double best_qber;
  // Noise-free QBER at the new center when it was measured.
  double center_true_qber;
  double center[4];
  double range_v;
} PolcompIteration;

typedef struct PolcompRunSummary {
  uint64_t seed;
  uint64_t iterations;
  double initial_qber;
  double final_qber;
  // -1 when the run never reached the convergence level.
  int64_t iters_to_floor;
  uint64_t recovered_jumps;
} PolcompRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code. Never null.
const char *polcomp_status_message(enum PolcompStatus status);

// Message for the last failed call on this thread, or null after a
// successful call. Valid until the next call into this library on the same
// thread.
const char *polcomp_last_error(void);

// Library version, e.g. `"0.1.0"`.
const char *polcomp_version(void);

// Fills `out` with the default search parameters.
//
// # Safety
// `out` must be null or point to writable memory for one struct.
enum PolcompStatus polcomp_search_params_default(struct PolcompSearchParams *out);

// Search range for a best QBER `q_min`: `clamp(A max(q_min - threshold, 0)^B, r_min, r_max)`.
// `params` may be null for the defaults.
//
// # Safety
// `params` must be null or valid; `out` must be null or writable.
enum PolcompStatus polcomp_shrink_radius(double q_min,
                                         const struct PolcompSearchParams *params,
                                         double *out);

// Creates a stack with the default calibration on all four channels.
//
// # Safety
// `out` must be null or writable.
enum PolcompStatus polcomp_stack_new_default(struct PolcompStack **out);

// Creates the stack described by the `[lcvr]` section of a TOML scenario.
// Relative calibration-file paths resolve against the working directory.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` null or writable.
enum PolcompStatus polcomp_stack_from_toml(const char *toml, struct PolcompStack **out);

// Releases a stack. Null is ignored.
//
// # Safety
// `stack` must come from a `polcomp_stack_*` constructor and not be used again.
void polcomp_stack_free(struct PolcompStack *stack);

// Retardance in radians of channel `channel` (0..=3) at `voltage`.
//
// # Safety
// `stack` must be a live handle or null; `out` null or writable.
enum PolcompStatus polcomp_stack_retardance(const struct PolcompStack *stack,
                                            uint32_t channel,
                                            double voltage,
                                            double *out);

// Jones matrix of the stack at four voltages (plate 1 first in the light path).
//
// # Safety
// `voltages` must point to 4 doubles; `stack` live or null; `out` null or writable.
enum PolcompStatus polcomp_stack_unitary(const struct PolcompStack *stack,
                                         const double *voltages,
                                         struct PolcompUnitary *out);

// Voltages realizing `target` up to global phase. On success writes 4
// doubles to `voltages_out` and the trace fidelity to `fidelity_out`; on
// `DECOMPOSITION_FAILED` writes the closest setting found and its fidelity.
// `fidelity_out` may be null.
//
// # Safety
// `voltages_out` must point to 4 writable doubles; other pointers valid or null.
enum PolcompStatus polcomp_stack_decompose(const struct PolcompStack *stack,
                                           const struct PolcompUnitary *target,
                                           double *voltages_out,
                                           double *fidelity_out);

// Starts a stepwise optimize run. `toml` may be null for the default
// scenario; `seed` replaces the configured seed.
//
// # Safety
// `toml` null or NUL-terminated; `out` null or writable.
enum PolcompStatus polcomp_session_new(const char *toml,
                                       uint64_t seed,
                                       struct PolcompSession **out);

// Runs one search iteration and reports it through `out` (may be null).
//
// # Safety
// `session` must be a live handle or null; `out` null or writable.
enum PolcompStatus polcomp_session_step(struct PolcompSession *session,
                                        struct PolcompIteration *out);

// Noise-free QBER at the current search center, at the current fiber state.
//
// # Safety
// `session` live or null; `out` null or writable.
enum PolcompStatus polcomp_session_true_qber(const struct PolcompSession *session, double *out);

// Releases a session. Null is ignored.
//
// # Safety
// `session` must come from `polcomp_session_new` and not be used again.
void polcomp_session_free(struct PolcompSession *session);

// Runs the scenario in `toml` to completion. A non-null `out_prefix`
// overrides `run.output_prefix`; CSV files are written only when a prefix is
// set. `out` may be null.
//
// # Safety
// `toml` must be NUL-terminated; `out_prefix` null or NUL-terminated; `out`
// null or writable.
enum PolcompStatus polcomp_run_scenario(const char *toml,
                                        const char *out_prefix,
                                        struct PolcompRunSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLCOMP_H */
