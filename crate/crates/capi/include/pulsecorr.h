#ifndef PULSECORR_H
#define PULSECORR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PcStatus {
  PcOk = 0,
  PcNullArgument = 1,
  PcInvalidArgument = 2,
  PcParseError = 3,
  PcDimensionMismatch = 4,
  PcIoError = 5,
  PcIncompatible = 6,
  PcNotConverged = 7,
  PcInternalError = 8,
} PcStatus;

/**
 * Opaque handle: trained network weights.
 */
typedef struct PcModel PcModel;

/**
 * Opaque handle: an n x 2 set of control pulses.
 */
typedef struct PcPulses PcPulses;

/**
 * Opaque handle: a fully-described two-qubit system.
 */
typedef struct PcSystem PcSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *pc_status_message(enum PcStatus status);

/**
 * Create a system from a drift spec (e.g. "sy", "0.8sx+0.2sy", "none"), a
 * drift strength, a Lindblad preset ("none", "lind1", "lind2", "lind3")
 * with its rate, and the time grid.
 *
 * # Safety
 * `drift` and `lindblad` must be valid NUL-terminated strings or NULL
 * (NULL means "none"); `out` must be a valid pointer. The returned handle
 * must be released with [`pc_system_free`].
 */
enum PcStatus pc_system_new(const char *drift,
                            double gamma,
                            const char *lindblad,
                            double lindblad_rate,
                            double horizon,
                            uintptr_t slots,
                            struct PcSystem **out);

/**
 * Release a system handle. NULL is ignored.
 *
 * # Safety
 * `sys` must be NULL or a pointer from [`pc_system_new`], not yet freed.
 */
void pc_system_free(struct PcSystem *sys);

/**
 * Number of time slots of the system; 0 on NULL.
 *
 * # Safety
 * `sys` must be NULL or a valid handle.
 */
uintptr_t pc_system_slots(const struct PcSystem *sys);

/**
 * Create pulses from `slots` rows of `[h_x, h_z]` (row-major, `2 * slots`
 * doubles). Every value must lie in [-1, 1].
 *
 * # Safety
 * `values` must point to `2 * slots` readable doubles; `out` must be valid.
 * The returned handle must be released with [`pc_pulses_free`].
 */
enum PcStatus pc_pulses_new(const double *values, uintptr_t slots, struct PcPulses **out);

/**
 * Release a pulse handle. NULL is ignored.
 *
 * # Safety
 * `pulses` must be NULL or an owned handle from this library, not yet freed.
 */
void pc_pulses_free(struct PcPulses *pulses);

/**
 * Number of time slots in a pulse set; 0 on NULL.
 *
 * # Safety
 * `pulses` must be NULL or a valid handle.
 */
uintptr_t pc_pulses_slots(const struct PcPulses *pulses);

/**
 * Copy the pulse values out as `slots` rows of `[h_x, h_z]`.
 *
 * # Safety
 * `out` must point to at least `len` writable doubles and `len` must be at
 * least `2 * slots`.
 */
enum PcStatus pc_pulses_values(const struct PcPulses *pulses, double *out, uintptr_t len);

/**
 * Fidelity `1 - F_err` of evolving the system under the given pulses
 * against the single-qubit target `u` (the full target is `u kron 1`).
 * `target` holds the 2 x 2 matrix as 8 doubles, row-major (re, im) pairs.
 *
 * # Safety
 * `target` must point to 8 readable doubles; `fidelity_out` must be valid.
 */
enum PcStatus pc_fidelity(const struct PcSystem *sys,
                          const struct PcPulses *pulses,
                          const double *target,
                          double *fidelity_out);

/**
 * Sample a Haar-random single-qubit target for `(seed, stream)` and
 * optimize drift-free pulses for it. The system must be drift-free and
 * closed. On success writes the admitted pulses, the achieved fidelity,
 * and (when non-NULL) the sampled target as 8 doubles. Pass `max_iters = 0`
 * for the default iteration budget.
 *
 * # Safety
 * Out pointers must be valid; `u_target_out`, when non-NULL, must point to
 * 8 writable doubles. The returned pulses must be freed with
 * [`pc_pulses_free`].
 */
enum PcStatus pc_generate_ncp(const struct PcSystem *sys,
                              uint64_t seed,
                              uint64_t stream,
                              uintptr_t max_iters,
                              double *u_target_out,
                              double *fidelity_out,
                              struct PcPulses **pulses_out);

/**
 * Load trained network weights from a checkpoint file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid. The
 * returned handle must be released with [`pc_model_free`].
 */
enum PcStatus pc_model_load(const char *path, struct PcModel **out);

/**
 * Release a model handle. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a pointer from [`pc_model_load`], not yet freed.
 */
void pc_model_free(struct PcModel *model);

/**
 * Apply the correction network: `nnDCP = ANN(NCP)`.
 *
 * # Safety
 * All pointers must be valid handles / out slots. The returned pulses must
 * be freed with [`pc_pulses_free`].
 */
enum PcStatus pc_model_apply(const struct PcModel *model,
                             const struct PcPulses *ncp,
                             struct PcPulses **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSECORR_H */
