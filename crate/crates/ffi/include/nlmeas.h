#ifndef NLMEAS_H
#define NLMEAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum NlmStatus {
  NLM_STATUS_OK = 0,
  NLM_STATUS_NULL_POINTER = 1,
  // Unknown family name, bad UTF-8, or an amplitude buffer of the wrong length.
  NLM_STATUS_INVALID_ARGUMENT = 2,
  NLM_STATUS_STRUCTURAL = 3,
  NLM_STATUS_VALIDATION = 4,
  NLM_STATUS_LOCALITY = 5,
  NLM_STATUS_RESOURCE = 6,
  NLM_STATUS_PROTOCOL = 7,
  // Branch index past the end.
  NLM_STATUS_OUT_OF_RANGE = 8,
  // A Rust panic was caught at the boundary.
  NLM_STATUS_INTERNAL = 9,
} NlmStatus;

// Opaque handle to a finished protocol run.
typedef struct NlmRun NlmRun;

// Family parameters. Angles in radians; fields a family does not use are ignored.
typedef struct NlmParams {
  double alpha;
  double beta;
  double phi1;
  double phi2;
  uint32_t n_ebits;
  // Row-major 2×2 twist for `twist4x4` as interleaved (re, im) pairs,
  // 8 doubles. Null means the identity.
  const double *u_b;
} NlmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Runs `family` on the input with amplitudes `re[i] + i·im[i]`, `len` of
// them in register order (first qubit most significant). The input is
// normalized. `im` may be null for real amplitudes.
//
// # Safety
// `family` must be a NUL-terminated string, `params` valid, `re` (and `im`
// if non-null) readable for `len` doubles, `out` writable.
enum NlmStatus nlm_run_create(const char *family,
                              const struct NlmParams *params,
                              const double *re,
                              const double *im,
                              size_t len,
                              struct NlmRun **out);

// Runs `family` on its eigenstate `k` (1-based).
//
// # Safety
// Same pointer requirements as [`nlm_run_create`].
enum NlmStatus nlm_run_create_eigen(const char *family,
                                    const struct NlmParams *params,
                                    size_t k,
                                    struct NlmRun **out);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must come from this library and not be used afterwards.
void nlm_run_free(struct NlmRun *run);

// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_branch_count(const struct NlmRun *run, size_t *out);

// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_branch_probability(const struct NlmRun *run, size_t i, double *out);

// Inferred eigenstate index of branch `i`, 1-based; 0 means failure.
//
// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_branch_inferred(const struct NlmRun *run, size_t i, uint32_t *out);

// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_success_probability(const struct NlmRun *run, double *out);

// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_ebits_consumed(const struct NlmRun *run, uint32_t *out);

// Entanglement left between the parties' unmeasured ancillas, in bits.
//
// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_residual_entanglement(const struct NlmRun *run, double *out);

// Serializes the run as JSON. Free the string with [`nlm_string_free`].
//
// # Safety
// `run` from this library, `out` writable.
enum NlmStatus nlm_run_to_json(const struct NlmRun *run, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void nlm_string_free(char *s);

// Message of the last failure on this thread, or null. Valid until the next
// failing call on the same thread.
const char *nlm_last_error(void);

// Library version, static.
const char *nlm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLMEAS_H */
