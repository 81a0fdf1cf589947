#ifndef HYPEREPP_H
#define HYPEREPP_H

/* Generated by cbindgen from src/lib.rs; edits are overwritten. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HeStatus {
  HE_STATUS_OK = 0,
  HE_STATUS_INVALID_STATE = 1,
  HE_STATUS_INVALID_ARGUMENT = 2,
  HE_STATUS_CONTRACT_VIOLATION = 3,
  HE_STATUS_CLASSIFICATION_UNDEFINED = 4,
  HE_STATUS_NON_PURIFIABLE = 5,
  HE_STATUS_IO = 6,
  HE_STATUS_NULL_POINTER = 7,
  HE_STATUS_PANIC = 8,
} HeStatus;

typedef enum HeBell {
  HE_BELL_PHI_PLUS = 0,
  HE_BELL_PHI_MINUS = 1,
  HE_BELL_PSI_PLUS = 2,
  HE_BELL_PSI_MINUS = 3,
} HeBell;

/**
 * Result of a purification run.
 */
typedef struct HeReport HeReport;

/**
 * A 64×64 density matrix.
 */
typedef struct HeState HeState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next call on the same thread.
 */
const char *he_last_error(void);

/**
 * Runs the purification protocol. `trials == 0` enumerates every branch;
 * otherwise `trials` trajectories are sampled from `seed`.
 *
 * # Safety
 * `out_report` must be a valid pointer to writable storage.
 */
enum HeStatus he_run_epp(double a,
                         double b,
                         double c,
                         double d,
                         double dphi_s,
                         double dphi_f,
                         uint64_t seed,
                         uint64_t trials,
                         struct HeReport **out_report);

/**
 * # Safety
 * `r` must come from [`he_run_epp`]; `out_count` must be writable.
 */
enum HeStatus he_report_branch_count(const struct HeReport *r, size_t *out_count);

/**
 * # Safety
 * `r` must come from [`he_run_epp`]; `out_value` must be writable.
 */
enum HeStatus he_report_total_probability(const struct HeReport *r, double *out_value);

/**
 * Smallest and largest final fidelity over the branches.
 *
 * # Safety
 * `r` must come from [`he_run_epp`]; both out pointers must be writable.
 */
enum HeStatus he_report_fidelity_range(const struct HeReport *r, double *out_min, double *out_max);

/**
 * JSON rendering of the report. Free the string with [`he_string_free`].
 *
 * # Safety
 * `r` must come from [`he_run_epp`]; `out_json` must be writable.
 */
enum HeStatus he_report_to_json(const struct HeReport *r, char **out_json);

/**
 * # Safety
 * `r` must come from [`he_run_epp`] and not be used afterwards. Null is ignored.
 */
void he_report_free(struct HeReport *r);

/**
 * # Safety
 * `s` must be a string returned by this library. Null is ignored.
 */
void he_string_free(char *s);

/**
 * The ideal hyperentangled source state.
 *
 * # Safety
 * `out_state` must be writable.
 */
enum HeStatus he_source_state(struct HeState **out_state);

/**
 * Parses a `{basis, re, im}` dump. Wrong sizes and invalid matrices fail.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out_state` must be writable.
 */
enum HeStatus he_state_from_json(const char *json, struct HeState **out_state);

/**
 * # Safety
 * `s` must come from this library; `out_json` must be writable.
 */
enum HeStatus he_state_to_json(const struct HeState *s, char **out_json);

/**
 * Fidelity of the polarization marginal to a Bell state.
 *
 * # Safety
 * `s` must come from this library; `out_value` must be writable.
 */
enum HeStatus he_state_polarization_fidelity(const struct HeState *s,
                                             enum HeBell target,
                                             double *out_value);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void he_state_free(struct HeState *s);

/**
 * `[1 + (a+c−b−d)·cos Δφ_s]/2`.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum HeStatus he_bitflip_fidelity_formula(double a,
                                          double b,
                                          double c,
                                          double d,
                                          double dphi_s,
                                          double *out_value);

/**
 * One round of recursive purification: new fidelity and success probability.
 *
 * # Safety
 * Both out pointers must be writable.
 */
enum HeStatus he_pan_purify_round(double f, double *out_fidelity, double *out_probability);

/**
 * Classifies a polarization state given by four amplitudes over
 * HH, HV, VH, VV.
 *
 * # Safety
 * `re` and `im` must each point to four doubles; `out_label` must be writable.
 */
enum HeStatus he_nbsa_classify(const double *re, const double *im, enum HeBell *out_label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPEREPP_H */
