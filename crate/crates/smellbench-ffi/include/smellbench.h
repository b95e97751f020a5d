#ifndef SMELLBENCH_H
#define SMELLBENCH_H

/* Generated by cbindgen from smellbench-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible binding.
 */
typedef enum {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_ARGUMENT = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_PARSE_ERROR = 3,
  SB_STATUS_COMPUTE_ERROR = 4,
} SbStatus;

/**
 * Smell types accepted by `sb_classify_difficulty`.
 */
typedef enum {
  SB_SMELL_TYPE_SCATTERED_FUNCTIONALITY = 0,
  SB_SMELL_TYPE_REDUNDANT_ABSTRACTION = 1,
  SB_SMELL_TYPE_UNSTABLE_DEPENDENCY = 2,
  SB_SMELL_TYPE_IMPROPER_API_USAGE = 3,
  SB_SMELL_TYPE_GOD_OBJECT = 4,
  SB_SMELL_TYPE_HUB_LIKE_DEPENDENCY = 5,
  SB_SMELL_TYPE_CYCLIC_DEPENDENCY = 6,
} SbSmellType;

/**
 * Difficulty tiers returned by `sb_classify_difficulty`.
 */
typedef enum {
  SB_DIFFICULTY_EASY = 0,
  SB_DIFFICULTY_MEDIUM = 1,
  SB_DIFFICULTY_HARD = 2,
} SbDifficulty;

/**
 * Opaque detection-report handle.
 */
typedef struct SbReport SbReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Pointer to the thread-local message for the most recent failure, or
 * null when the last call succeeded. Valid until the next failing call on
 * this thread.
 */
const char *sb_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

/**
 * Parse a detection report from a UTF-8 JSON buffer into an opaque handle.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` to a writable
 * pointer slot. A handle returned here must be released with
 * [`sb_report_free`].
 */
SbStatus sb_report_parse(const uint8_t *data, uintptr_t len, SbReport **out);

/**
 * Release a handle returned by [`sb_report_parse`]. Null is a no-op.
 *
 * # Safety
 * `report` must be a pointer previously returned by `sb_report_parse`
 * that has not been freed.
 */
void sb_report_free(SbReport *report);

/**
 * Number of smell instances in a parsed report.
 *
 * # Safety
 * `report` must be a live handle from `sb_report_parse`.
 */
uintptr_t sb_report_instance_count(const SbReport *report);

/**
 * Net smell delta between two parsed reports.
 *
 * # Safety
 * Both handles must be live; the out-pointers must be writable.
 */
SbStatus sb_diff_reports(const SbReport *pre,
                         const SbReport *post,
                         uintptr_t *out_resolved,
                         uintptr_t *out_introduced,
                         int64_t *out_net);

/**
 * Difficulty tier for a benchmark-eligible smell type and metric value.
 *
 * # Safety
 * `out` must be writable.
 */
SbStatus sb_classify_difficulty(SbSmellType smell_type, double metric_value, SbDifficulty *out);

/**
 * Severity-proportional per-task score, clamped to [-1, 1].
 *
 * # Safety
 * `out` must be writable.
 */
SbStatus sb_severity_score(double sev_old, double sev_new, double *out);

/**
 * Weighted effectiveness E = 0.60*tp + 0.20*fp + 0.20*partial.
 */
double sb_weighted_effectiveness(double tp, double fp, double partial);

/**
 * Cohen's kappa over two equally long rating arrays of category indices.
 * `quadratic` selects quadratic disagreement weights.
 *
 * # Safety
 * `a` and `b` must point to `len` readable values; `out` must be writable.
 */
SbStatus sb_cohen_kappa(const uintptr_t *a,
                        const uintptr_t *b,
                        uintptr_t len,
                        uintptr_t categories,
                        bool quadratic,
                        double *out);

/**
 * Fleiss' kappa over a row-major item x category count matrix.
 *
 * # Safety
 * `counts` must point to `items * categories` readable values; `out` must
 * be writable.
 */
SbStatus sb_fleiss_kappa(const uintptr_t *counts,
                         uintptr_t items,
                         uintptr_t categories,
                         double *out);

/**
 * Chi-square statistic implied by a Kendall's W value: `m(n-1)W` on
 * `n-1` degrees of freedom.
 *
 * # Safety
 * Out-pointers must be writable when non-null.
 */
SbStatus sb_kendall_chi_square(double w,
                               uintptr_t rankings,
                               uintptr_t subjects,
                               double *out_chi2,
                               uintptr_t *out_df);

/**
 * Two-sided Wilcoxon signed-rank test on paired arrays.
 *
 * # Safety
 * `x` and `y` must point to `len` readable values; out-pointers must be
 * writable when non-null.
 */
SbStatus sb_wilcoxon_signed_rank(const double *x,
                                 const double *y,
                                 uintptr_t len,
                                 double *out_statistic,
                                 double *out_p);

/**
 * Holm step-down adjustment in place: `adjusted` receives `len` values.
 *
 * # Safety
 * `p` must point to `len` readable values and `adjusted` to `len`
 * writable slots.
 */
SbStatus sb_holm_adjust(const double *p, uintptr_t len, double *adjusted);

/**
 * Cliff's delta between two samples.
 *
 * # Safety
 * `a`/`b` must point to `a_len`/`b_len` readable values; `out` must be
 * writable.
 */
SbStatus sb_cliffs_delta(const double *a,
                         uintptr_t a_len,
                         const double *b,
                         uintptr_t b_len,
                         double *out);

/**
 * Percentile bootstrap CI of the mean, deterministic under `seed`.
 *
 * # Safety
 * `samples` must point to `len` readable values; out-pointers must be
 * writable when non-null.
 */
SbStatus sb_bootstrap_ci(const double *samples,
                         uintptr_t len,
                         uintptr_t resamples,
                         double alpha,
                         uint64_t seed,
                         double *out_lo,
                         double *out_hi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMELLBENCH_H */
