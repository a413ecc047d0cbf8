#ifndef CLUSTERSCOPE_H
#define CLUSTERSCOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_IO = 3,
  CS_STATUS_PARSE = 4,
  CS_STATUS_SCHEMA = 5,
  CS_STATUS_CONFIG = 6,
  CS_STATUS_MISSING_ARTIFACT = 7,
  CS_STATUS_EMPTY_COHORT = 8,
  CS_STATUS_PANIC = 9,
} CsStatus;

// A cohort after complete-case filtering, with its standardized features.
typedef struct CsDataset CsDataset;

// The result of a full pipeline run.
typedef struct CsReport CsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *cs_last_error(void);

// Library version, a static string.
const char *cs_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void cs_string_free(char *s);

// Generates the built-in synthetic cohort. `n = 0` keeps the default size.
//
// # Safety
// `out` must be a valid pointer.
enum CsStatus cs_dataset_synth(size_t n, uint64_t seed, struct CsDataset **out);

// Loads a CSV cohort against a JSON column schema. `na_token` may be null.
//
// # Safety
// String arguments must be null-terminated; `out` must be a valid pointer.
enum CsStatus cs_dataset_load_csv(const char *csv_path,
                                  const char *schema_path,
                                  const char *na_token,
                                  struct CsDataset **out);

// Rows kept after complete-case filtering; 0 for null.
//
// # Safety
// `ds` must be null or a live handle.
size_t cs_dataset_n_rows(const struct CsDataset *ds);

// Standardized feature count; 0 for null.
//
// # Safety
// `ds` must be null or a live handle.
size_t cs_dataset_n_features(const struct CsDataset *ds);

// Name of feature `j`, to be released with `cs_string_free`.
//
// # Safety
// `ds` must be a live handle and `out` a valid pointer.
enum CsStatus cs_dataset_feature_name(const struct CsDataset *ds, size_t j, char **out);

// # Safety
// `ds` must be null or a handle not yet freed.
void cs_dataset_free(struct CsDataset *ds);

// K-means with K chosen by silhouette over `k_min..=k_max`. `labels` must
// hold `labels_len >= cs_dataset_n_rows(ds)` entries; `silhouette` may be null.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CsStatus cs_cluster(const struct CsDataset *ds,
                         size_t k_min,
                         size_t k_max,
                         uint64_t seed,
                         size_t *labels,
                         size_t labels_len,
                         size_t *k,
                         double *silhouette);

// Two-sided two-sample t-test; Student or Welch by the variance ratio.
// `statistic` may be null.
//
// # Safety
// `a` and `b` must hold `na` and `nb` values.
enum CsStatus cs_t_test(const double *a,
                        size_t na,
                        const double *b,
                        size_t nb,
                        double *p_value,
                        double *statistic);

// Two-sided Fisher exact test on `[[a, b], [c, d]]`.
//
// # Safety
// `p_value` must be a valid pointer.
enum CsStatus cs_fisher_exact(uint64_t a, uint64_t b, uint64_t c, uint64_t d, double *p_value);

// Chi-square (or Fisher for sparse 2x2) test on a row-major `rows x cols` table.
//
// # Safety
// `table` must hold `rows * cols` counts.
enum CsStatus cs_contingency_test(const uint64_t *table, size_t rows, size_t cols, double *p_value);

// Runs the whole pipeline into `out_dir`. `config_json` may be null for the
// defaults; otherwise its top-level keys override the default configuration.
//
// # Safety
// String arguments must be null-terminated; `out` must be a valid pointer.
enum CsStatus cs_run(const char *config_json, const char *out_dir, struct CsReport **out);

// Report as pretty JSON, identical to `report.json`.
//
// # Safety
// `r` must be a live handle and `out` a valid pointer.
enum CsStatus cs_report_json(const struct CsReport *r, char **out);

// Report as Markdown, identical to `report.md`.
//
// # Safety
// `r` must be a live handle and `out` a valid pointer.
enum CsStatus cs_report_markdown(const struct CsReport *r, char **out);

// Chosen number of clusters; 0 for null.
//
// # Safety
// `r` must be null or a live handle.
size_t cs_report_k(const struct CsReport *r);

// Features with contradictory directions across methods; 0 for null.
//
// # Safety
// `r` must be null or a live handle.
size_t cs_report_conflicts(const struct CsReport *r);

// # Safety
// `r` must be null or a handle not yet freed.
void cs_report_free(struct CsReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLUSTERSCOPE_H */
