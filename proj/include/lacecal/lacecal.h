#ifndef LACECAL_H
#define LACECAL_H

/*
 * C interface to the lacecal toolkit.
 *
 * Every fallible call returns an lc_status. On failure the message is
 * available from lc_last_error() on the same thread until the next call.
 * Strings and arrays returned through out-parameters are owned by the caller
 * and released with lc_free(); handles are released with their *_free call.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(LC_BUILDING_LIBRARY)
#define LC_API __declspec(dllexport)
#else
#define LC_API __declspec(dllimport)
#endif
#else
#define LC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lc_status {
    LC_OK = 0,
    LC_ERR_INVALID_ARGUMENT = 1,
    LC_ERR_IO = 2,
    LC_ERR_PARSE = 3,
    LC_ERR_DATA = 4,
    LC_ERR_UNDEFINED = 5,
    LC_ERR_INTERNAL = 6
} lc_status;

typedef enum lc_split {
    LC_SPLIT_ALL = 0,
    LC_SPLIT_VALIDATION = 1,
    LC_SPLIT_TEST = 2
} lc_split;

typedef struct lc_dataset lc_dataset;
typedef struct lc_model lc_model;
typedef struct lc_report lc_report;
typedef struct lc_scores lc_scores;

LC_API const char* lc_version(void);
LC_API const char* lc_status_name(lc_status status);
LC_API const char* lc_last_error(void);
LC_API void lc_free(void* ptr);

/* Datasets */

LC_API lc_status lc_dataset_read(const char* path, lc_dataset** out);
LC_API lc_status lc_dataset_parse(const char* text, size_t length, lc_dataset** out);
/* Refuses datasets with violations. `bytes` may be NULL. */
LC_API lc_status lc_dataset_write(const lc_dataset* dataset, const char* path, int gzip, size_t* bytes);
LC_API lc_status lc_dataset_serialize(const lc_dataset* dataset, char** text);
LC_API void lc_dataset_free(lc_dataset* dataset);

LC_API lc_status lc_dataset_shape(const lc_dataset* dataset, size_t* records, size_t* choices, size_t* layers,
                                  int* normalized);
/* Sorted language tags as a JSON array. */
LC_API lc_status lc_dataset_languages(const lc_dataset* dataset, char** json);
LC_API size_t lc_dataset_violation_count(const lc_dataset* dataset);
LC_API lc_status lc_dataset_violation_text(const lc_dataset* dataset, size_t index, char** text);
/* Per-record confidence at `layer` (0 = final) and correctness, in dataset
 * order for records passing `split`. Arrays hold `count` entries. */
LC_API lc_status lc_dataset_confidences(const lc_dataset* dataset, lc_split split, size_t layer, double** confidences,
                                        unsigned char** correct, size_t* count);

/* Exactly one of `preset` and `profiles_json` must be non-NULL. */
LC_API lc_status lc_simulate(const char* preset, const char* profiles_json, size_t n, uint64_t seed,
                             lc_dataset** out);
/* Newline-separated preset names. */
LC_API lc_status lc_preset_names(char** text);

/* Metrics over a dataset at a fixed layer (0 = final). With by_language = 0
 * all records are pooled under the tag "all". */
LC_API lc_status lc_metrics_report(const lc_dataset* dataset, lc_split split, size_t layer, int bins, int by_language,
                                   lc_report** out);
/* Confidence behaviour table (CSV). */
LC_API lc_status lc_confidence_stats(const lc_dataset* dataset, lc_split split, size_t layer, char** csv);

/* Layer ECE profile CSV and per-layer entropy CSV. Either output may be NULL. */
LC_API lc_status lc_layer_sweep(const lc_dataset* dataset, lc_split split, int bins, char** ece_csv,
                                char** entropy_csv);
LC_API lc_status lc_select_best_layer(const lc_dataset* dataset, lc_split split, int bins, size_t* layer);
/* `language` may be NULL for the language-averaged set. The final-layer
 * fallback {L} is reported through `final_fallback`. */
LC_API lc_status lc_select_good_layers(const lc_dataset* dataset, lc_split split, int bins, const char* language,
                                       size_t** layers, size_t* count, int* final_fallback);

/* Method models */

/* method: final | best | ensemble | lace; calibrator: none | temperature |
 * isotonic. Fits on validation records only. */
LC_API lc_status lc_fit(const lc_dataset* dataset, const char* method, const char* calibrator, int bins,
                        size_t min_samples, lc_model** out);
/* Best-layer method at a fixed 1-based `layer` instead of the profile's choice. */
LC_API lc_status lc_fit_best_layer(const lc_dataset* dataset, size_t layer, const char* calibrator, int bins,
                                   lc_model** out);
LC_API lc_status lc_model_to_json(const lc_model* model, char** json);
LC_API lc_status lc_model_from_json(const char* json, lc_model** out);
LC_API void lc_model_free(lc_model* model);
/* Scores the test records. */
LC_API lc_status lc_apply(const lc_model* model, const lc_dataset* dataset, lc_scores** out);
LC_API lc_status lc_evaluate(const lc_model* model, const lc_dataset* dataset, int bins, lc_report** out);

/* Scored records (confidence sidecar) */

LC_API lc_status lc_scores_read(const char* path, lc_scores** out);
LC_API lc_status lc_scores_parse(const char* csv, lc_scores** out);
LC_API lc_status lc_scores_to_csv(const lc_scores* scores, char** csv);
LC_API size_t lc_scores_count(const lc_scores* scores);
LC_API void lc_scores_free(lc_scores* scores);
LC_API lc_status lc_scores_report(const lc_scores* scores, int bins, const char* method, lc_report** out);
/* Reliability bins of one language (NULL = all records) as CSV, and
 * optionally an SVG diagram titled `title`. `ece` may be NULL. */
LC_API lc_status lc_scores_reliability(const lc_scores* scores, const char* language, int bins, const char* title,
                                       char** csv, char** svg, double* ece);
/* metric: ece | brier | auroc | accuracy | mean_confidence. macro != 0
 * averages over languages and resamples within each language. */
LC_API lc_status lc_scores_bootstrap(const lc_scores* scores, const char* metric, size_t resamples, double level,
                                     uint64_t seed, int bins, int macro, char** json);

/* Reports */

LC_API lc_status lc_report_to_json(const lc_report* report, char** json);
LC_API lc_status lc_report_from_json(const char* json, lc_report** out);
LC_API lc_status lc_report_to_csv(const lc_report* report, char** csv);
LC_API lc_status lc_report_macro(const lc_report* report, const char* metric, double* value, int* defined);
LC_API void lc_report_free(lc_report* report);
/* Group means from a groups config ({name: [tags]}). Either output may be NULL. */
LC_API lc_status lc_report_groups(const lc_report* report, const char* groups_json, char** json, char** csv);
/* Correlation of a metric against a `language,share` CSV table. */
LC_API lc_status lc_report_resource_correlation(const lc_report* report, const char* resource_csv,
                                                const char* metric, char** json);

/* Primitives */

LC_API lc_status lc_ece(const double* confidences, const unsigned char* correct, size_t n, int bins, double* out);
LC_API lc_status lc_brier(const double* confidences, const unsigned char* correct, size_t n, double* out);
/* `defined` is set to 0 for single-class input, and `out` is left untouched. */
LC_API lc_status lc_auroc(const double* scores, const unsigned char* correct, size_t n, double* out, int* defined);
LC_API lc_status lc_entropy(const double* distribution, size_t n, double* out);

typedef struct lc_correlation {
    double pearson, spearman, kendall_tau_b;
    double pearson_p, spearman_p, kendall_p;
    int pearson_defined, spearman_defined, kendall_defined;
} lc_correlation;

LC_API lc_status lc_correlations(const double* x, const double* y, size_t n, lc_correlation* out);

#ifdef __cplusplus
}
#endif

#endif /* LACECAL_H */
