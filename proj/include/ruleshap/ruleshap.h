/* Licensed under the Apache License 2.0 (see LICENSE file). */

/*
 * C interface to the ruleshap library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an rs_status; on failure rs_last_error()
 * describes the problem for the calling thread. Strings returned through
 * char** out-parameters are heap allocated and released with
 * rs_string_free. Structured values cross the boundary as JSON text.
 */

#ifndef RULESHAP_H
#define RULESHAP_H

#include <stddef.h>

#if defined(_WIN32)
#define RS_API __declspec(dllexport)
#else
#define RS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rs_status {
  RS_OK = 0,
  RS_ERR_INVALID_ARGUMENT = 1,
  RS_ERR_SCHEMA = 2,
  RS_ERR_RANGE = 3,
  RS_ERR_PARSE = 4,
  RS_ERR_EMPTY_INPUT = 5,
  RS_ERR_DOMAIN = 6,
  RS_ERR_DIMENSION = 7,
  RS_ERR_IO = 8,
  RS_ERR_CONFIG = 9,
  RS_ERR_PROVIDER = 10,
  RS_ERR_EVALUATION = 11,
  RS_ERR_CONTRACT = 12,
  RS_ERR_INSUFFICIENT_DATA = 13,
  RS_ERR_INTERNAL = 100
} rs_status;

typedef struct rs_matrix rs_matrix;
typedef struct rs_simulation rs_simulation;

RS_API const char* rs_version(void);
RS_API const char* rs_status_name(rs_status status);
/* Message of the last failed call on this thread; empty after success. */
RS_API const char* rs_last_error(void);
RS_API void rs_string_free(char* s);

/* Abstraction matrices (CSV with topic_id, 11 inputs, 7 outputs). */
RS_API rs_status rs_matrix_load(const char* path, rs_matrix** out);
RS_API rs_status rs_matrix_parse(const char* csv_text, rs_matrix** out);
RS_API rs_status rs_matrix_save(const rs_matrix* m, const char* path);
RS_API rs_status rs_matrix_format(const rs_matrix* m, char** out_csv);
RS_API size_t rs_matrix_rows(const rs_matrix* m);
RS_API void rs_matrix_free(rs_matrix* m);

/* Simulator. config_json: {"seed", "population", "biases", "noise", "base"}. */
RS_API rs_status rs_simulate(const char* config_json, rs_simulation** out);
RS_API rs_status rs_simulation_matrix(const rs_simulation* s, rs_matrix** out);
RS_API rs_status rs_simulation_truths(const rs_simulation* s, char** out_json);
RS_API rs_status rs_simulation_save_topics(const rs_simulation* s, const char* path);
RS_API void rs_simulation_free(rs_simulation* s);

/* JSON array of the accepted method names. */
RS_API rs_status rs_method_names(char** out_json);

/*
 * Runs one method on one target. params_json may be NULL or an object with
 * any of: seed, n_trees, max_depth, learning_rate, l2_lambda,
 * min_child_weight, n_permutations, n_folds, n_alphas, alpha_min_ratio,
 * alpha (fixed, skips cross-validation), one_standard_error,
 * cart_max_depth, cart_min_samples_leaf.
 */
RS_API rs_status rs_explain(const rs_matrix* m, const char* method, const char* target,
                            const char* params_json, char** out_ruleset_json);

/*
 * Runs methods x targets and scores them. options_json: {"methods",
 * "targets", "k", "seed", "jobs", "certificates", "params"}; missing
 * methods/targets mean all. truths_json may be NULL.
 */
RS_API rs_status rs_audit(const rs_matrix* m, const char* options_json, const char* truths_json,
                          char** out_report_json, char** out_table);

/* Scores existing rule sets (as written by rs_explain). data may be NULL,
 * which skips correlation certificates. */
RS_API rs_status rs_evaluate(const char* const* ruleset_jsons, size_t n_rulesets,
                             const char* truths_json, const rs_matrix* data,
                             const int* k_values, size_t n_k, char** out_report_json,
                             char** out_table);

/* Distance-correlation certificates for the pairs implied by the truths. */
RS_API rs_status rs_certificates(const rs_matrix* m, const char* truths_json, char** out_csv);

/* Text metrics. */
RS_API rs_status rs_gunning_fog(const char* text, double* out);
RS_API rs_status rs_render_judge_prompt(const char* kind, const char* subject, char** out);
RS_API rs_status rs_parse_judge_response(const char* raw, int* out_score,
                                         char** out_explanation);
/* topics_json: JSON array of strings. */
RS_API rs_status rs_dedup_topics(const char* topics_json, double threshold, char** out_json);

/*
 * Scores topics (CSV with id, domain, text) through live endpoints.
 * config_json: {"judge", "explainer", "sentiment", "subjectivity"} provider
 * objects ({endpoint, model, temperature, top_p, retries, timeout_seconds,
 * api_key_env}), plus "system_instruction", "explain_template",
 * "chunking" ({max_chunk_tokens, avg_chars_per_token}), "cache" (JSON-lines
 * path) and "jobs".
 */
RS_API rs_status rs_abstract(const char* topics_path, const char* config_json, rs_matrix** out);

#ifdef __cplusplus
}
#endif

#endif /* RULESHAP_H */
