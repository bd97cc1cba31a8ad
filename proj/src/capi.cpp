// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/ruleshap.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <set>
#include <string>

#include "json.hpp"
#include "ruleshap/biassim.hpp"
#include "ruleshap/error.hpp"
#include "ruleshap/evaluation.hpp"
#include "ruleshap/pipeline.hpp"
#include "ruleshap/textmetrics.hpp"

struct rs_matrix {
  ruleshap::AbstractionMatrix value;
};

struct rs_simulation {
  ruleshap::Simulation value;
};

namespace {

using nlohmann::json;
using ruleshap::ErrorCode;
using ruleshap::fail;

thread_local std::string g_last_error;

template <typename Fn>
rs_status guard(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return RS_OK;
  } catch (const ruleshap::Error& e) {
    g_last_error = e.what();
    return static_cast<rs_status>(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return RS_ERR_SCHEMA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RS_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_object(const char* text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kConfig, std::string(what) + " must be a JSON object");
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      fail(ErrorCode::kConfig, std::string("unknown ") + what + " key '" + key + "'");
    }
  }
}

ruleshap::MethodConfig method_config(const json& p) {
  static const std::set<std::string> known = {
      "seed",          "n_trees",  "max_depth",       "learning_rate",  "l2_lambda",
      "min_child_weight", "n_permutations", "n_folds", "n_alphas",      "alpha_min_ratio",
      "alpha",         "one_standard_error", "cart_max_depth", "cart_min_samples_leaf"};
  reject_unknown(p, known, "method parameter");
  ruleshap::MethodConfig cfg;
  try {
    cfg.seed = p.value("seed", cfg.seed);
    cfg.boosting.n_trees = p.value("n_trees", cfg.boosting.n_trees);
    cfg.boosting.max_depth = p.value("max_depth", cfg.boosting.max_depth);
    cfg.boosting.learning_rate = p.value("learning_rate", cfg.boosting.learning_rate);
    cfg.boosting.l2_lambda = p.value("l2_lambda", cfg.boosting.l2_lambda);
    cfg.boosting.min_child_weight = p.value("min_child_weight", cfg.boosting.min_child_weight);
    cfg.shap.n_permutations = p.value("n_permutations", cfg.shap.n_permutations);
    cfg.lasso.n_folds = p.value("n_folds", cfg.lasso.n_folds);
    cfg.lasso.n_alphas = p.value("n_alphas", cfg.lasso.n_alphas);
    cfg.lasso.alpha_min_ratio = p.value("alpha_min_ratio", cfg.lasso.alpha_min_ratio);
    cfg.lasso.one_standard_error = p.value("one_standard_error", cfg.lasso.one_standard_error);
    if (p.contains("alpha") && !p.at("alpha").is_null()) cfg.fixed_alpha = p.at("alpha").get<double>();
    cfg.cart.max_depth = p.value("cart_max_depth", cfg.cart.max_depth);
    cfg.cart.min_samples_leaf = p.value("cart_min_samples_leaf", cfg.cart.min_samples_leaf);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid method parameters: ") + e.what());
  }
  if (cfg.boosting.n_trees < 1 || cfg.boosting.max_depth < 1 ||
      !(cfg.boosting.learning_rate > 0.0) || cfg.shap.n_permutations < 1 ||
      cfg.lasso.n_folds < 2 || cfg.lasso.n_alphas < 1 ||
      !(cfg.lasso.alpha_min_ratio > 0.0 && cfg.lasso.alpha_min_ratio <= 1.0)) {
    fail(ErrorCode::kConfig, "method parameter out of range");
  }
  if (cfg.fixed_alpha && !(*cfg.fixed_alpha >= 0.0)) fail(ErrorCode::kConfig, "alpha must be >= 0");
  return cfg;
}

std::vector<ruleshap::TruthRule> truths_or_empty(const char* truths_json) {
  if (truths_json == nullptr) return {};
  return ruleshap::parse_truths(truths_json);
}

ruleshap::TextProviderConfig provider_config(const json& p, const char* what) {
  static const std::set<std::string> known = {"endpoint",    "model",          "temperature",
                                              "top_p",       "retries",        "timeout_seconds",
                                              "backoff_ms",  "api_key_env",    "max_chunk_tokens",
                                              "avg_chars_per_token"};
  if (!p.is_object()) fail(ErrorCode::kConfig, std::string(what) + " must be an object");
  reject_unknown(p, known, what);
  ruleshap::TextProviderConfig cfg;
  try {
    cfg.endpoint = p.value("endpoint", cfg.endpoint);
    cfg.model = p.value("model", cfg.model);
    cfg.temperature = p.value("temperature", cfg.temperature);
    cfg.top_p = p.value("top_p", cfg.top_p);
    cfg.retries = p.value("retries", cfg.retries);
    cfg.timeout_seconds = p.value("timeout_seconds", cfg.timeout_seconds);
    cfg.backoff_ms = p.value("backoff_ms", cfg.backoff_ms);
    cfg.api_key_env = p.value("api_key_env", cfg.api_key_env);
    cfg.max_chunk_tokens = p.value("max_chunk_tokens", cfg.max_chunk_tokens);
    cfg.avg_chars_per_token = p.value("avg_chars_per_token", cfg.avg_chars_per_token);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid ") + what + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

extern "C" {

const char* rs_version(void) { return "1.0.0"; }

const char* rs_status_name(rs_status status) {
  if (status == RS_OK) return "ok";
  if (status == RS_ERR_INTERNAL) return "internal";
  if (status >= RS_ERR_INVALID_ARGUMENT && status <= RS_ERR_INSUFFICIENT_DATA) {
    return ruleshap::error_code_name(static_cast<ErrorCode>(status));
  }
  return "unknown";
}

const char* rs_last_error(void) { return g_last_error.c_str(); }

void rs_string_free(char* s) { std::free(s); }

rs_status rs_matrix_load(const char* path, rs_matrix** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new rs_matrix{ruleshap::load_abstraction_matrix(path)};
  });
}

rs_status rs_matrix_parse(const char* csv_text, rs_matrix** out) {
  return guard([&] {
    require(csv_text, "csv_text");
    require(out, "out");
    *out = new rs_matrix{ruleshap::parse_abstraction_matrix(csv_text)};
  });
}

rs_status rs_matrix_save(const rs_matrix* m, const char* path) {
  return guard([&] {
    require(m, "matrix");
    require(path, "path");
    ruleshap::save_abstraction_matrix(m->value, path);
  });
}

rs_status rs_matrix_format(const rs_matrix* m, char** out_csv) {
  return guard([&] {
    require(m, "matrix");
    require(out_csv, "out_csv");
    *out_csv = dup_string(ruleshap::format_abstraction_matrix(m->value));
  });
}

size_t rs_matrix_rows(const rs_matrix* m) { return m == nullptr ? 0 : m->value.rows(); }

void rs_matrix_free(rs_matrix* m) { delete m; }

rs_status rs_simulate(const char* config_json, rs_simulation** out) {
  return guard([&] {
    require(config_json, "config_json");
    require(out, "out");
    const auto cfg = ruleshap::parse_simulation_config(config_json);
    *out = new rs_simulation{ruleshap::simulate(cfg)};
  });
}

rs_status rs_simulation_matrix(const rs_simulation* s, rs_matrix** out) {
  return guard([&] {
    require(s, "simulation");
    require(out, "out");
    *out = new rs_matrix{s->value.matrix};
  });
}

rs_status rs_simulation_truths(const rs_simulation* s, char** out_json) {
  return guard([&] {
    require(s, "simulation");
    require(out_json, "out_json");
    *out_json = dup_string(ruleshap::truths_to_json(s->value.truths));
  });
}

rs_status rs_simulation_save_topics(const rs_simulation* s, const char* path) {
  return guard([&] {
    require(s, "simulation");
    require(path, "path");
    ruleshap::save_topics(s->value.topics, path);
  });
}

void rs_simulation_free(rs_simulation* s) { delete s; }

rs_status rs_method_names(char** out_json) {
  return guard([&] {
    require(out_json, "out_json");
    json names = json::array();
    for (auto m : ruleshap::all_methods()) names.push_back(std::string(ruleshap::method_name(m)));
    *out_json = dup_string(names.dump());
  });
}

rs_status rs_explain(const rs_matrix* m, const char* method, const char* target,
                     const char* params_json, char** out_ruleset_json) {
  return guard([&] {
    require(m, "matrix");
    require(method, "method");
    require(target, "target");
    require(out_ruleset_json, "out_ruleset_json");
    ruleshap::MethodConfig cfg =
        params_json ? method_config(parse_object(params_json, "method parameters"))
                    : ruleshap::MethodConfig{};
    cfg.method = ruleshap::parse_method(method);
    const auto set = ruleshap::run_method(m->value, target, cfg);
    *out_ruleset_json = dup_string(ruleshap::ruleset_to_json(set));
  });
}

rs_status rs_audit(const rs_matrix* m, const char* options_json, const char* truths_json,
                   char** out_report_json, char** out_table) {
  return guard([&] {
    require(m, "matrix");
    require(out_report_json, "out_report_json");
    const json o = options_json ? parse_object(options_json, "audit options") : json::object();
    reject_unknown(o, {"methods", "targets", "k", "seed", "jobs", "certificates", "params"},
                   "audit option");
    ruleshap::AuditOptions opt;
    opt.base = method_config(o.value("params", json::object()));
    try {
      if (o.contains("seed")) opt.base.seed = o.at("seed").get<std::uint64_t>();
      if (o.contains("methods")) {
        for (const auto& name : o.at("methods")) {
          opt.methods.push_back(ruleshap::parse_method(name.get<std::string>()));
        }
      } else {
        opt.methods = ruleshap::all_methods();
      }
      if (o.contains("targets")) {
        for (const auto& name : o.at("targets")) {
          opt.targets.push_back(ruleshap::require_output_index(name.get<std::string>()));
        }
      } else {
        for (std::size_t t = 0; t < ruleshap::kNumOutputs; ++t) opt.targets.push_back(t);
      }
      if (o.contains("k")) opt.k_values = o.at("k").get<std::vector<int>>();
      opt.jobs = o.value("jobs", 1);
      opt.certificates = o.value("certificates", true);
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, std::string("invalid audit options: ") + e.what());
    }
    opt.truths = truths_or_empty(truths_json);
    const auto report = ruleshap::run_audit(m->value, opt);
    char* report_text = dup_string(ruleshap::report_to_json(report));
    if (out_table != nullptr) {
      try {
        *out_table = dup_string(ruleshap::report_table(report));
      } catch (...) {
        std::free(report_text);
        throw;
      }
    }
    *out_report_json = report_text;
  });
}

rs_status rs_evaluate(const char* const* ruleset_jsons, size_t n_rulesets,
                      const char* truths_json, const rs_matrix* data, const int* k_values,
                      size_t n_k, char** out_report_json, char** out_table) {
  return guard([&] {
    require(out_report_json, "out_report_json");
    if (n_rulesets > 0) require(ruleset_jsons, "ruleset_jsons");
    if (n_k > 0) require(k_values, "k_values");
    require(truths_json, "truths_json");
    std::vector<ruleshap::RankedRuleSet> sets;
    for (size_t i = 0; i < n_rulesets; ++i) {
      require(ruleset_jsons[i], "rule set");
      sets.push_back(ruleshap::ruleset_from_json(ruleset_jsons[i]));
    }
    const auto truths = ruleshap::parse_truths(truths_json);
    std::vector<int> ks(k_values, k_values + n_k);
    const auto report = ruleshap::evaluate_rulesets(std::move(sets), truths, std::move(ks),
                                                    data ? &data->value : nullptr);
    char* report_text = dup_string(ruleshap::report_to_json(report));
    if (out_table != nullptr) {
      try {
        *out_table = dup_string(ruleshap::report_table(report));
      } catch (...) {
        std::free(report_text);
        throw;
      }
    }
    *out_report_json = report_text;
  });
}

rs_status rs_certificates(const rs_matrix* m, const char* truths_json, char** out_csv) {
  return guard([&] {
    require(m, "matrix");
    require(truths_json, "truths_json");
    require(out_csv, "out_csv");
    const auto truths = ruleshap::parse_truths(truths_json);
    const auto certs =
        ruleshap::correlation_certificates(m->value, ruleshap::certificate_pairs(truths));
    *out_csv = dup_string(ruleshap::format_certificates(certs));
  });
}

rs_status rs_gunning_fog(const char* text, double* out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = ruleshap::gunning_fog(text);
  });
}

rs_status rs_render_judge_prompt(const char* kind, const char* subject, char** out) {
  return guard([&] {
    require(kind, "kind");
    require(subject, "subject");
    require(out, "out");
    *out = dup_string(ruleshap::render_judge_prompt(kind, subject).text);
  });
}

rs_status rs_parse_judge_response(const char* raw, int* out_score, char** out_explanation) {
  return guard([&] {
    require(raw, "raw");
    require(out_score, "out_score");
    const auto parsed = ruleshap::parse_judge_response(raw);
    if (out_explanation != nullptr) *out_explanation = dup_string(parsed.explanation);
    *out_score = parsed.score;
  });
}

rs_status rs_dedup_topics(const char* topics_json, double threshold, char** out_json) {
  return guard([&] {
    require(topics_json, "topics_json");
    require(out_json, "out_json");
    json parsed;
    try {
      parsed = json::parse(topics_json);
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, std::string("topics: ") + e.what());
    }
    std::vector<std::string> topics;
    try {
      topics = parsed.get<std::vector<std::string>>();
    } catch (const json::exception&) {
      fail(ErrorCode::kSchema, "topics must be a JSON array of strings");
    }
    const auto kept = ruleshap::dedup_topics(topics, ruleshap::trigram_cosine, threshold);
    *out_json = dup_string(json(kept).dump());
  });
}

rs_status rs_abstract(const char* topics_path, const char* config_json, rs_matrix** out) {
  return guard([&] {
    require(topics_path, "topics_path");
    require(config_json, "config_json");
    require(out, "out");
    const json c = parse_object(config_json, "abstraction config");
    reject_unknown(c,
                   {"judge", "explainer", "sentiment", "subjectivity", "system_instruction",
                    "explain_template", "chunking", "cache", "jobs"},
                   "abstraction config");
    if (!c.contains("judge") || !c.contains("explainer")) {
      fail(ErrorCode::kConfig, "abstraction config needs 'judge' and 'explainer' providers");
    }
    const auto judge = provider_config(c.at("judge"), "judge provider");
    const auto explainer = provider_config(c.at("explainer"), "explainer provider");

    ruleshap::AbstractionSources src;
    src.judge = [judge](std::string_view prompt, std::optional<std::string_view> system) {
      return ruleshap::llm_generate(prompt, system, judge);
    };
    src.explainer = [explainer](std::string_view prompt, std::optional<std::string_view> system) {
      return ruleshap::llm_generate(prompt, system, explainer);
    };
    src.sentiment = c.contains("sentiment")
                        ? ruleshap::http_classifier(provider_config(c.at("sentiment"), "sentiment provider"))
                        : ruleshap::null_classifier("sentiment");
    src.subjectivity =
        c.contains("subjectivity")
            ? ruleshap::http_classifier(provider_config(c.at("subjectivity"), "subjectivity provider"))
            : ruleshap::null_classifier("subjectivity");
    try {
      src.system_instruction = c.value("system_instruction", std::string());
      src.explain_template = c.value("explain_template", src.explain_template);
      src.jobs = c.value("jobs", 1);
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, std::string("invalid abstraction config: ") + e.what());
    }
    if (c.contains("chunking")) src.chunking = provider_config(c.at("chunking"), "chunking");
    std::optional<ruleshap::GenerationCache> cache;
    if (c.contains("cache")) {
      cache.emplace(c.at("cache").get<std::string>());
      src.cache = &*cache;
    }
    const auto topics = ruleshap::load_topics(topics_path);
    *out = new rs_matrix{ruleshap::collect_abstractions(topics, src)};
  });
}

}  // extern "C"
