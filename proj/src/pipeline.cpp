// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <set>

#include "json_io.hpp"
#include "parallel.hpp"

namespace ruleshap {

namespace {

using detail::json;

constexpr std::array<std::pair<Method, std::string_view>, 6> kMethodNames = {{
    {Method::kRuleShap, "ruleshap"},
    {Method::kRuleShapNoStep2, "ruleshap_no_step2"},
    {Method::kRuleShapNoStep3, "ruleshap_no_step3"},
    {Method::kRuleFit, "rulefit"},
    {Method::kRuleFitXgb, "rulefit_xgb"},
    {Method::kDecisionTree, "decision_tree"},
}};

RankedRuleSet run_decision_tree(const AbstractionMatrix& m, std::size_t target,
                                std::span<const double> y, const MethodConfig& cfg) {
  RankedRuleSet out{std::string(method_name(cfg.method)), target, {}};
  const Tree tree = fit_cart(m.inputs(), y, cfg.cart);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::set<std::vector<Condition>> seen;
  for (auto& nr : extract_node_rules(tree, target)) {
    if (!seen.insert(nr.rule.conditions).second) continue;
    nr.rule.coefficient = nr.node_value - mean;
    nr.rule.importance = std::abs(nr.rule.coefficient);
    if (nr.rule.coefficient != 0.0) out.rules.push_back(std::move(nr.rule));
  }
  if (!out.rules.empty()) assign_support(out.rules, build_design_matrix(out.rules, m.inputs()));
  rank_rules(out.rules);
  return out;
}

json rule_to_json(const Rule& r, std::size_t rank) {
  json conds = json::array();
  for (const auto& c : r.conditions) conds.push_back(detail::condition_to_json(c));
  return {{"target", std::string(kOutputNames[r.target])},
          {"conditions", conds},
          {"coefficient", r.coefficient},
          {"support", r.support},
          {"importance", r.importance},
          {"rank", rank}};
}

json ruleset_json(const RankedRuleSet& set, std::size_t limit) {
  json rules = json::array();
  for (std::size_t i = 0; i < set.rules.size() && i < limit; ++i) {
    rules.push_back(rule_to_json(set.rules[i], i + 1));
  }
  return {{"method", set.method},
          {"target", std::string(kOutputNames[set.target])},
          {"rule_count", set.rules.size()},
          {"rules", rules}};
}

}  // namespace

std::string_view method_name(Method m) {
  for (auto [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string valid;
  for (auto [method, n] : kMethodNames) {
    if (n == name) return method;
    valid += valid.empty() ? "" : ", ";
    valid += n;
  }
  fail(ErrorCode::kConfig, "unknown method '" + std::string(name) + "' (valid: " + valid + ")");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (auto [method, _] : kMethodNames) v.push_back(method);
    return v;
  }();
  return methods;
}

AuditSession::AuditSession(const AbstractionMatrix& m)
    : matrix_(&m), index_(std::make_unique<NearestIndex>(m)) {
  if (m.empty()) fail(ErrorCode::kEmptyInput, "cannot audit an empty matrix");
}

const FeatureWeights& AuditSession::weights(std::size_t target, const ShapParams& params) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(
      target, params.seed * 1000003u + static_cast<std::uint64_t>(params.n_permutations));
  auto it = weights_.find(key);
  if (it == weights_.end()) {
    const auto a = explain_dataset(*matrix_, *index_, target, params);
    it = weights_.emplace(key, global_attributions(a)).first;
  }
  return it->second;
}

RankedRuleSet run_method(AuditSession& session, std::size_t target, const MethodConfig& cfg) {
  if (target >= kNumOutputs) fail(ErrorCode::kSchema, "unknown target index");
  const auto& m = session.matrix();
  const auto y = m.output_column(target);
  if (cfg.method == Method::kDecisionTree) return run_decision_tree(m, target, y, cfg);

  const Method method = cfg.method;
  const bool shap_trees = method == Method::kRuleShap || method == Method::kRuleShapNoStep3;
  const bool shap_lasso = method == Method::kRuleShap || method == Method::kRuleShapNoStep2;
  const bool rulefit_family = method == Method::kRuleFit || method == Method::kRuleFitXgb;

  FeatureWeights weights = FeatureWeights::uniform();
  if (shap_trees || shap_lasso) {
    ShapParams sp = cfg.shap;
    sp.seed = cfg.seed;
    weights = session.weights(target, sp);
  }

  BoostingParams bp = cfg.boosting;
  double colsample = 1.0 / static_cast<double>(kNumInputs);
  if (method == Method::kRuleFit) {
    bp.l2_lambda = 0.0;
    colsample = 1.0;
  }
  const TreeEnsemble ensemble =
      fit_gbrt(m.inputs(), y, bp, shap_trees ? weights : FeatureWeights::uniform(), colsample,
               cfg.seed);

  RankedRuleSet out{std::string(method_name(method)), target, {}};
  RuleSet rules = extract_rules(ensemble, target);
  if (rules.empty()) return out;
  const DesignMatrix design = build_design_matrix(rules, m.inputs());
  assign_support(rules, design);

  std::vector<double> rho(rules.size(), 1.0);
  if (shap_lasso) {
    for (std::size_t j = 0; j < rules.size(); ++j) rho[j] = rule_feature_weight(rules[j], weights);
  }
  LassoFit fit;
  if (cfg.fixed_alpha) {
    fit = weighted_lasso(design, y, *cfg.fixed_alpha, rho, cfg.lasso.solver);
  } else {
    LassoCvParams lp = cfg.lasso;
    lp.seed = cfg.seed;
    fit = weighted_lasso_cv(design, y, rho, lp).fit;
  }
  const auto importance = rule_importance(
      fit.coefficients, rules, rulefit_family ? ImportanceMode::kRuleFit : ImportanceMode::kRuleShap);
  for (std::size_t j = 0; j < rules.size(); ++j) {
    if (fit.coefficients[j] == 0.0) continue;
    rules[j].coefficient = fit.coefficients[j];
    rules[j].importance = importance[j];
    out.rules.push_back(std::move(rules[j]));
  }
  rank_rules(out.rules);
  return out;
}

RankedRuleSet run_method(const AbstractionMatrix& data, std::string_view target,
                         const MethodConfig& cfg) {
  const std::size_t t = require_output_index(target);
  AuditSession session(data);
  return run_method(session, t, cfg);
}

std::vector<std::pair<std::size_t, std::size_t>> certificate_pairs(
    std::span<const TruthRule> truths) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& t : truths) {
    for (const auto& d : t.disjuncts) {
      for (const auto& c : d) pairs.emplace(c.feature, t.target);
    }
  }
  return {pairs.begin(), pairs.end()};
}

AuditReport run_audit(const AbstractionMatrix& data, const AuditOptions& options) {
  if (options.methods.empty() || options.targets.empty() || options.k_values.empty()) {
    fail(ErrorCode::kConfig, "audit needs at least one method, target and k");
  }
  AuditSession session(data);

  // SHAP weights first so the parallel stage only reads them.
  const bool needs_shap = std::any_of(options.methods.begin(), options.methods.end(), [](Method m) {
    return m == Method::kRuleShap || m == Method::kRuleShapNoStep2 ||
           m == Method::kRuleShapNoStep3;
  });
  if (needs_shap) {
    ShapParams sp = options.base.shap;
    sp.seed = options.base.seed;
    sp.jobs = options.jobs;
    for (std::size_t t : options.targets) session.weights(t, sp);
  }

  const std::size_t n_targets = options.targets.size();
  std::vector<RankedRuleSet> results(options.methods.size() * n_targets);
  detail::parallel_for(results.size(), options.jobs, [&](std::size_t i) {
    MethodConfig cfg = options.base;
    cfg.method = options.methods[i / n_targets];
    results[i] = run_method(session, options.targets[i % n_targets], cfg);
  });

  std::vector<RankedRuleSet> ordered;
  ordered.reserve(results.size());
  for (auto& r : results) ordered.push_back(std::move(r));
  return evaluate_rulesets(std::move(ordered), options.truths, options.k_values,
                           options.certificates ? &data : nullptr);
}

AuditReport evaluate_rulesets(std::vector<RankedRuleSet> rulesets,
                              std::span<const TruthRule> all_truths, std::vector<int> k_values,
                              const AbstractionMatrix* data) {
  if (k_values.empty()) fail(ErrorCode::kConfig, "at least one k value is required");
  for (int k : k_values) {
    if (k < 1) fail(ErrorCode::kConfig, "k values must be at least 1");
  }
  std::set<std::size_t> targets;
  for (const auto& r : rulesets) targets.insert(r.target);
  std::vector<TruthRule> truths;
  for (const auto& t : all_truths) {
    if (targets.count(t.target) > 0) truths.push_back(t);
  }

  AuditReport report;
  report.k_values = std::move(k_values);
  for (auto& set : rulesets) {
    auto it = std::find_if(report.methods.begin(), report.methods.end(),
                           [&](const MethodReport& m) { return m.method == set.method; });
    if (it == report.methods.end()) {
      report.methods.push_back(MethodReport{});
      it = std::prev(report.methods.end());
      it->method = set.method;
    }
    for (const auto& existing : it->rulesets) {
      if (existing.target == set.target) {
        fail(ErrorCode::kSchema, "duplicate rule set for " + set.method + "/" +
                                     std::string(kOutputNames[set.target]));
      }
    }
    it->rulesets.push_back(std::move(set));
  }
  for (auto& mr : report.methods) {
    mr.counts = conciseness(mr.rulesets);
    if (!truths.empty()) {
      mr.matches = match_truths(mr.rulesets, truths);
      for (int k : report.k_values) mr.mrr[k] = mrr_at_k(mr.matches, k);
    }
  }
  if (data != nullptr && !truths.empty()) {
    report.certificates = correlation_certificates(*data, certificate_pairs(truths));
  }
  return report;
}

std::string ruleset_to_json(const RankedRuleSet& set) {
  return ruleset_json(set, set.rules.size()).dump(2);
}

RankedRuleSet ruleset_from_json(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "rule set");
  RankedRuleSet set;
  set.method = detail::get_field<std::string>(j, "method", "rule set");
  set.target = require_output_index(detail::get_field<std::string>(j, "target", "rule set"));
  std::size_t expected_rank = 1;
  for (const auto& r : detail::get_field<json>(j, "rules", "rule set")) {
    Rule rule;
    rule.target = require_output_index(detail::get_field<std::string>(r, "target", "rule"));
    for (const auto& c : detail::get_field<json>(r, "conditions", "rule")) {
      rule.conditions.push_back(detail::condition_from_json(c));
    }
    rule.coefficient = detail::get_field<double>(r, "coefficient", "rule");
    rule.support = detail::get_field<double>(r, "support", "rule");
    rule.importance = detail::get_field<double>(r, "importance", "rule");
    if (r.contains("rank") && r.at("rank").get<std::size_t>() != expected_rank) {
      fail(ErrorCode::kSchema, "rule ranks must be contiguous from 1");
    }
    ++expected_rank;
    set.rules.push_back(std::move(rule));
  }
  return set;
}

std::string report_to_json(const AuditReport& report) {
  const std::size_t top = report.k_values.empty()
                              ? 10
                              : static_cast<std::size_t>(*std::max_element(
                                    report.k_values.begin(), report.k_values.end()));
  json methods = json::array();
  for (const auto& mr : report.methods) {
    json per_target = json::object();
    for (const auto& [t, c] : mr.counts.per_target) per_target[t] = c;
    json sets = json::array();
    for (const auto& s : mr.rulesets) sets.push_back(ruleset_json(s, top));
    json entry{{"method", mr.method},
               {"rule_count", mr.counts.total},
               {"rule_count_per_target", per_target},
               {"rulesets", sets}};
    if (!mr.matches.empty()) {
      json matches = json::array();
      for (const auto& m : mr.matches) {
        matches.push_back({{"truth", m.truth_id},
                           {"bias", m.bias},
                           {"rank", m.rank ? json(*m.rank) : json(nullptr)}});
      }
      json mrr = json::object();
      for (const auto& [k, r] : mr.mrr) {
        json by_bias = json::object();
        for (const auto& [b, v] : r.by_bias) by_bias[b] = v;
        mrr["mrr@" + std::to_string(k)] = {{"aggregate", r.mrr}, {"by_bias", by_bias}};
      }
      entry["matches"] = matches;
      entry["mrr"] = mrr;
    }
    methods.push_back(entry);
  }
  json certs = json::array();
  for (const auto& c : report.certificates) {
    certs.push_back({{"input_feature", c.input_feature},
                     {"output_feature", c.output_feature},
                     {"dcorr", c.dcorr},
                     {"t", std::isfinite(c.t_statistic) ? json(c.t_statistic) : json("inf")},
                     {"p", c.p_value},
                     {"n", c.n},
                     {"significant_after_holm", c.significant}});
  }
  return json{{"k_values", report.k_values}, {"methods", methods}, {"certificates", certs}}
      .dump(2);
}

std::string report_table(const AuditReport& report) {
  char buf[64];
  std::string out = "method               rules";
  for (int k : report.k_values) {
    std::snprintf(buf, sizeof buf, "  MRR@%-3d", k);
    out += buf;
  }
  out += '\n';
  auto row = [&](const std::string& label, std::size_t rules, const MethodReport& mr,
                 const std::string* bias) {
    std::snprintf(buf, sizeof buf, "%-20s %5zu", label.c_str(), rules);
    out += buf;
    for (int k : report.k_values) {
      auto it = mr.mrr.find(k);
      if (it == mr.mrr.end()) {
        out += "        -";
        continue;
      }
      const double v = bias ? it->second.by_bias.at(*bias) : it->second.mrr;
      std::snprintf(buf, sizeof buf, "  %7.3f", v);
      out += buf;
    }
    out += '\n';
  };
  for (const auto& mr : report.methods) {
    row(mr.method, mr.counts.total, mr, nullptr);
    if (!mr.mrr.empty()) {
      for (const auto& [bias, _] : mr.mrr.begin()->second.by_bias) {
        row("  " + bias, mr.counts.total, mr, &bias);
      }
    }
  }
  if (!report.certificates.empty()) {
    out += "\ninput -> output                          dcorr        p  holm\n";
    for (const auto& c : report.certificates) {
      std::snprintf(buf, sizeof buf, "%-40s", (c.input_feature + " -> " + c.output_feature).c_str());
      out += buf;
      std::snprintf(buf, sizeof buf, " %6.3f %8.2e  %s\n", c.dcorr, c.p_value,
                    c.significant ? "yes" : "no");
      out += buf;
    }
  }
  return out;
}

}  // namespace ruleshap
