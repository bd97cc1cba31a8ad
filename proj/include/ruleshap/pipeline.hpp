// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Rule extraction methods over an abstraction matrix (RuleSHAP, its two
// ablations, RuleFit variants and a single-tree surrogate) and the audit
// driver that scores them.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruleshap/dataset.hpp"
#include "ruleshap/evaluation.hpp"
#include "ruleshap/lasso.hpp"
#include "ruleshap/rules.hpp"
#include "ruleshap/shap.hpp"

namespace ruleshap {

enum class Method {
  kRuleShap,
  kRuleShapNoStep2,  // uniform tree sampling
  kRuleShapNoStep3,  // unit LASSO weights
  kRuleFit,
  kRuleFitXgb,
  kDecisionTree,
};

std::string_view method_name(Method m);
Method parse_method(std::string_view name);  // config error listing valid names
const std::vector<Method>& all_methods();

struct MethodConfig {
  Method method = Method::kRuleShap;
  BoostingParams boosting;
  ShapParams shap;
  LassoCvParams lasso;
  std::optional<double> fixed_alpha;  // skips cross-validation
  CartParams cart;
  std::uint64_t seed = 0;
};

// Per-matrix state reused across methods and targets: the nearest-row
// index and the global SHAP weights per target.
class AuditSession {
 public:
  explicit AuditSession(const AbstractionMatrix& m);

  const AbstractionMatrix& matrix() const noexcept { return *matrix_; }
  const FeatureWeights& weights(std::size_t target, const ShapParams& params);

 private:
  const AbstractionMatrix* matrix_;
  std::unique_ptr<NearestIndex> index_;
  std::map<std::pair<std::size_t, std::uint64_t>, FeatureWeights> weights_;
  std::mutex mutex_;
};

RankedRuleSet run_method(AuditSession& session, std::size_t target, const MethodConfig& cfg);
RankedRuleSet run_method(const AbstractionMatrix& data, std::string_view target,
                         const MethodConfig& cfg);

struct AuditOptions {
  std::vector<Method> methods;
  std::vector<std::size_t> targets;
  std::vector<int> k_values{1, 3, 10};
  MethodConfig base;  // method field is overridden per run
  std::vector<TruthRule> truths;  // optional
  bool certificates = true;
  int jobs = 1;
};

struct MethodReport {
  std::string method;
  std::vector<RankedRuleSet> rulesets;  // one per target
  Conciseness counts;
  std::vector<MatchResult> matches;
  std::map<int, MrrResult> mrr;  // by k
};

struct AuditReport {
  std::vector<MethodReport> methods;
  std::vector<CorrelationCertificate> certificates;
  std::vector<int> k_values;
};

AuditReport run_audit(const AbstractionMatrix& data, const AuditOptions& options);

// Groups rule sets by method (first appearance order) and scores them
// against the truths whose target appears in any set. Certificates are
// computed when `data` is given.
AuditReport evaluate_rulesets(std::vector<RankedRuleSet> rulesets,
                              std::span<const TruthRule> truths, std::vector<int> k_values,
                              const AbstractionMatrix* data = nullptr);

std::string ruleset_to_json(const RankedRuleSet& set);
RankedRuleSet ruleset_from_json(const std::string& json_text);
std::string report_to_json(const AuditReport& report);
std::string report_table(const AuditReport& report);

// Pairs (condition feature, target) implied by the truths, deduplicated.
std::vector<std::pair<std::size_t, std::size_t>> certificate_pairs(
    std::span<const TruthRule> truths);

}  // namespace ruleshap
