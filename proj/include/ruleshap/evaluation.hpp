// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Scoring extracted rules against injected ground truth, plus the
// dependence and significance statistics used for correlation certificates.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ruleshap/dataset.hpp"
#include "ruleshap/rules.hpp"

namespace ruleshap {

// A rule known to drive `target` in direction `sign`. Each disjunct is a
// canonical conjunction; most truths have exactly one.
struct TruthRule {
  std::string id;
  std::string bias;
  std::size_t target = 0;
  int sign = +1;
  std::vector<std::vector<Condition>> disjuncts;
};

// Rules for one target, best first; rank of rules[i] is i + 1.
struct RankedRuleSet {
  std::string method;
  std::size_t target = 0;
  RuleSet rules;
};

// Sorts by importance descending; ties by fewer conditions, then by the
// condition lists compared lexicographically.
void rank_rules(RuleSet& rules);

bool canonical_match(const Rule& candidate, const TruthRule& truth);

struct MatchResult {
  std::string truth_id;
  std::string bias;
  std::optional<std::size_t> rank;  // 1-based
};

// First matching candidate within the ruleset of each truth's target.
std::vector<MatchResult> match_truths(std::span<const RankedRuleSet> ranked,
                                      std::span<const TruthRule> truths);

double reciprocal_rank(const MatchResult& m, int k);

struct MrrResult {
  std::vector<double> reciprocal_ranks;  // per truth, aligned with input order
  double mrr = 0.0;
  std::map<std::string, double> by_bias;
};

MrrResult mrr_at_k(std::span<const MatchResult> matches, int k);
MrrResult mrr_at_k(std::span<const RankedRuleSet> ranked, std::span<const TruthRule> truths,
                   int k);

struct CorrelationCertificate {
  std::string input_feature;
  std::string output_feature;
  double dcorr = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool significant = false;  // after Holm correction, when computed in a family
};

// Bias-corrected distance correlation R* with the t-test
// t = sqrt(nu - 1) R* / sqrt(1 - R*^2), nu = n(n - 3)/2, on nu - 1 degrees of
// freedom. The reported dcorr is R* clipped to [0, 1].
CorrelationCertificate distance_correlation(std::span<const double> x, std::span<const double> y);

struct CorrelationTest {
  double r = 0.0;
  double p_value = 1.0;
};

CorrelationTest spearman(std::span<const double> x, std::span<const double> y);

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;
  std::size_t n = 0;  // non-zero differences
  bool exact = false;
};

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct HolmResult {
  std::vector<bool> reject;
  std::vector<double> adjusted;
};

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha = 0.05);

struct Conciseness {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_target;
};

Conciseness conciseness(std::span<const RankedRuleSet> rulesets);

// Certificates for (input, output) pairs with Holm correction across them.
std::vector<CorrelationCertificate> correlation_certificates(
    const AbstractionMatrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    double alpha = 0.05);

std::string format_certificates(std::span<const CorrelationCertificate> certs);

}  // namespace ruleshap
