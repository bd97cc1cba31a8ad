// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ruleshap/error.hpp"

namespace ruleshap {

namespace {

bool conditions_less(const std::vector<Condition>& a, const std::vector<Condition>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

double two_sided_t(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kDimension, "samples differ in length");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      fail(ErrorCode::kDomain, "non-finite sample value");
    }
  }
}

}  // namespace

void rank_rules(RuleSet& rules) {
  std::stable_sort(rules.begin(), rules.end(), [](const Rule& a, const Rule& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    if (a.conditions.size() != b.conditions.size()) {
      return a.conditions.size() < b.conditions.size();
    }
    return conditions_less(a.conditions, b.conditions);
  });
}

bool canonical_match(const Rule& candidate, const TruthRule& truth) {
  if (candidate.conditions.empty() || !is_canonical(candidate.conditions)) {
    fail(ErrorCode::kContract, "candidate rule is not canonical: " + candidate.describe());
  }
  for (const auto& d : truth.disjuncts) {
    if (d.empty() || !is_canonical(d)) {
      fail(ErrorCode::kContract, "truth '" + truth.id + "' is not canonical");
    }
  }
  if (candidate.target != truth.target) return false;
  const int sign = candidate.coefficient > 0.0 ? 1 : candidate.coefficient < 0.0 ? -1 : 0;
  if (sign == 0) return false;
  if (sign == truth.sign) {
    return std::any_of(truth.disjuncts.begin(), truth.disjuncts.end(),
                       [&](const auto& d) { return d == candidate.conditions; });
  }
  if (truth.disjuncts.size() == 1 && truth.disjuncts[0].size() == 1 &&
      candidate.conditions.size() == 1) {
    const auto& t = truth.disjuncts[0][0];
    const auto& c = candidate.conditions[0];
    return c.feature == t.feature && c.threshold == t.threshold && c.op != t.op;
  }
  return false;
}

std::vector<MatchResult> match_truths(std::span<const RankedRuleSet> ranked,
                                      std::span<const TruthRule> truths) {
  std::vector<MatchResult> out;
  for (const auto& t : truths) {
    MatchResult m{t.id, t.bias, std::nullopt};
    for (const auto& set : ranked) {
      if (set.target != t.target) continue;
      for (std::size_t i = 0; i < set.rules.size(); ++i) {
        if (canonical_match(set.rules[i], t)) {
          m.rank = i + 1;
          break;
        }
      }
      break;
    }
    out.push_back(std::move(m));
  }
  return out;
}

double reciprocal_rank(const MatchResult& m, int k) {
  if (k < 1) fail(ErrorCode::kDomain, "k must be at least 1");
  if (!m.rank || *m.rank > static_cast<std::size_t>(k)) return 0.0;
  return 1.0 / static_cast<double>(*m.rank);
}

MrrResult mrr_at_k(std::span<const MatchResult> matches, int k) {
  if (matches.empty()) fail(ErrorCode::kDomain, "MRR needs at least one ground-truth rule");
  if (k < 1) fail(ErrorCode::kDomain, "k must be at least 1");
  MrrResult r;
  std::map<std::string, std::pair<double, std::size_t>> groups;
  for (const auto& m : matches) {
    const double rr = reciprocal_rank(m, k);
    r.reciprocal_ranks.push_back(rr);
    r.mrr += rr;
    auto& g = groups[m.bias];
    g.first += rr;
    ++g.second;
  }
  r.mrr /= static_cast<double>(matches.size());
  for (const auto& [bias, g] : groups) r.by_bias[bias] = g.first / static_cast<double>(g.second);
  return r;
}

MrrResult mrr_at_k(std::span<const RankedRuleSet> ranked, std::span<const TruthRule> truths,
                   int k) {
  const auto matches = match_truths(ranked, truths);
  return mrr_at_k(matches, k);
}

CorrelationCertificate distance_correlation(std::span<const double> x,
                                            std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 4) fail(ErrorCode::kInsufficientData, "distance correlation needs n >= 4");

  std::vector<double> ra(n, 0.0), rb(n, 0.0);
  double s_ab = 0.0, s_aa = 0.0, s_bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i], yi = y[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = std::abs(xi - x[j]);
      const double b = std::abs(yi - y[j]);
      ra[i] += a;
      ra[j] += a;
      rb[i] += b;
      rb[j] += b;
      s_ab += a * b;
      s_aa += a * a;
      s_bb += b * b;
    }
  }
  s_ab *= 2.0;
  s_aa *= 2.0;
  s_bb *= 2.0;
  double ta = 0.0, tb = 0.0, r_ab = 0.0, r_aa = 0.0, r_bb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ta += ra[i];
    tb += rb[i];
    r_ab += ra[i] * rb[i];
    r_aa += ra[i] * ra[i];
    r_bb += rb[i] * rb[i];
  }
  const double nd = static_cast<double>(n);
  // U-centred inner product without materializing the centred matrices.
  auto inner = [&](double s, double r, double t1, double t2) {
    return (s - 2.0 * r / (nd - 2.0) + t1 * t2 / ((nd - 1.0) * (nd - 2.0))) / (nd * (nd - 3.0));
  };
  const double xy = inner(s_ab, r_ab, ta, tb);
  const double xx = inner(s_aa, r_aa, ta, ta);
  const double yy = inner(s_bb, r_bb, tb, tb);
  if (!(xx > 0.0) || !(yy > 0.0)) {
    fail(ErrorCode::kDomain, "distance correlation undefined for a constant sample");
  }
  const double r = std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);

  CorrelationCertificate c;
  c.n = n;
  c.dcorr = std::clamp(r, 0.0, 1.0);
  const double nu = nd * (nd - 3.0) / 2.0;
  const double denom = 1.0 - r * r;
  c.t_statistic = denom <= 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), r)
                               : std::sqrt(nu - 1.0) * r / std::sqrt(denom);
  c.p_value = two_sided_t(c.t_statistic, nu - 1.0);
  return c;
}

CorrelationTest spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorCode::kInsufficientData, "Spearman correlation needs n >= 3");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) {
    fail(ErrorCode::kDomain, "Spearman correlation undefined for a constant sample");
  }
  CorrelationTest out;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n) - 2.0;
  const double denom = 1.0 - out.r * out.r;
  out.p_value = denom <= 0.0 ? 0.0 : two_sided_t(out.r * std::sqrt(df / denom), df);
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b);
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] != 0.0) diff.push_back(a[i] - b[i]);
  }
  if (diff.empty()) fail(ErrorCode::kDomain, "all paired differences are zero");
  const std::size_t n = diff.size();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(diff[i]);
  const auto ranks = average_ranks(mag);

  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < n; ++i) (diff[i] > 0.0 ? w_plus : w_minus) += ranks[i];

  WilcoxonResult out;
  out.n = n;
  out.statistic = std::min(w_plus, w_minus);
  if (n <= 12) {
    // Null distribution of 2 * W+ over all sign assignments (average ranks
    // are half-integers, so doubling makes every sum integral).
    std::vector<int> doubled(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int r : doubled) {
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    }
    const int observed = static_cast<int>(std::lround(2.0 * out.statistic));
    double tail = 0.0;
    for (int s = 0; s <= observed; ++s) tail += count[static_cast<std::size_t>(s)];
    out.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    out.exact = true;
    return out;
  }
  const double nd = static_cast<double>(n);
  double tie_term = 0.0;
  auto sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
  const double z = (out.statistic - mean) / std::sqrt(var);
  boost::math::normal normal;
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(normal, z));
  return out;
}

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::kDomain, "alpha must lie in (0, 1)");
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kDomain, "p-value outside [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return p_values[a] < p_values[b]; });
  HolmResult out;
  out.reject.assign(m, false);
  out.adjusted.assign(m, 1.0);
  double running = 0.0;
  bool still_rejecting = true;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = p_values[order[i]];
    const double factor = static_cast<double>(m - i);
    running = std::max(running, std::min(1.0, factor * p));
    out.adjusted[order[i]] = running;
    if (still_rejecting && p <= alpha / factor) {
      out.reject[order[i]] = true;
    } else {
      still_rejecting = false;
    }
  }
  return out;
}

Conciseness conciseness(std::span<const RankedRuleSet> rulesets) {
  Conciseness c;
  for (const auto& s : rulesets) {
    c.total += s.rules.size();
    c.per_target[std::string(kOutputNames[s.target])] += s.rules.size();
  }
  return c;
}

std::vector<CorrelationCertificate> correlation_certificates(
    const AbstractionMatrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    double alpha) {
  std::vector<CorrelationCertificate> certs;
  std::vector<double> p;
  for (auto [in, out] : pairs) {
    if (in >= kNumInputs || out >= kNumOutputs) fail(ErrorCode::kSchema, "unknown feature index");
    const auto x = m.input_column(in);
    const auto y = m.output_column(out);
    auto c = distance_correlation(x, y);
    c.input_feature = kInputNames[in];
    c.output_feature = kOutputNames[out];
    p.push_back(c.p_value);
    certs.push_back(std::move(c));
  }
  const auto holm = holm_bonferroni(p, alpha);
  for (std::size_t i = 0; i < certs.size(); ++i) certs[i].significant = holm.reject[i];
  return certs;
}

std::string format_certificates(std::span<const CorrelationCertificate> certs) {
  std::string out = "input_feature,output_feature,dcorr,t,p,significant_after_holm\n";
  for (const auto& c : certs) {
    out += c.input_feature + ',' + c.output_feature + ',' + format_double(c.dcorr) + ',' +
           format_double(c.t_statistic) + ',' + format_double(c.p_value) + ',' +
           (c.significant ? "true" : "false") + '\n';
  }
  return out;
}

}  // namespace ruleshap
