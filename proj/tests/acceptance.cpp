// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every expected value is computed here from first principles.

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ruleshap/biassim.hpp"
#include "ruleshap/evaluation.hpp"
#include "ruleshap/lasso.hpp"
#include "ruleshap/pipeline.hpp"
#include "ruleshap/rules.hpp"
#include "ruleshap/shap.hpp"
#include "ruleshap/textmetrics.hpp"

namespace {

using namespace ruleshap;
using Clock = std::chrono::steady_clock;

// Collects the first few failure messages of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 5) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { info_ += (info_.empty() ? "" : ", ") + s; }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::string s = info_;
    if (failures_ > 0) {
      s += (s.empty() ? "" : "; ") + std::to_string(failures_) + " failure(s): " + notes_;
    }
    return s;
  }

 private:
  int failures_ = 0;
  std::string notes_, info_;
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

InputVector random_inputs(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> g(1, kGridMax);
  InputVector x{};
  for (auto& v : x) v = g(rng);
  return x;
}

// ---- SHAP ------------------------------------------------------------------

void shap_exactness(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> coef(0.0, 3.0);
  std::uniform_real_distribution<double> val(1.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    InputVector w{}, x{}, bg{};
    for (auto& v : w) v = coef(rng);
    for (auto& v : x) v = val(rng);
    for (auto& v : bg) v = val(rng);
    const double w0 = coef(rng);
    const Evaluator f = [&](std::span<const double> u) {
      double s = w0;
      for (std::size_t i = 0; i < kNumInputs; ++i) s += w[i] * u[i];
      return s;
    };
    const auto a = permutation_shap(f, x, BackgroundVector{bg}, 1 + trial % 10, trial);
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumInputs; ++i) {
      worst = std::max(worst, std::abs(a[i] - w[i] * (x[i] - bg[i])));
      sum += a[i];
    }
    worst = std::max(worst, std::abs(sum - (f(x) - f(bg))));
  }
  const double secs = seconds_since(t0);
  c.expect(worst <= 1e-9, "max error " + sci(worst));
  c.expect(secs < 5.0, "took " + fmt(secs) + " s");
  c.note("100 cases, max error " + sci(worst) + ", " + fmt(secs) + " s");
}

// ---- LASSO -----------------------------------------------------------------

void lasso_correctness(Check& c) {
  const auto t0 = Clock::now();
  {
    const std::vector<double> col = {1, 1, 0, 0}, v = {2, 2, 0, 0};
    const auto x = DesignMatrix::from_dense(col, 4, 1);
    LassoParams p;
    p.fit_intercept = false;
    const std::vector<double> one = {1.0}, half = {0.5};
    c.expect(weighted_lasso(x, v, 2.0, one, p).coefficients[0] == 1.0, "w(2,1) != 1");
    c.expect(weighted_lasso(x, v, 2.0, half, p).coefficients[0] == 0.0, "w(2,0.5) != 0");
    c.expect(weighted_lasso(x, v, 0.0, one, p).coefficients[0] == 2.0, "w(0,1) != 2");
  }
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> nd(5, 50), pd(1, 20);
  std::bernoulli_distribution bit(0.4);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> rd(0.1, 1.0), frac(0.01, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = nd(rng), p = pd(rng);
    std::vector<double> xd(n * p), v(n), rho(p), beta(p);
    for (auto& e : xd) e = bit(rng) ? 1.0 : 0.0;
    for (auto& b : beta) b = 2.0 * noise(rng);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = noise(rng);
      for (std::size_t j = 0; j < p; ++j) v[i] += xd[i * p + j] * beta[j];
    }
    for (auto& r : rho) r = rd(rng);
    const auto x = DesignMatrix::from_dense(xd, n, p);
    // Largest alpha with a nonzero solution, from the centred correlations.
    double vbar = 0.0;
    for (double e : v) vbar += e / n;
    double amax = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      double mean = 0.0, g = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += xd[i * p + j] / n;
      for (std::size_t i = 0; i < n; ++i) g += (xd[i * p + j] - mean) * (v[i] - vbar);
      amax = std::max(amax, std::abs(g) * rho[j]);
    }
    const double alpha = amax * frac(rng);
    const auto fit = weighted_lasso(x, v, alpha, rho);
    c.expect(fit.converged, "trial " + std::to_string(trial) + " not converged");
    std::vector<double> r(n);
    double rsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pred = fit.intercept;
      for (std::size_t j = 0; j < p; ++j) pred += xd[i * p + j] * fit.coefficients[j];
      r[i] = v[i] - pred;
      rsum += r[i];
    }
    worst = std::max(worst, std::abs(rsum));
    for (std::size_t j = 0; j < p; ++j) {
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) g += xd[i * p + j] * r[i];
      const double level = alpha / rho[j];
      const double w = fit.coefficients[j];
      const double resid =
          w == 0.0 ? std::max(0.0, std::abs(g) - level) : std::abs(g - (w > 0 ? level : -level));
      worst = std::max(worst, resid);
    }
  }
  const double secs = seconds_since(t0);
  c.expect(worst <= 1e-6, "max KKT residual " + sci(worst));
  c.expect(secs < 10.0, "took " + fmt(secs) + " s");
  c.note("200 problems, max KKT residual " + sci(worst) + ", " + fmt(secs) + " s");
}

// ---- rule extraction -------------------------------------------------------

bool brute_holds(const std::vector<Condition>& conds, const InputVector& x) {
  for (const auto& k : conds) {
    const double v = x[k.feature];
    if (k.op == Op::kLe && !(v <= k.threshold)) return false;
    if (k.op == Op::kGt && !(v > k.threshold)) return false;
  }
  return true;
}

void rule_fidelity(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::normal_distribution<double> noise(0, 1);
  std::uniform_int_distribution<int> depth(1, 5);
  std::size_t n_rules = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<InputVector> x;
    for (int i = 0; i < 150; ++i) x.push_back(random_inputs(rng));
    std::vector<double> y;
    for (const auto& xi : x) {
      y.push_back(std::sin(xi[trial % kNumInputs]) * 3 +
                  xi[(trial + 3) % kNumInputs] * xi[(trial + 5) % kNumInputs] + noise(rng));
    }
    BoostingParams p;
    p.n_trees = 5;
    p.max_depth = depth(rng);
    const auto ens = fit_gbrt(x, y, p, FeatureWeights::uniform(), 0.6, trial);
    const RuleSet rules = extract_rules(ens, 0);
    n_rules += rules.size();
    const auto d = build_design_matrix(rules, x);
    for (std::size_t j = 0; j < rules.size(); ++j) {
      const auto& conds = rules[j].conditions;
      c.expect(canonicalize(conds) == conds, "rule not a canonical fixed point");
      c.expect(canonicalize(canonicalize(conds)) == canonicalize(conds), "canonicalize not idempotent");
      for (std::size_t i = 0; i < x.size(); ++i) {
        c.expect(d.get(i, j) == brute_holds(conds, x[i]),
                 "design column " + std::to_string(j) + " row " + std::to_string(i));
      }
    }
    // Every tree leaf path, walked by hand, must be among the rules after
    // canonicalization, unless it is unsatisfiable on the grid.
    for (const auto& tree : ens.trees) {
      std::vector<std::pair<int, std::vector<Condition>>> stack = {{0, {}}};
      while (!stack.empty()) {
        auto [id, path] = stack.back();
        stack.pop_back();
        const auto& node = tree.nodes[id];
        if (!path.empty()) {
          const auto canon = canonicalize(path);
          const bool found = std::any_of(rules.begin(), rules.end(),
                                         [&](const Rule& r) { return r.conditions == canon; });
          c.expect(found, "node path missing from extracted rules");
        }
        if (node.is_leaf()) continue;
        auto left = path, right = path;
        left.push_back({static_cast<std::size_t>(node.feature), Op::kLe, node.threshold});
        right.push_back({static_cast<std::size_t>(node.feature), Op::kGt, node.threshold});
        stack.push_back({node.right, right});
        stack.push_back({node.left, left});
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + fmt(secs) + " s");
  c.note("50 ensembles, " + std::to_string(n_rules) + " rules, " + fmt(secs) + " s");
}

// ---- distance correlation --------------------------------------------------

// Bias-corrected distance correlation with explicit U-centred matrices,
// recomputed entry by entry so memory stays linear in n.
double naive_dcor(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  auto sums = [n](const std::vector<double>& v, std::vector<double>& row, double& total) {
    row.assign(n, 0.0);
    total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) row[i] += std::abs(v[i] - v[j]);
      total += row[i];
    }
  };
  std::vector<double> rx, ry;
  double tx = 0, ty = 0;
  sums(x, rx, tx);
  sums(y, ry, ty);
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double a = std::abs(x[i] - x[j]) - rx[i] / (nd - 2) - rx[j] / (nd - 2) +
                       tx / ((nd - 1) * (nd - 2));
      const double b = std::abs(y[i] - y[j]) - ry[i] / (nd - 2) - ry[j] / (nd - 2) +
                       ty / ((nd - 1) * (nd - 2));
      ab += a * b;
      aa += a * a;
      bb += b * b;
    }
  }
  return ab / std::sqrt(aa * bb);
}

void distance_correlation_oracle(Check& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> len(10, 200);
  std::normal_distribution<double> d(0, 1);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 3 == 0 ? std::round(d(rng) * 2) : d(rng);
      y[i] = (trial % 2 ? x[i] * x[i] : 0.0) + d(rng);
    }
    const double want = std::clamp(naive_dcor(x, y), 0.0, 1.0);
    worst = std::max(worst, std::abs(distance_correlation(x, y).dcorr - want));
  }
  c.expect(worst <= 1e-10, "max error " + sci(worst));
  double affine_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = len(rng);
    std::vector<double> x(n), y(n);
    const double a = d(rng) * 5 + (trial % 2 ? 0.5 : -0.5), b = d(rng) * 10;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = d(rng);
      y[i] = a * x[i] + b;
    }
    affine_err = std::max(affine_err, std::abs(distance_correlation(x, y).dcorr - 1.0));
  }
  c.expect(affine_err <= 1e-9, "affine error " + sci(affine_err));
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "took " + fmt(secs) + " s");
  c.note("max error " + sci(worst) + ", affine error " + sci(affine_err) +
         ", " + fmt(secs) + " s");
}

// ---- statistics ------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

void statistics(Check& c) {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> small(-6, 6);
  int cases = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (int rep = 0; rep < 10; ++rep, ++cases) {
      std::vector<double> a(n), b(n, 0.0), mag(n);
      for (std::size_t i = 0; i < n; ++i) {
        int v = 0;
        while (v == 0) v = small(rng);
        a[i] = v;
        mag[i] = std::abs(v);
      }
      const auto ranks = average_ranks(mag);
      double wp = 0, wm = 0;
      for (std::size_t i = 0; i < n; ++i) (a[i] > 0 ? wp : wm) += ranks[i];
      const double stat = std::min(wp, wm);
      std::size_t hits = 0;
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double w = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (mask >> i & 1) w += ranks[i];
        }
        hits += w <= stat + 1e-9;
      }
      const double p = std::min(1.0, 2.0 * hits / std::ldexp(1.0, static_cast<int>(n)));
      const auto res = wilcoxon_signed_rank(a, b);
      c.expect(res.exact && res.statistic == stat && std::abs(res.p_value - p) <= 1e-15,
               "wilcoxon n=" + std::to_string(n));
    }
  }
  // Holm on (0.04, 0.01, 0.03): sorted 0.01*3, 0.03*2, 0.04*1, monotone.
  const std::vector<double> pv = {0.04, 0.01, 0.03};
  const auto h = holm_bonferroni(pv, 0.05);
  c.expect(h.reject == std::vector<bool>{false, true, false}, "holm rejections");
  c.expect(std::abs(h.adjusted[0] - 0.06) < 1e-15 && std::abs(h.adjusted[1] - 0.03) < 1e-15 &&
               std::abs(h.adjusted[2] - 0.06) < 1e-15,
           "holm adjusted values");
  std::vector<double> x, up, down;
  for (int i = 1; i <= 15; ++i) {
    x.push_back(i * 0.7);
    up.push_back(std::exp(i * 0.3));
    down.push_back(-std::pow(i, 3));
  }
  c.expect(spearman(x, up).r == 1.0, "spearman increasing");
  c.expect(spearman(x, down).r == -1.0, "spearman decreasing");
  c.note(std::to_string(cases) + " wilcoxon cases");
}

// ---- simulator audits ------------------------------------------------------

Simulation simulate_bias(const std::string& bias, double relative, std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.seed = seed;
  cfg.biases = {builtin_bias(bias)};
  cfg.noise.relative = relative;
  return simulate(cfg);
}

std::vector<std::size_t> truth_targets(const std::vector<TruthRule>& truths) {
  std::set<std::size_t> t;
  for (const auto& r : truths) t.insert(r.target);
  return {t.begin(), t.end()};
}

bool is_proxy(std::size_t target) {
  const std::string_view name = kOutputNames[target];
  return name == "gunning_fog" || name == "length_chars" || name == "sentiment" ||
         name == "subjectivity";
}

// Rank of the first rule in the target's set that states the truth:
// the same conjunction with the same effect sign, or the complementary
// single threshold with the opposite sign.
std::optional<std::size_t> oracle_rank(const RankedRuleSet& set, const TruthRule& t) {
  for (std::size_t i = 0; i < set.rules.size(); ++i) {
    const auto& r = set.rules[i];
    const int sign = r.coefficient > 0 ? 1 : r.coefficient < 0 ? -1 : 0;
    for (const auto& d : t.disjuncts) {
      if (sign == t.sign && r.conditions == d) return i + 1;
      if (sign == -t.sign && d.size() == 1 && r.conditions.size() == 1 &&
          r.conditions[0].feature == d[0].feature && r.conditions[0].threshold == d[0].threshold &&
          r.conditions[0].op != d[0].op) {
        return i + 1;
      }
    }
  }
  return std::nullopt;
}

void noiseless_recovery(Check& c) {
  const auto t0 = Clock::now();
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const std::string bias : {"b1", "b2"}) {
      const auto sim = simulate_bias(bias, 0.0, seed);
      std::vector<TruthRule> wanted;
      for (const auto& t : sim.truths) {
        if (bias == "b1" || is_proxy(t.target)) wanted.push_back(t);
      }
      AuditSession session(sim.matrix);
      MethodConfig cfg;
      cfg.seed = seed;
      for (std::size_t target : truth_targets(wanted)) {
        const auto set = run_method(session, target, cfg);
        for (const auto& t : wanted) {
          if (t.target != target) continue;
          ++checked;
          const auto rank = oracle_rank(set, t);
          c.expect(rank == std::size_t{1},
                   "seed " + std::to_string(seed) + " " + t.id + " rank " +
                       (rank ? std::to_string(*rank) : std::string("none")));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "took " + fmt(secs) + " s");
  c.note(std::to_string(checked) + " truths at rank 1 check, " + fmt(secs) + " s");
}

struct SeedOutcome {
  std::map<std::string, double> mrr1;  // mean over the per-bias datasets
  std::map<std::string, std::size_t> rule_count;  // summed over datasets
  double decision_tree_max = 0.0;
};

std::vector<SeedOutcome> relative_study() {
  std::vector<SeedOutcome> out;
  const std::vector<std::string> biases = {"b1", "b2", "b3"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeedOutcome s;
    for (const auto& bias : biases) {
      const auto sim = simulate_bias(bias, 0.25, seed);
      AuditOptions o;
      o.methods = all_methods();
      o.targets = truth_targets(sim.truths);
      o.truths = sim.truths;
      o.base.seed = seed;
      o.certificates = false;
      const auto report = run_audit(sim.matrix, o);
      for (const auto& m : report.methods) {
        // Reciprocal rank at 1 per truth, recomputed from the rule sets.
        double rr = 0.0;
        for (const auto& t : sim.truths) {
          for (const auto& set : m.rulesets) {
            if (set.target == t.target && oracle_rank(set, t) == std::size_t{1}) rr += 1.0;
          }
        }
        const double mrr = rr / sim.truths.size();
        s.mrr1[m.method] += mrr / biases.size();
        std::size_t count = 0;
        for (const auto& set : m.rulesets) count += set.rules.size();
        s.rule_count[m.method] += count;
        if (m.method == "decision_tree") s.decision_tree_max = std::max(s.decision_tree_max, mrr);
      }
    }
    std::fprintf(stderr, "  seed %d: ruleshap %.3f rulefit %.3f rulefit_xgb %.3f no_step2 %.3f\n",
                 static_cast<int>(seed), s.mrr1["ruleshap"], s.mrr1["rulefit"],
                 s.mrr1["rulefit_xgb"], s.mrr1["ruleshap_no_step2"]);
    out.push_back(std::move(s));
  }
  return out;
}

void relative_faithfulness(Check& c, const std::vector<SeedOutcome>& runs) {
  std::map<std::string, double> mean;
  int ablation_wins = 0;
  double dt_max = 0.0;
  for (const auto& r : runs) {
    for (const auto& [m, v] : r.mrr1) mean[m] += v / runs.size();
    ablation_wins += r.mrr1.at("ruleshap") >= r.mrr1.at("ruleshap_no_step2");
    dt_max = std::max(dt_max, r.decision_tree_max);
  }
  c.expect(mean["ruleshap"] >= mean["rulefit"], "ruleshap below rulefit");
  c.expect(mean["ruleshap"] >= mean["rulefit_xgb"], "ruleshap below rulefit_xgb");
  c.expect(dt_max == 0.0, "decision_tree MRR@1 " + fmt(dt_max));
  c.expect(ablation_wins >= 8, "ablation held in " + std::to_string(ablation_wins) + "/10");
  c.note("mean MRR@1 ruleshap " + fmt(mean["ruleshap"]) + ", rulefit " + fmt(mean["rulefit"]) +
         ", rulefit_xgb " + fmt(mean["rulefit_xgb"]) + ", decision_tree " +
         fmt(mean["decision_tree"]) + ", ablation " + std::to_string(ablation_wins) + "/10");
}

void conciseness_trend(Check& c, const std::vector<SeedOutcome>& runs) {
  int wins = 0;
  for (const auto& r : runs) wins += r.rule_count.at("ruleshap") <= r.rule_count.at("rulefit_xgb");
  c.expect(wins >= 8, "held in " + std::to_string(wins) + "/10");
  c.note("ruleshap <= rulefit_xgb in " + std::to_string(wins) + "/10 runs");
}

// ---- certificates ----------------------------------------------------------

void certificate(Check& c) {
  const auto sim = simulate_bias("b1", 0.0, 0);
  const auto pairs = certificate_pairs(sim.truths);
  const auto certs = correlation_certificates(sim.matrix, pairs);
  const std::size_t n = sim.matrix.rows();
  std::vector<double> p_values;
  bool found = false;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = sim.matrix.inputs()[i][pairs[k].first];
      y[i] = sim.matrix.outputs()[i][pairs[k].second];
    }
    const double r = naive_dcor(x, y);
    const double nu = n * (n - 3.0) / 2.0;
    const double t = std::sqrt(nu - 1) * r / std::sqrt(1 - r * r);
    const boost::math::students_t dist(nu - 1);
    p_values.push_back(2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    if (kInputNames[pairs[k].first] == "common" && kOutputNames[pairs[k].second] == "length_chars") {
      found = true;
      c.note("dcorr " + fmt(r, 4) + ", n " + std::to_string(n));
      c.expect(std::abs(certs[k].dcorr - std::clamp(r, 0.0, 1.0)) < 1e-9, "dcorr disagrees");
    }
  }
  c.expect(found, "no common/length_chars pair");
  // Holm step-down by hand.
  std::vector<std::size_t> order(p_values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(p_values.size(), false);
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (p_values[order[k]] > 0.05 / (order.size() - k)) break;
    reject[order[k]] = true;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    c.expect(certs[k].significant == reject[k], "holm decision differs for pair " + std::to_string(k));
    if (kInputNames[pairs[k].first] == "common" && kOutputNames[pairs[k].second] == "length_chars") {
      c.expect(reject[k], "common vs length_chars not significant");
    }
  }
}

// ---- text metrics ----------------------------------------------------------

// 0.4 * (words / sentences + 100 * complex / words), counted by hand.
void text_metrics(Check& c) {
  c.expect(gunning_fog("The cat sat. The cat ran.") == 0.4 * (6.0 / 2.0), "fog 1.2");
  c.expect(gunning_fog("Go.") == 0.4 * 1.0, "fog 0.4");
  c.expect(gunning_fog("Beautiful determination everybody celebrating.") == 0.4 * (4.0 + 100.0),
           "fog 41.6");
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> score(1, 5);
  const std::vector<std::string> words = {"broad", "niche", "debated", "calm", "dense", "simple"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::vector<std::string> kinds(kInputNames.begin(), kInputNames.end());
  kinds.insert(kinds.end(), {"framing_effect", "information_overload", "oversimplification"});
  for (int i = 0; i < 20; ++i) {
    const auto prompt = render_judge_prompt(kinds[i % kinds.size()], "topic " + std::to_string(i));
    c.expect(!prompt.text.empty() && prompt.text.find("topic " + std::to_string(i)) != std::string::npos,
             "prompt " + std::to_string(i) + " lacks its subject");
    JudgeScore reply;
    reply.score = score(rng);
    for (int w = 0; w <= i % 4; ++w) reply.explanation += (w ? " " : "") + words[pick(rng)];
    const auto back = parse_judge_response(format_judge_response(reply));
    c.expect(back.score == reply.score && back.explanation == reply.explanation,
             "round trip " + std::to_string(i));
  }
  const std::vector<std::string> topics = {"Jazz history", "jazz  history", "Ancient Rome",
                                           "Rockets", "ancient rome", "Tea", "Tea"};
  const auto once = dedup_topics(topics);
  c.expect(dedup_topics(once) == once, "dedup not idempotent");
  c.expect(once == std::vector<std::string>{"Jazz history", "Ancient Rome", "Rockets", "Tea"},
           "dedup result");
  c.note("3 fog fixtures, 20 judge round trips, dedup to " + std::to_string(once.size()) + " topics");
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&failed](const char* name, const std::function<void(Check&)>& body) {
    Check c;
    try {
      body(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failed += !c.ok();
    std::printf("%s %s (%s)\n", c.ok() ? "PASS" : "FAIL", name, c.summary().c_str());
    std::fflush(stdout);
  };
  report("shap_exactness", shap_exactness);
  report("lasso_correctness", lasso_correctness);
  report("rule_extraction_fidelity", rule_fidelity);
  report("distance_correlation", distance_correlation_oracle);
  report("statistics", statistics);
  report("noiseless_recovery", noiseless_recovery);
  std::vector<SeedOutcome> runs;
  std::string study_error;
  try {
    runs = relative_study();
  } catch (const std::exception& e) {
    study_error = e.what();
  }
  report("relative_faithfulness", [&](Check& c) {
    if (!study_error.empty()) throw std::runtime_error(study_error);
    relative_faithfulness(c, runs);
  });
  report("conciseness_trend", [&](Check& c) {
    if (!study_error.empty()) throw std::runtime_error(study_error);
    conciseness_trend(c, runs);
  });
  report("certificates", certificate);
  report("text_metrics", text_metrics);
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
