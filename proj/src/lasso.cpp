// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/lasso.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "ruleshap/error.hpp"

namespace ruleshap {

namespace {

// Sufficient statistics of a row subset: cross-products of the binary
// columns, column counts, X'v, sum(v), sum(v^2).
struct RawStats {
  std::size_t n = 0;
  std::size_t cols = 0;
  std::vector<double> cross;  // cols x cols
  std::vector<double> count;
  std::vector<double> xv;
  double sum_v = 0.0;
  double sum_vv = 0.0;

  RawStats& operator+=(const RawStats& o) {
    n += o.n;
    for (std::size_t i = 0; i < cross.size(); ++i) cross[i] += o.cross[i];
    for (std::size_t j = 0; j < cols; ++j) {
      count[j] += o.count[j];
      xv[j] += o.xv[j];
    }
    sum_v += o.sum_v;
    sum_vv += o.sum_vv;
    return *this;
  }
};

RawStats zero_stats(std::size_t cols) {
  RawStats s;
  s.cols = cols;
  s.cross.assign(cols * cols, 0.0);
  s.count.assign(cols, 0.0);
  s.xv.assign(cols, 0.0);
  return s;
}

RawStats raw_stats(const DesignMatrix& d, std::span<const double> v) {
  const std::size_t p = d.cols();
  RawStats s = zero_stats(p);
  s.n = d.rows();
  for (double y : v) {
    s.sum_v += y;
    s.sum_vv += y * y;
  }
  for (std::size_t j = 0; j < p; ++j) {
    const auto cj = d.column(j);
    for (std::size_t k = j; k < p; ++k) {
      const auto ck = d.column(k);
      std::size_t c = 0;
      for (std::size_t w = 0; w < cj.size(); ++w) {
        c += static_cast<std::size_t>(std::popcount(cj[w] & ck[w]));
      }
      s.cross[j * p + k] = s.cross[k * p + j] = static_cast<double>(c);
    }
    s.count[j] = s.cross[j * p + j];
    double acc = 0.0;
    for (std::size_t w = 0; w < cj.size(); ++w) {
      std::uint64_t bits = cj[w];
      while (bits) {
        const int b = std::countr_zero(bits);
        acc += v[w * 64 + static_cast<std::size_t>(b)];
        bits &= bits - 1;
      }
    }
    s.xv[j] = acc;
  }
  return s;
}

// Gram system of the least-squares part, centred when an intercept is fit.
struct Problem {
  std::size_t p = 0;
  std::vector<double> gram;
  std::vector<double> q;
  std::vector<double> mean_x;
  double mean_v = 0.0;
  double vv = 0.0;  // (centred) target sum of squares
  bool intercept = true;
};

Problem make_problem(const RawStats& s, bool intercept) {
  Problem pr;
  pr.p = s.cols;
  pr.intercept = intercept;
  pr.gram = s.cross;
  pr.q = s.xv;
  pr.mean_x.assign(s.cols, 0.0);
  pr.vv = s.sum_vv;
  if (intercept && s.n > 0) {
    const double n = static_cast<double>(s.n);
    pr.mean_v = s.sum_v / n;
    for (std::size_t j = 0; j < s.cols; ++j) pr.mean_x[j] = s.count[j] / n;
    for (std::size_t j = 0; j < s.cols; ++j) {
      for (std::size_t k = 0; k < s.cols; ++k) {
        pr.gram[j * s.cols + k] -= s.count[j] * s.count[k] / n;
      }
      pr.q[j] -= s.count[j] * s.sum_v / n;
    }
    pr.vv -= s.sum_v * s.sum_v / n;
  }
  return pr;
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Cyclic coordinate descent with an active-set inner loop. `w` is the warm
// start and receives the solution. Returns {sweeps, converged}.
std::pair<int, bool> coordinate_descent(const Problem& pr, double alpha,
                                        std::span<const double> rho, std::vector<double>& w,
                                        const LassoParams& params) {
  const std::size_t p = pr.p;
  std::vector<double> grad(pr.q);
  for (std::size_t k = 0; k < p; ++k) {
    if (w[k] == 0.0) continue;
    for (std::size_t j = 0; j < p; ++j) grad[j] -= pr.gram[j * p + k] * w[k];
  }
  // Diagonals this small are empty or constant columns (after centring).
  const double kTinyDiag = 1e-12;

  // A coordinate step of size delta lowers the objective by at least
  // gram_jj delta^2 / 2, so this bounds the progress of a sweep.
  const double settle = params.objective_tol * pr.vv;
  double max_change = 0.0;
  double max_decrease = 0.0;
  auto update = [&](std::size_t j) {
    const double d = pr.gram[j * p + j];
    double next = 0.0;
    if (d > kTinyDiag) next = soft_threshold(grad[j] + d * w[j], alpha / rho[j]) / d;
    const double delta = next - w[j];
    if (delta != 0.0) {
      const double* col = pr.gram.data() + j * p;
      for (std::size_t k = 0; k < p; ++k) grad[k] -= col[k] * delta;
      w[j] = next;
      max_change = std::max(max_change, std::abs(delta));
      max_decrease = std::max(max_decrease, d * delta * delta);
    }
  };
  auto done = [&] {
    return max_change < params.tol || (settle > 0.0 && max_decrease <= settle);
  };

  int sweeps = 0;
  while (sweeps < params.max_iter) {
    max_change = max_decrease = 0.0;
    for (std::size_t j = 0; j < p; ++j) update(j);
    ++sweeps;
    if (done()) return {sweeps, true};

    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < p; ++j) {
      if (w[j] != 0.0) active.push_back(j);
    }
    while (sweeps < params.max_iter) {
      max_change = max_decrease = 0.0;
      for (std::size_t j : active) update(j);
      ++sweeps;
      if (done()) break;
    }
  }
  return {sweeps, false};
}

void check_inputs(const DesignMatrix& design, std::span<const double> target,
                  std::span<const double> rule_weights) {
  if (design.cols() == 0 || design.rows() == 0) {
    fail(ErrorCode::kEmptyInput, "empty design matrix");
  }
  if (target.size() != design.rows()) fail(ErrorCode::kDimension, "target length mismatch");
  if (rule_weights.size() != design.cols()) {
    fail(ErrorCode::kDimension, "one weight per rule required");
  }
  for (double r : rule_weights) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      fail(ErrorCode::kDomain, "rule weights must be strictly positive");
    }
  }
  for (double y : target) {
    if (!std::isfinite(y)) fail(ErrorCode::kDomain, "non-finite target value");
  }
}

LassoFit finish(const Problem& pr, double alpha, std::span<const double> rho,
                std::vector<double> w, std::pair<int, bool> status) {
  LassoFit fit;
  fit.alpha = alpha;
  fit.rule_weights.assign(rho.begin(), rho.end());
  fit.n_iterations = status.first;
  fit.converged = status.second;
  if (pr.intercept) {
    double b = pr.mean_v;
    for (std::size_t j = 0; j < pr.p; ++j) b -= pr.mean_x[j] * w[j];
    fit.intercept = b;
  }
  fit.coefficients = std::move(w);
  return fit;
}

DesignMatrix subset_rows(const DesignMatrix& d, const std::vector<std::size_t>& rows) {
  DesignMatrix out(rows.size(), d.cols());
  for (std::size_t j = 0; j < d.cols(); ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (d.get(rows[r], j)) out.set(r, j);
    }
  }
  return out;
}

}  // namespace

double rule_feature_weight(const Rule& rule, const FeatureWeights& weights) {
  std::set<std::size_t> features;
  for (const auto& c : rule.conditions) {
    if (c.feature >= kNumInputs) {
      fail(ErrorCode::kSchema, "rule references unknown feature #" + std::to_string(c.feature));
    }
    features.insert(c.feature);
  }
  if (features.empty()) fail(ErrorCode::kContract, "rule without conditions");
  double sum = 0.0;
  for (std::size_t f : features) sum += weights.normalized[f];
  return sum / static_cast<double>(features.size());
}

LassoFit weighted_lasso(const DesignMatrix& design, std::span<const double> target, double alpha,
                        std::span<const double> rule_weights, const LassoParams& params) {
  check_inputs(design, target, rule_weights);
  if (!(alpha >= 0.0)) fail(ErrorCode::kDomain, "alpha must be non-negative");
  const Problem pr = make_problem(raw_stats(design, target), params.fit_intercept);
  std::vector<double> w(pr.p, 0.0);
  const auto status = coordinate_descent(pr, alpha, rule_weights, w, params);
  return finish(pr, alpha, rule_weights, std::move(w), status);
}

double lasso_alpha_max(const DesignMatrix& design, std::span<const double> target,
                       std::span<const double> rule_weights, bool fit_intercept) {
  check_inputs(design, target, rule_weights);
  const Problem pr = make_problem(raw_stats(design, target), fit_intercept);
  double best = 0.0;
  for (std::size_t j = 0; j < pr.p; ++j) best = std::max(best, std::abs(pr.q[j]) * rule_weights[j]);
  return best;
}

LassoCvResult weighted_lasso_cv(const DesignMatrix& design, std::span<const double> target,
                                std::span<const double> rule_weights,
                                const LassoCvParams& params) {
  check_inputs(design, target, rule_weights);
  if (params.n_folds < 2 || params.n_alphas < 1 || !(params.alpha_min_ratio > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid cross-validation parameters");
  }
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  const std::size_t k_folds = std::min<std::size_t>(static_cast<std::size_t>(params.n_folds), n);
  if (k_folds < 2) fail(ErrorCode::kInsufficientData, "too few rows for cross-validation");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k_folds);
  for (std::size_t i = 0; i < n; ++i) folds[i % k_folds].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());

  std::vector<DesignMatrix> fold_design;
  std::vector<std::vector<double>> fold_target;
  std::vector<RawStats> fold_stats;
  for (const auto& rows : folds) {
    fold_design.push_back(subset_rows(design, rows));
    std::vector<double> v;
    for (std::size_t r : rows) v.push_back(target[r]);
    fold_stats.push_back(raw_stats(fold_design.back(), v));
    fold_target.push_back(std::move(v));
  }
  RawStats all = zero_stats(p);
  for (const auto& s : fold_stats) all += s;

  const bool intercept = params.solver.fit_intercept;
  const Problem full = make_problem(all, intercept);
  double alpha_max = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    alpha_max = std::max(alpha_max, std::abs(full.q[j]) * rule_weights[j]);
  }

  LassoCvResult result;
  if (alpha_max <= 0.0) {
    // Nothing correlates with the target: the all-zero model is exact.
    result.alphas = {0.0};
    result.cv_error = {0.0};
    std::vector<double> w(p, 0.0);
    result.fit = finish(full, 0.0, rule_weights, std::move(w), {0, true});
    return result;
  }
  const int m = params.n_alphas;
  for (int a = 0; a < m; ++a) {
    const double frac = m == 1 ? 0.0 : static_cast<double>(a) / (m - 1);
    result.alphas.push_back(alpha_max * std::pow(params.alpha_min_ratio, frac));
  }

  LassoParams fold_solver = params.solver;
  fold_solver.objective_tol = std::max(fold_solver.objective_tol, params.fold_objective_tol);
  result.cv_error.assign(result.alphas.size(), 0.0);
  std::vector<std::vector<double>> fold_mse(result.alphas.size(), std::vector<double>(k_folds));
  for (std::size_t f = 0; f < k_folds; ++f) {
    RawStats train = zero_stats(p);
    for (std::size_t g = 0; g < k_folds; ++g) {
      if (g != f) train += fold_stats[g];
    }
    const Problem pr = make_problem(train, intercept);
    std::vector<double> w(p, 0.0);
    const DesignMatrix& held = fold_design[f];
    const auto& held_v = fold_target[f];
    for (std::size_t a = 0; a < result.alphas.size(); ++a) {
      coordinate_descent(pr, result.alphas[a], rule_weights, w, fold_solver);
      double b = pr.mean_v;
      if (intercept) {
        for (std::size_t j = 0; j < p; ++j) b -= pr.mean_x[j] * w[j];
      } else {
        b = 0.0;
      }
      std::vector<double> pred(held.rows(), b);
      for (std::size_t j = 0; j < p; ++j) {
        if (w[j] == 0.0) continue;
        const auto col = held.column(j);
        for (std::size_t word = 0; word < col.size(); ++word) {
          std::uint64_t bits = col[word];
          while (bits) {
            pred[word * 64 + static_cast<std::size_t>(std::countr_zero(bits))] += w[j];
            bits &= bits - 1;
          }
        }
      }
      double sse = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = held_v[i] - pred[i];
        sse += e * e;
      }
      result.cv_error[a] += sse;
      fold_mse[a][f] = sse / static_cast<double>(held.rows());
    }
  }
  for (double& e : result.cv_error) e /= static_cast<double>(n);

  // Smallest error; ties resolve to the larger (sparser) alpha.
  std::size_t best = 0;
  for (std::size_t a = 1; a < result.cv_error.size(); ++a) {
    if (result.cv_error[a] < result.cv_error[best] * (1.0 - 1e-12)) best = a;
  }
  if (params.one_standard_error) {
    const auto& e = fold_mse[best];
    const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(k_folds);
    double var = 0.0;
    for (double v : e) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / static_cast<double>(k_folds - 1) / static_cast<double>(k_folds));
    std::size_t pick = best;
    while (pick > 0 && result.cv_error[pick - 1] <= result.cv_error[best] + se) --pick;
    best = pick;
  }
  result.selected = best;

  std::vector<double> w(p, 0.0);
  std::pair<int, bool> status{0, true};
  for (std::size_t a = 0; a <= best; ++a) {
    status = coordinate_descent(full, result.alphas[a], rule_weights, w, params.solver);
  }
  result.fit = finish(full, result.alphas[best], rule_weights, std::move(w), status);
  return result;
}

double lasso_objective(const DesignMatrix& design, std::span<const double> target,
                       const LassoFit& fit) {
  double sse = 0.0;
  for (std::size_t r = 0; r < design.rows(); ++r) {
    double pred = fit.intercept;
    for (std::size_t j = 0; j < design.cols(); ++j) {
      if (design.get(r, j)) pred += fit.coefficients[j];
    }
    const double e = target[r] - pred;
    sse += e * e;
  }
  double penalty = 0.0;
  for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
    penalty += std::abs(fit.coefficients[j]) / fit.rule_weights[j];
  }
  return 0.5 * sse + fit.alpha * penalty;
}

std::vector<double> rule_importance(std::span<const double> coefficients, const RuleSet& rules,
                                    ImportanceMode mode) {
  if (coefficients.size() != rules.size()) {
    fail(ErrorCode::kDimension, "one coefficient per rule required");
  }
  std::vector<double> out(rules.size());
  for (std::size_t j = 0; j < rules.size(); ++j) {
    const double s = rules[j].support;
    if (!(s >= 0.0 && s <= 1.0)) fail(ErrorCode::kDomain, "rule support outside [0, 1]");
    const double w = std::abs(coefficients[j]);
    out[j] = mode == ImportanceMode::kRuleShap ? w : w * std::sqrt(s * (1.0 - s));
  }
  return out;
}

}  // namespace ruleshap
