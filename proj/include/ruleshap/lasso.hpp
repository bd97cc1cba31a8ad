// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Weighted LASSO over binary rule activations:
//
//   min_w,b  1/2 ||v - Xw - b||^2 + alpha * sum_j |w_j| / rho_j
//
// solved by cyclic coordinate descent on the (centred) Gram matrix. The
// intercept b is unpenalized; columns are not standardized.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ruleshap/rules.hpp"
#include "ruleshap/shap.hpp"

namespace ruleshap {

struct LassoParams {
  int max_iter = 10000;
  double tol = 1e-8;
  // If positive, also stop once no coordinate step in a sweep lowers the
  // objective by more than objective_tol times the centred target sum of
  // squares.
  double objective_tol = 0.0;
  bool fit_intercept = true;
};

struct LassoFit {
  double intercept = 0.0;
  std::vector<double> coefficients;
  double alpha = 0.0;
  std::vector<double> rule_weights;
  int n_iterations = 0;
  bool converged = false;
};

// Mean normalized weight over the distinct features a rule conditions on.
double rule_feature_weight(const Rule& rule, const FeatureWeights& weights);

LassoFit weighted_lasso(const DesignMatrix& design, std::span<const double> target, double alpha,
                        std::span<const double> rule_weights, const LassoParams& params = {});

struct LassoCvParams {
  int n_folds = 5;
  int n_alphas = 20;
  double alpha_min_ratio = 1e-4;
  std::uint64_t seed = 0;
  // Largest alpha whose error is within one standard error of the minimum.
  bool one_standard_error = true;
  LassoParams solver;
  // Stopping rule for the per-fold path fits, which only feed held-out
  // errors. The final refit uses `solver` unchanged.
  double fold_objective_tol = 1e-7;
};

struct LassoCvResult {
  LassoFit fit;  // refit on all rows at the selected alpha
  std::vector<double> alphas;  // descending
  std::vector<double> cv_error;  // mean held-out squared error per alpha
  std::size_t selected = 0;
};

// Largest alpha worth trying: every coefficient is zero at or above it.
double lasso_alpha_max(const DesignMatrix& design, std::span<const double> target,
                       std::span<const double> rule_weights, bool fit_intercept = true);

// K-fold selection of alpha over a log grid from alpha_max down to
// alpha_max * alpha_min_ratio. Fold membership is a seeded shuffle.
LassoCvResult weighted_lasso_cv(const DesignMatrix& design, std::span<const double> target,
                                std::span<const double> rule_weights, const LassoCvParams& params);

double lasso_objective(const DesignMatrix& design, std::span<const double> target,
                       const LassoFit& fit);

enum class ImportanceMode { kRuleShap, kRuleFit };

// kRuleShap: |w|. kRuleFit: |w| * sqrt(s (1 - s)) with s the rule support.
std::vector<double> rule_importance(std::span<const double> coefficients, const RuleSet& rules,
                                    ImportanceMode mode);

}  // namespace ruleshap
