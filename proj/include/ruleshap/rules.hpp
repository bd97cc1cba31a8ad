// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Regression trees (boosted and single CART), conjunctive threshold rules
// read off their root-to-node paths, and the binary rule activation matrix.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ruleshap/dataset.hpp"
#include "ruleshap/shap.hpp"

namespace ruleshap {

// Rows of length kNumInputs, one per instance.
using FeatureRows = std::span<const InputVector>;

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // prediction if the node were a leaf
  double gain = 0.0;
  std::size_t count = 0;  // training rows reaching the node

  bool is_leaf() const noexcept { return feature < 0; }
};

// nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const InputVector& x) const;
  int depth() const;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;

  double predict(const InputVector& x) const;
};

struct BoostingParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double l2_lambda = 1.0;
  double min_child_weight = 1.0;
};

// Squared-error boosting with Newton leaf values -G/(H+lambda) and split
// gain GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda). At every depth
// level ceil(colsample_bylevel * 11) features are drawn without replacement
// with probability proportional to weights.normalized; every midpoint between
// consecutive distinct values of a drawn feature is evaluated.
TreeEnsemble fit_gbrt(FeatureRows inputs, std::span<const double> target,
                      const BoostingParams& params, const FeatureWeights& weights,
                      double colsample_bylevel, std::uint64_t seed);

struct CartParams {
  int max_depth = -1;  // negative: no limit
  std::size_t min_samples_leaf = 1;
};

// Variance-reduction regression tree; node values are node means.
Tree fit_cart(FeatureRows inputs, std::span<const double> target, const CartParams& params);

enum class Op { kLe, kGt };

struct Condition {
  std::size_t feature = 0;
  Op op = Op::kLe;
  double threshold = 0.0;

  bool holds(const InputVector& x) const {
    return op == Op::kLe ? x[feature] <= threshold : x[feature] > threshold;
  }
  auto operator<=>(const Condition&) const = default;
};

std::string to_string(const Condition& c);

struct Rule {
  std::vector<Condition> conditions;
  std::size_t target = 0;
  double coefficient = 0.0;
  double support = 0.0;
  double importance = 0.0;

  bool holds(const InputVector& x) const;
  std::string describe() const;  // "common <= 2 AND positive > 3"
};

using RuleSet = std::vector<Rule>;

inline constexpr int kGridMax = kScoreMax;

// Non-integer thresholds t in (1, grid_max) become floor(t); per feature
// only the tightest <= and > bounds survive; order is (feature, op, value).
std::vector<Condition> canonicalize(std::vector<Condition> conditions, int grid_max = kGridMax);
bool is_canonical(const std::vector<Condition>& conditions, int grid_max = kGridMax);

// One rule per non-root node; duplicates (same canonical conditions) keep
// the first occurrence. `target` is stamped on every rule.
RuleSet extract_rules(const TreeEnsemble& ensemble, std::size_t target, int grid_max = kGridMax);
RuleSet extract_rules(const Tree& tree, std::size_t target, int grid_max = kGridMax);

// Per-node variant used by the decision-tree baseline: the rule of node i
// is paired with nodes[i].value. Indexes align with non-root node order.
struct NodeRule {
  Rule rule;
  double node_value = 0.0;
};
std::vector<NodeRule> extract_node_rules(const Tree& tree, std::size_t target,
                                         int grid_max = kGridMax);

// Binary activations, instances x rules, stored as per-rule bitsets.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t words() const noexcept { return words_; }

  bool get(std::size_t row, std::size_t col) const {
    return (bits_[col * words_ + row / 64] >> (row % 64)) & 1u;
  }
  void set(std::size_t row, std::size_t col) {
    bits_[col * words_ + row / 64] |= std::uint64_t{1} << (row % 64);
  }
  std::span<const std::uint64_t> column(std::size_t col) const {
    return {bits_.data() + col * words_, words_};
  }
  std::size_t column_count(std::size_t col) const;

  // Dense row-major copy, mostly for tests and small problems.
  std::vector<double> dense() const;
  static DesignMatrix from_dense(std::span<const double> values, std::size_t rows,
                                 std::size_t cols);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Validates rules (non-empty, known features) and evaluates activations.
DesignMatrix build_design_matrix(const RuleSet& rules, FeatureRows inputs);

// Fills Rule::support from activations.
void assign_support(RuleSet& rules, const DesignMatrix& design);

}  // namespace ruleshap
