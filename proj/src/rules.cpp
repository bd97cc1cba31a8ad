// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/rules.hpp"

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

// Row indices sorted by each feature's value, computed once per fit.
using Presorted = std::vector<std::vector<std::uint32_t>>;

Presorted presort(FeatureRows x) {
  Presorted sorted(kNumInputs);
  for (std::size_t f = 0; f < kNumInputs; ++f) {
    auto& idx = sorted[f];
    idx.resize(x.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a][f] < x[b][f]; });
  }
  return sorted;
}

struct GrowParams {
  int max_depth = 3;  // negative: unlimited
  double lambda = 1.0;
  double min_child_weight = 1.0;
  std::size_t features_per_level = kNumInputs;
};

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  double gg = 0.0;
  std::size_t count = 0;
};

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

std::vector<std::size_t> sample_features(std::size_t k, const FeatureWeights& weights,
                                         std::mt19937_64& rng) {
  std::vector<std::size_t> chosen;
  if (k >= kNumInputs) {
    chosen.resize(kNumInputs);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    return chosen;
  }
  std::vector<double> w(weights.normalized.begin(), weights.normalized.end());
  std::vector<bool> taken(kNumInputs, false);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (std::size_t f = 0; f < kNumInputs; ++f) {
      if (!taken[f]) total += w[f];
    }
    double u = unit(rng) * total;
    std::size_t pick = kNumInputs;
    for (std::size_t f = 0; f < kNumInputs; ++f) {
      if (taken[f]) continue;
      pick = f;
      if (u < w[f]) break;
      u -= w[f];
    }
    taken[pick] = true;
    chosen.push_back(pick);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

double score(double g, double h, double lambda) { return g * g / (h + lambda); }

// Level-wise exact greedy growth on gradient pairs (g, h). Node values are
// the Newton steps -G/(H + lambda).
Tree grow_tree(const Presorted& sorted, FeatureRows x, std::span<const double> g,
               std::span<const double> h, const GrowParams& params,
               const FeatureWeights& weights, std::mt19937_64& rng,
               std::vector<int>& node_of) {
  const std::size_t n = x.size();
  Tree tree;
  NodeStats root;
  for (std::size_t i = 0; i < n; ++i) {
    root.g += g[i];
    root.h += h[i];
    root.gg += g[i] * g[i];
  }
  root.count = n;
  std::vector<NodeStats> stats{root};
  tree.nodes.push_back({});
  tree.nodes[0].count = n;
  node_of.assign(n, 0);

  std::vector<int> active{0};
  for (int depth = 0; !active.empty() && (params.max_depth < 0 || depth < params.max_depth);
       ++depth) {
    const auto features = sample_features(params.features_per_level, weights, rng);
    std::vector<int> slot_of(tree.nodes.size(), -1);
    for (std::size_t s = 0; s < active.size(); ++s) slot_of[active[s]] = static_cast<int>(s);

    std::vector<BestSplit> best(active.size());
    struct Scan {
      double gl = 0.0, hl = 0.0, last = 0.0;
      bool seen = false;
    };
    std::vector<Scan> scan(active.size());
    for (std::size_t f : features) {
      std::fill(scan.begin(), scan.end(), Scan{});
      for (std::uint32_t i : sorted[f]) {
        const int s = slot_of[node_of[i]];
        if (s < 0) continue;
        const double v = x[i][f];
        Scan& st = scan[s];
        if (st.seen && v != st.last) {
          const NodeStats& ns = stats[active[s]];
          const double gr = ns.g - st.gl;
          const double hr = ns.h - st.hl;
          if (st.hl >= params.min_child_weight && hr >= params.min_child_weight) {
            const double gain = score(st.gl, st.hl, params.lambda) +
                                score(gr, hr, params.lambda) -
                                score(ns.g, ns.h, params.lambda);
            if (gain > best[s].gain) {
              best[s] = {gain, static_cast<int>(f), 0.5 * (st.last + v)};
            }
          }
        }
        st.gl += g[i];
        st.hl += h[i];
        st.last = v;
        st.seen = true;
      }
    }

    std::vector<int> next;
    for (std::size_t s = 0; s < active.size(); ++s) {
      const int id = active[s];
      // Gains below round-off of the node's gradient energy are not splits.
      if (best[s].feature < 0 || best[s].gain <= 1e-10 * stats[id].gg) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.resize(tree.nodes.size());
      TreeNode& node = tree.nodes[id];
      node.feature = best[s].feature;
      node.threshold = best[s].threshold;
      node.gain = best[s].gain;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;
    for (std::size_t i = 0; i < n; ++i) {
      const TreeNode& node = tree.nodes[node_of[i]];
      if (node.is_leaf() || node.left < 0) continue;
      const int child = x[i][node.feature] <= node.threshold ? node.left : node.right;
      node_of[i] = child;
      NodeStats& cs = stats[child];
      cs.g += g[i];
      cs.h += h[i];
      cs.gg += g[i] * g[i];
      ++cs.count;
    }
    active = std::move(next);
  }
  for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
    tree.nodes[id].value = -stats[id].g / (stats[id].h + params.lambda);
    tree.nodes[id].count = stats[id].count;
  }
  return tree;
}

void check_training_data(FeatureRows inputs, std::span<const double> target) {
  if (inputs.size() != target.size()) {
    fail(ErrorCode::kDimension, "inputs and target have different lengths");
  }
  if (inputs.size() < 2) fail(ErrorCode::kInsufficientData, "need at least 2 rows to fit trees");
  for (double y : target) {
    if (!std::isfinite(y)) fail(ErrorCode::kDomain, "non-finite target value");
  }
}

void collect_rules(const Tree& tree, int id, std::vector<Condition>& path, std::size_t target,
                   int grid_max, std::vector<NodeRule>& out) {
  const TreeNode& node = tree.nodes[id];
  if (node.is_leaf()) return;
  for (int side = 0; side < 2; ++side) {
    const int child = side == 0 ? node.left : node.right;
    path.push_back({static_cast<std::size_t>(node.feature), side == 0 ? Op::kLe : Op::kGt,
                    node.threshold});
    Rule rule;
    rule.conditions = canonicalize(path, grid_max);
    rule.target = target;
    out.push_back({std::move(rule), tree.nodes[child].value});
    collect_rules(tree, child, path, target, grid_max, out);
    path.pop_back();
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Trees

double Tree::predict(const InputVector& x) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
  }
  return nodes[id].value;
}

int Tree::depth() const {
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[id].is_leaf()) {
      stack.push_back({nodes[id].left, d + 1});
      stack.push_back({nodes[id].right, d + 1});
    }
  }
  return deepest;
}

double TreeEnsemble::predict(const InputVector& x) const {
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return base_score + learning_rate * sum;
}

TreeEnsemble fit_gbrt(FeatureRows inputs, std::span<const double> target,
                      const BoostingParams& params, const FeatureWeights& weights,
                      double colsample_bylevel, std::uint64_t seed) {
  check_training_data(inputs, target);
  if (params.n_trees < 0 || params.max_depth < 0 || !(params.learning_rate > 0.0) ||
      params.l2_lambda < 0.0 || params.min_child_weight < 0.0) {
    fail(ErrorCode::kInvalidArgument, "invalid boosting parameters");
  }
  if (!(colsample_bylevel > 0.0 && colsample_bylevel <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "colsample_bylevel must lie in (0, 1]");
  }
  const std::size_t n = inputs.size();
  TreeEnsemble ensemble;
  ensemble.learning_rate = params.learning_rate;
  ensemble.base_score =
      std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);

  GrowParams grow;
  grow.max_depth = params.max_depth;
  grow.lambda = params.l2_lambda;
  grow.min_child_weight = params.min_child_weight;
  grow.features_per_level = static_cast<std::size_t>(
      std::ceil(colsample_bylevel * static_cast<double>(kNumInputs) - 1e-9));
  grow.features_per_level = std::clamp<std::size_t>(grow.features_per_level, 1, kNumInputs);

  const Presorted sorted = presort(inputs);
  std::mt19937_64 rng(seed);
  std::vector<double> pred(n, ensemble.base_score);
  std::vector<double> grad(n);
  const std::vector<double> hess(n, 1.0);
  std::vector<int> node_of;
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - target[i];
    Tree tree = grow_tree(sorted, inputs, grad, hess, grow, weights, rng, node_of);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += params.learning_rate * tree.nodes[node_of[i]].value;
    }
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

Tree fit_cart(FeatureRows inputs, std::span<const double> target, const CartParams& params) {
  check_training_data(inputs, target);
  const std::size_t n = inputs.size();
  const double mean =
      std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) grad[i] = mean - target[i];
  const std::vector<double> hess(n, 1.0);

  GrowParams grow;
  grow.max_depth = params.max_depth;
  grow.lambda = 0.0;
  grow.min_child_weight = static_cast<double>(std::max<std::size_t>(1, params.min_samples_leaf));
  grow.features_per_level = kNumInputs;
  std::mt19937_64 rng(0);
  std::vector<int> node_of;
  Tree tree = grow_tree(presort(inputs), inputs, grad, hess, grow, FeatureWeights::uniform(),
                        rng, node_of);
  for (auto& node : tree.nodes) node.value += mean;
  return tree;
}

// ---------------------------------------------------------------------------
// Rules

std::string to_string(const Condition& c) {
  return std::string(kInputNames.at(c.feature)) + (c.op == Op::kLe ? " <= " : " > ") +
         format_double(c.threshold);
}

bool Rule::holds(const InputVector& x) const {
  for (const auto& c : conditions) {
    if (!c.holds(x)) return false;
  }
  return true;
}

std::string Rule::describe() const {
  std::string s;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (i) s += " AND ";
    s += to_string(conditions[i]);
  }
  return s;
}

std::vector<Condition> canonicalize(std::vector<Condition> conditions, int grid_max) {
  for (auto& c : conditions) {
    if (c.threshold != std::floor(c.threshold) && c.threshold > 1.0 &&
        c.threshold < static_cast<double>(grid_max)) {
      c.threshold = std::floor(c.threshold);
    }
  }
  std::vector<Condition> merged;
  for (std::size_t f = 0; f < kNumInputs; ++f) {
    std::optional<double> le, gt;
    for (const auto& c : conditions) {
      if (c.feature != f) continue;
      if (c.op == Op::kLe) {
        le = le ? std::min(*le, c.threshold) : c.threshold;
      } else {
        gt = gt ? std::max(*gt, c.threshold) : c.threshold;
      }
    }
    if (le) merged.push_back({f, Op::kLe, *le});
    if (gt) merged.push_back({f, Op::kGt, *gt});
  }
  return merged;
}

bool is_canonical(const std::vector<Condition>& conditions, int grid_max) {
  return canonicalize(conditions, grid_max) == conditions;
}

std::vector<NodeRule> extract_node_rules(const Tree& tree, std::size_t target, int grid_max) {
  std::vector<NodeRule> out;
  if (tree.nodes.empty()) return out;
  std::vector<Condition> path;
  collect_rules(tree, 0, path, target, grid_max, out);
  return out;
}

RuleSet extract_rules(const TreeEnsemble& ensemble, std::size_t target, int grid_max) {
  RuleSet rules;
  std::set<std::vector<Condition>> seen;
  for (const auto& tree : ensemble.trees) {
    for (auto& nr : extract_node_rules(tree, target, grid_max)) {
      if (seen.insert(nr.rule.conditions).second) rules.push_back(std::move(nr.rule));
    }
  }
  return rules;
}

RuleSet extract_rules(const Tree& tree, std::size_t target, int grid_max) {
  TreeEnsemble single;
  single.trees.push_back(tree);
  return extract_rules(single, target, grid_max);
}

// ---------------------------------------------------------------------------
// Design matrix

DesignMatrix::DesignMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), words_((rows + 63) / 64), bits_(cols * ((rows + 63) / 64), 0) {}

std::size_t DesignMatrix::column_count(std::size_t col) const {
  std::size_t count = 0;
  for (std::uint64_t w : column(col)) count += static_cast<std::size_t>(std::popcount(w));
  return count;
}

std::vector<double> DesignMatrix::dense() const {
  std::vector<double> out(rows_ * cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out[r * cols_ + c] = get(r, c) ? 1.0 : 0.0;
  }
  return out;
}

DesignMatrix DesignMatrix::from_dense(std::span<const double> values, std::size_t rows,
                                      std::size_t cols) {
  if (values.size() != rows * cols) fail(ErrorCode::kDimension, "dense matrix size mismatch");
  DesignMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = values[r * cols + c];
      if (v != 0.0 && v != 1.0) fail(ErrorCode::kDomain, "design entries must be 0 or 1");
      if (v == 1.0) m.set(r, c);
    }
  }
  return m;
}

DesignMatrix build_design_matrix(const RuleSet& rules, FeatureRows inputs) {
  if (rules.empty()) fail(ErrorCode::kEmptyInput, "no rules to build a design matrix from");
  for (const auto& rule : rules) {
    if (rule.conditions.empty()) fail(ErrorCode::kContract, "rule without conditions");
    for (const auto& c : rule.conditions) {
      if (c.feature >= kNumInputs) {
        fail(ErrorCode::kSchema, "rule references unknown feature #" + std::to_string(c.feature));
      }
    }
  }
  DesignMatrix design(inputs.size(), rules.size());
  for (std::size_t j = 0; j < rules.size(); ++j) {
    for (std::size_t r = 0; r < inputs.size(); ++r) {
      if (rules[j].holds(inputs[r])) design.set(r, j);
    }
  }
  return design;
}

void assign_support(RuleSet& rules, const DesignMatrix& design) {
  if (rules.size() != design.cols()) fail(ErrorCode::kDimension, "rule count mismatch");
  const double n = static_cast<double>(design.rows());
  for (std::size_t j = 0; j < rules.size(); ++j) {
    rules[j].support = n > 0 ? static_cast<double>(design.column_count(j)) / n : 0.0;
  }
}

}  // namespace ruleshap
