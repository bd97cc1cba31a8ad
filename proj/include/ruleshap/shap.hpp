// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Model-agnostic permutation Shapley values and their global aggregation
// into normalized per-feature weights.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ruleshap/dataset.hpp"

namespace ruleshap {

using Evaluator = std::function<double(std::span<const double>)>;

// value[k][i] is the attribution of feature i for instance k.
struct AttributionMatrix {
  std::vector<InputVector> values;
  std::vector<std::string> ids;  // optional; used for CSV export

  std::size_t rows() const noexcept { return values.size(); }
};

struct FeatureWeights {
  InputVector raw{};
  InputVector normalized{};

  static FeatureWeights uniform();
};

inline constexpr double kWeightFloor = 1e-6;

// Averages marginal contributions over `n_permutations` sampled orderings,
// each walked forward (background -> instance) and back (instance ->
// background). Attributions sum to evaluate(instance) - evaluate(background)
// whenever `evaluate` is a deterministic function.
InputVector permutation_shap(const Evaluator& evaluate, const InputVector& instance,
                             const BackgroundVector& background, int n_permutations,
                             std::uint64_t seed);

// Dataset-backed model: a query is answered by the target value of its
// nearest row, ties broken at random. Choices are memoised so the
// evaluator behaves as a fixed function for one explanation.
class NearestDatapointEvaluator {
 public:
  NearestDatapointEvaluator(const NearestIndex& index, std::span<const double> target,
                            std::uint64_t seed);

  double operator()(std::span<const double> query);
  std::size_t row_for(std::span<const double> query);

 private:
  const NearestIndex* index_;
  std::span<const double> target_;
  std::mt19937_64 rng_;
  std::map<InputVector, std::size_t> memo_;
};

struct ShapParams {
  int n_permutations = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Explains every row of `m` against its column minima; row k uses seed
// params.seed + k so the result does not depend on scheduling.
AttributionMatrix explain_dataset(const AbstractionMatrix& m, const NearestIndex& index,
                                  std::size_t target, const ShapParams& params);

// Same, with an arbitrary model in place of the nearest-datapoint lookup.
AttributionMatrix explain_dataset(const AbstractionMatrix& m, const Evaluator& evaluate,
                                  const ShapParams& params);

// raw_i = mean_k |a_ki| + std_k |a_ki| (population std); zeros floored to
// kWeightFloor, then normalized to sum to one.
FeatureWeights global_attributions(const AttributionMatrix& a);

std::string format_attributions(const AttributionMatrix& a);

}  // namespace ruleshap
