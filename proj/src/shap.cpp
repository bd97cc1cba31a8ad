// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/shap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csv.hpp"
#include "parallel.hpp"
#include "ruleshap/error.hpp"

namespace ruleshap {

namespace {

std::string describe(std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += format_double(x[i]);
  }
  return s + ")";
}

double checked(const Evaluator& evaluate, std::span<const double> x) {
  const double y = evaluate(x);
  if (!std::isfinite(y)) {
    fail(ErrorCode::kEvaluation, "model returned a non-finite value at coalition " + describe(x));
  }
  return y;
}

}  // namespace

FeatureWeights FeatureWeights::uniform() {
  FeatureWeights w;
  w.raw.fill(1.0);
  w.normalized.fill(1.0 / static_cast<double>(kNumInputs));
  return w;
}

InputVector permutation_shap(const Evaluator& evaluate, const InputVector& instance,
                             const BackgroundVector& background, int n_permutations,
                             std::uint64_t seed) {
  if (n_permutations < 1) {
    fail(ErrorCode::kInvalidArgument, "n_permutations must be at least 1");
  }
  std::mt19937_64 rng(seed);
  std::array<std::size_t, kNumInputs> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});

  InputVector sum{};
  const double f_background = checked(evaluate, background.values);
  for (int p = 0; p < n_permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);

    // Forward: switch features on in permutation order.
    InputVector x = background.values;
    double prev = f_background;
    for (std::size_t j : order) {
      x[j] = instance[j];
      const double cur = checked(evaluate, x);
      sum[j] += cur - prev;
      prev = cur;
    }
    // Antithetic: switch them back off in the same order.
    for (std::size_t j : order) {
      x[j] = background.values[j];
      const double cur = checked(evaluate, x);
      sum[j] += prev - cur;
      prev = cur;
    }
  }
  const double passes = 2.0 * n_permutations;
  for (double& v : sum) v /= passes;
  return sum;
}

NearestDatapointEvaluator::NearestDatapointEvaluator(const NearestIndex& index,
                                                     std::span<const double> target,
                                                     std::uint64_t seed)
    : index_(&index), target_(target), rng_(seed) {
  if (target.size() != index.rows()) {
    fail(ErrorCode::kDimension, "target column length differs from the indexed matrix");
  }
}

std::size_t NearestDatapointEvaluator::row_for(std::span<const double> query) {
  if (query.size() != kNumInputs) {
    fail(ErrorCode::kDimension, "query has " + std::to_string(query.size()) +
                                    " components, expected 11");
  }
  InputVector key;
  std::copy(query.begin(), query.end(), key.begin());
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto ties = index_->tie_set(query);
  std::size_t row = ties.front();
  if (ties.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
    row = ties[pick(rng_)];
  }
  memo_.emplace(key, row);
  return row;
}

double NearestDatapointEvaluator::operator()(std::span<const double> query) {
  return target_[row_for(query)];
}

AttributionMatrix explain_dataset(const AbstractionMatrix& m, const NearestIndex& index,
                                  std::size_t target, const ShapParams& params) {
  if (m.empty()) fail(ErrorCode::kEmptyInput, "cannot explain an empty matrix");
  const auto column = m.output_column(target);
  const auto background = background_of(m);
  AttributionMatrix out;
  out.values.resize(m.rows());
  out.ids = m.topic_ids();
  detail::parallel_for(m.rows(), params.jobs, [&](std::size_t k) {
    NearestDatapointEvaluator lookup(index, column, params.seed + k);
    Evaluator f = [&lookup](std::span<const double> q) { return lookup(q); };
    out.values[k] =
        permutation_shap(f, m.inputs()[k], background, params.n_permutations, params.seed + k);
  });
  return out;
}

AttributionMatrix explain_dataset(const AbstractionMatrix& m, const Evaluator& evaluate,
                                  const ShapParams& params) {
  if (m.empty()) fail(ErrorCode::kEmptyInput, "cannot explain an empty matrix");
  const auto background = background_of(m);
  AttributionMatrix out;
  out.values.resize(m.rows());
  out.ids = m.topic_ids();
  detail::parallel_for(m.rows(), params.jobs, [&](std::size_t k) {
    out.values[k] = permutation_shap(evaluate, m.inputs()[k], background,
                                     params.n_permutations, params.seed + k);
  });
  return out;
}

FeatureWeights global_attributions(const AttributionMatrix& a) {
  if (a.values.empty()) fail(ErrorCode::kEmptyInput, "no attributions to aggregate");
  const double n = static_cast<double>(a.values.size());
  FeatureWeights w;
  for (std::size_t i = 0; i < kNumInputs; ++i) {
    double mean = 0.0;
    for (const auto& row : a.values) {
      if (!std::isfinite(row[i])) fail(ErrorCode::kDomain, "non-finite attribution");
      mean += std::abs(row[i]);
    }
    mean /= n;
    double var = 0.0;
    for (const auto& row : a.values) {
      const double d = std::abs(row[i]) - mean;
      var += d * d;
    }
    w.raw[i] = mean + std::sqrt(var / n);
  }
  double total = 0.0;
  for (double& r : w.raw) {
    if (r <= 0.0) r = kWeightFloor;
    total += r;
  }
  for (std::size_t i = 0; i < kNumInputs; ++i) w.normalized[i] = w.raw[i] / total;
  return w;
}

std::string format_attributions(const AttributionMatrix& a) {
  std::string out = "id";
  for (auto n : kInputNames) (out += ',') += n;
  out += '\n';
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    out += k < a.ids.size() ? csv::escape(a.ids[k]) : std::to_string(k);
    for (double v : a.values[k]) (out += ',') += format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace ruleshap
