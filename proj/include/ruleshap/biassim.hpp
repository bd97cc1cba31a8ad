// Licensed under the Apache License 2.0 (see LICENSE file).
//
// Synthetic audit data with known injected biases: stratified ordinal
// input populations, an affine base response model and conditional effects.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ruleshap/dataset.hpp"
#include "ruleshap/evaluation.hpp"
#include "ruleshap/rules.hpp"

namespace ruleshap {

enum class BiasOp { kLe, kGt, kIn };

struct BiasCondition {
  std::size_t feature = 0;
  BiasOp op = BiasOp::kLe;
  double value = 0.0;  // threshold for kLe / kGt
  std::vector<int> members;  // grid values for kIn

  bool holds(const InputVector& x) const;
};

struct BiasEffect {
  std::size_t target = 0;
  int direction = +1;  // +1 increase, -1 decrease
  double magnitude = 0.0;
};

// Effects apply when any disjunct (a conjunction of conditions) holds.
struct BiasClause {
  std::vector<std::vector<BiasCondition>> disjuncts;
  std::vector<BiasEffect> effects;

  bool active(const InputVector& x) const;
};

struct BiasSpec {
  std::string name;
  std::vector<BiasClause> clauses;
  std::string instruction_label;
};

// b1, b2, b3 with default magnitudes.
std::vector<BiasSpec> builtin_biases();
const BiasSpec& builtin_bias(std::string_view name);

// Typical effect size per output column; relative noise is a multiple of it.
inline constexpr std::array<double, kNumOutputs> kEffectScale = {4.0, 600.0, 0.5, 0.3,
                                                                 1.5, 1.5, 1.5};

struct PopulationConfig {
  int n_per_cell = 60;
  int redundancy = 2;
  std::uint64_t seed = 0;
};

struct Population {
  std::vector<TopicRecord> topics;
  std::vector<InputVector> inputs;
};

// For every feature and every score 1..5, n_per_cell vectors with that
// feature pinned and the rest uniform on the grid. Distinct vectors are
// emitted `redundancy` times each, copies adjacent.
Population sample_population(const PopulationConfig& cfg);

struct BaseModelConfig {
  std::array<double, kNumOutputs> intercept{8.0, 1000.0, 0.0, 0.35, 2.5, 2.5, 2.5};
  std::array<InputVector, kNumOutputs> slope{};

  static BaseModelConfig defaults();
};

// sigma_c = sigma + relative * kEffectScale[c]
struct NoiseConfig {
  double sigma = 0.0;
  double relative = 0.0;
};

// Base model, then every active bias effect, then Gaussian noise; judged
// columns clamped to [1, 5].
std::vector<OutputVector> generate_responses(std::span<const InputVector> inputs,
                                             const std::vector<BiasSpec>& biases,
                                             const BaseModelConfig& base, const NoiseConfig& noise,
                                             std::uint64_t seed);

// One truth per (clause, effect). Set conditions expand into one disjunct
// per maximal run of consecutive grid values.
std::vector<TruthRule> ground_truth_rules(const std::vector<BiasSpec>& biases);

struct SimulationConfig {
  PopulationConfig population;
  std::vector<BiasSpec> biases;
  BaseModelConfig base = BaseModelConfig::defaults();
  NoiseConfig noise;
  std::uint64_t seed = 0;
};

struct Simulation {
  AbstractionMatrix matrix;
  std::vector<TopicRecord> topics;
  std::vector<TruthRule> truths;
};

Simulation simulate(const SimulationConfig& cfg);

// JSON (de)serialization. Conditions use ops "<=", "<", ">", ">=", "in";
// strict ops are converted on the integer grid.
BiasSpec parse_bias_spec(const std::string& json_text);
std::string bias_spec_to_json(const BiasSpec& spec);
SimulationConfig parse_simulation_config(const std::string& json_text);
std::string truths_to_json(const std::vector<TruthRule>& truths);
std::vector<TruthRule> parse_truths(const std::string& json_text);

}  // namespace ruleshap
