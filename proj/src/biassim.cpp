// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/biassim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "json_io.hpp"

namespace ruleshap {

namespace {

using detail::json;

BiasCondition le(std::string_view f, double v) { return {require_input_index(f), BiasOp::kLe, v, {}}; }
BiasCondition gt(std::string_view f, double v) { return {require_input_index(f), BiasOp::kGt, v, {}}; }

BiasEffect effect(std::string_view target, int direction, double magnitude) {
  return {require_output_index(target), direction, magnitude};
}

std::vector<BiasClause> b2_clauses() {
  BiasClause obscure_positive;
  obscure_positive.disjuncts = {{le("common", 2), gt("positive", 2)}};
  obscure_positive.effects = {effect("length_chars", +1, 600.0),
                              effect("information_overload", +1, 1.5)};
  BiasClause very_positive;
  very_positive.disjuncts = {{gt("positive", 3)}};
  very_positive.effects = {effect("subjectivity", +1, 0.3), effect("sentiment", -1, 0.5),
                           effect("framing_effect", +1, 1.5)};
  return {obscure_positive, very_positive};
}

bool is_judged(std::size_t target) { return target >= 4; }

// Maximal runs of consecutive values in a sorted member list.
std::vector<std::pair<int, int>> runs_of(std::vector<int> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  std::vector<std::pair<int, int>> runs;
  for (int v : members) {
    if (!runs.empty() && runs.back().second + 1 == v) {
      runs.back().second = v;
    } else {
      runs.emplace_back(v, v);
    }
  }
  return runs;
}

std::vector<std::vector<Condition>> expand_disjunct(const std::vector<BiasCondition>& conj) {
  std::vector<std::vector<Condition>> out{{}};
  for (const auto& c : conj) {
    std::vector<std::vector<Condition>> options;
    switch (c.op) {
      case BiasOp::kLe:
        options.push_back({{c.feature, Op::kLe, c.value}});
        break;
      case BiasOp::kGt:
        options.push_back({{c.feature, Op::kGt, c.value}});
        break;
      case BiasOp::kIn:
        for (auto [lo, hi] : runs_of(c.members)) {
          std::vector<Condition> run;
          if (lo > kScoreMin) run.push_back({c.feature, Op::kGt, static_cast<double>(lo - 1)});
          if (hi < kScoreMax) run.push_back({c.feature, Op::kLe, static_cast<double>(hi)});
          options.push_back(std::move(run));
        }
        break;
    }
    std::vector<std::vector<Condition>> next;
    for (const auto& prefix : out) {
      for (const auto& opt : options) {
        auto merged = prefix;
        merged.insert(merged.end(), opt.begin(), opt.end());
        next.push_back(std::move(merged));
      }
    }
    out = std::move(next);
  }
  for (auto& d : out) {
    d = canonicalize(std::move(d));
    if (d.empty()) fail(ErrorCode::kContract, "bias condition holds for every grid point");
  }
  return out;
}

BiasCondition condition_from(const json& j) {
  BiasCondition c;
  c.feature = require_input_index(detail::get_field<std::string>(j, "feature", "bias condition"));
  const auto op = detail::get_field<std::string>(j, "op", "bias condition");
  if (op == "in") {
    c.op = BiasOp::kIn;
    c.members = detail::get_field<std::vector<int>>(j, "value", "bias condition");
    if (c.members.empty()) fail(ErrorCode::kSchema, "empty 'in' set");
    for (int v : c.members) {
      if (v < kScoreMin || v > kScoreMax) {
        fail(ErrorCode::kSchema, "'in' set value " + std::to_string(v) + " outside 1..5");
      }
    }
    return c;
  }
  const double v = detail::get_field<double>(j, "value", "bias condition");
  if (!std::isfinite(v)) fail(ErrorCode::kSchema, "non-finite bias threshold");
  if (op == "<=") {
    c = {c.feature, BiasOp::kLe, v, {}};
  } else if (op == "<") {
    c = {c.feature, BiasOp::kLe, std::ceil(v) - 1.0, {}};
  } else if (op == ">") {
    c = {c.feature, BiasOp::kGt, v, {}};
  } else if (op == ">=") {
    c = {c.feature, BiasOp::kGt, std::ceil(v) - 1.0, {}};
  } else {
    fail(ErrorCode::kSchema, "unknown bias condition op '" + op + "'");
  }
  return c;
}

json condition_to(const BiasCondition& c) {
  json j{{"feature", std::string(kInputNames[c.feature])}};
  switch (c.op) {
    case BiasOp::kLe: j["op"] = "<="; j["value"] = c.value; break;
    case BiasOp::kGt: j["op"] = ">"; j["value"] = c.value; break;
    case BiasOp::kIn: j["op"] = "in"; j["value"] = c.members; break;
  }
  return j;
}

BiasClause clause_from(const json& j) {
  BiasClause clause;
  const auto disjuncts = detail::get_field<json>(j, "disjuncts", "bias clause");
  if (!disjuncts.is_array() || disjuncts.empty()) {
    fail(ErrorCode::kSchema, "bias clause needs at least one disjunct");
  }
  for (const auto& d : disjuncts) {
    if (!d.is_array() || d.empty()) fail(ErrorCode::kSchema, "disjunct must be a non-empty list");
    std::vector<BiasCondition> conj;
    for (const auto& c : d) conj.push_back(condition_from(c));
    clause.disjuncts.push_back(std::move(conj));
  }
  const auto effects = detail::get_field<json>(j, "effects", "bias clause");
  if (!effects.is_array() || effects.empty()) fail(ErrorCode::kSchema, "bias clause needs effects");
  for (const auto& e : effects) {
    BiasEffect eff;
    eff.target = require_output_index(detail::get_field<std::string>(e, "target", "bias effect"));
    const auto dir = detail::get_field<std::string>(e, "direction", "bias effect");
    if (dir == "increase") {
      eff.direction = +1;
    } else if (dir == "decrease") {
      eff.direction = -1;
    } else {
      fail(ErrorCode::kSchema, "effect direction must be 'increase' or 'decrease'");
    }
    eff.magnitude = detail::get_field<double>(e, "magnitude", "bias effect");
    if (!std::isfinite(eff.magnitude) || eff.magnitude < 0.0) {
      fail(ErrorCode::kSchema, "effect magnitude must be finite and non-negative");
    }
    clause.effects.push_back(eff);
  }
  return clause;
}

BiasSpec spec_from(const json& j) {
  BiasSpec spec;
  spec.name = detail::get_field<std::string>(j, "name", "bias");
  spec.instruction_label = j.value("instruction_label", std::string());
  if (j.contains("clauses")) {
    const auto& clauses = j.at("clauses");
    if (!clauses.is_array() || clauses.empty()) fail(ErrorCode::kSchema, "bias has no clauses");
    for (const auto& c : clauses) spec.clauses.push_back(clause_from(c));
  } else {
    spec.clauses.push_back(clause_from(j));
  }
  return spec;
}

json spec_to(const BiasSpec& spec) {
  json clauses = json::array();
  for (const auto& c : spec.clauses) {
    json disjuncts = json::array();
    for (const auto& d : c.disjuncts) {
      json conj = json::array();
      for (const auto& cond : d) conj.push_back(condition_to(cond));
      disjuncts.push_back(conj);
    }
    json effects = json::array();
    for (const auto& e : c.effects) {
      effects.push_back({{"target", std::string(kOutputNames[e.target])},
                         {"direction", e.direction > 0 ? "increase" : "decrease"},
                         {"magnitude", e.magnitude}});
    }
    clauses.push_back({{"disjuncts", disjuncts}, {"effects", effects}});
  }
  return {{"name", spec.name}, {"instruction_label", spec.instruction_label}, {"clauses", clauses}};
}

}  // namespace

bool BiasCondition::holds(const InputVector& x) const {
  const double v = x[feature];
  switch (op) {
    case BiasOp::kLe: return v <= value;
    case BiasOp::kGt: return v > value;
    case BiasOp::kIn:
      return std::any_of(members.begin(), members.end(),
                         [v](int m) { return static_cast<double>(m) == v; });
  }
  return false;
}

bool BiasClause::active(const InputVector& x) const {
  return std::any_of(disjuncts.begin(), disjuncts.end(), [&x](const auto& conj) {
    return std::all_of(conj.begin(), conj.end(), [&x](const auto& c) { return c.holds(x); });
  });
}

std::vector<BiasSpec> builtin_biases() {
  BiasSpec b1;
  b1.name = "b1";
  b1.instruction_label = "terse answers for less common topics";
  BiasClause terse;
  terse.disjuncts = {{le("common", 4)}};
  terse.effects = {effect("length_chars", -1, 600.0), effect("information_overload", -1, 1.5),
                   effect("oversimplification", +1, 1.5)};
  b1.clauses = {terse};

  BiasSpec b2;
  b2.name = "b2";
  b2.instruction_label = "inflated detail and a sceptical tone for positive topics";
  b2.clauses = b2_clauses();

  BiasSpec b3;
  b3.name = "b3";
  b3.instruction_label = "as b2, plus harder wording for odd interdisciplinarity scores";
  b3.clauses = b2_clauses();
  BiasClause wordy;
  wordy.disjuncts = {{{require_input_index("interdisciplinary"), BiasOp::kIn, 0.0, {1, 3, 5}}}};
  wordy.effects = {effect("gunning_fog", +1, 4.0)};
  b3.clauses.push_back(wordy);

  return {b1, b2, b3};
}

const BiasSpec& builtin_bias(std::string_view name) {
  static const std::vector<BiasSpec> all = builtin_biases();
  for (const auto& b : all) {
    if (b.name == name) return b;
  }
  fail(ErrorCode::kConfig, "unknown builtin bias '" + std::string(name) + "' (b1, b2, b3)");
}

BaseModelConfig BaseModelConfig::defaults() {
  BaseModelConfig base;
  base.slope[0][require_input_index("technically_complicated")] = 0.8;
  base.slope[1][require_input_index("conceptually_dense")] = 50.0;
  base.slope[2][require_input_index("positive")] = 0.05;
  base.slope[2][require_input_index("negative")] = -0.05;
  base.slope[3][require_input_index("socially_controversial")] = 0.05;
  return base;
}

Population sample_population(const PopulationConfig& cfg) {
  if (cfg.n_per_cell < 1) fail(ErrorCode::kConfig, "n_per_cell must be at least 1");
  if (cfg.redundancy < 1) fail(ErrorCode::kConfig, "redundancy must be at least 1");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> score(kScoreMin, kScoreMax);

  std::vector<InputVector> unique;
  std::vector<std::string> domains;
  std::set<InputVector> seen;
  for (std::size_t d = 0; d < kNumInputs; ++d) {
    for (int s = kScoreMin; s <= kScoreMax; ++s) {
      for (int i = 0; i < cfg.n_per_cell; ++i) {
        InputVector u;
        for (auto& v : u) v = score(rng);
        u[d] = s;
        if (seen.insert(u).second) {
          unique.push_back(u);
          domains.push_back(std::string(kInputNames[d]) + "=" + std::to_string(s));
        }
      }
    }
  }

  Population pop;
  for (std::size_t k = 0; k < unique.size(); ++k) {
    for (int c = 0; c < cfg.redundancy; ++c) {
      char id[32];
      std::snprintf(id, sizeof id, "t%05zu-%d", k + 1, c + 1);
      pop.topics.push_back({id, domains[k], "synthetic topic " + std::to_string(k + 1)});
      pop.inputs.push_back(unique[k]);
    }
  }
  return pop;
}

std::vector<OutputVector> generate_responses(std::span<const InputVector> inputs,
                                             const std::vector<BiasSpec>& biases,
                                             const BaseModelConfig& base, const NoiseConfig& noise,
                                             std::uint64_t seed) {
  std::array<double, kNumOutputs> sigma{};
  for (std::size_t c = 0; c < kNumOutputs; ++c) {
    sigma[c] = noise.sigma + noise.relative * kEffectScale[c];
    if (!std::isfinite(sigma[c]) || sigma[c] < 0.0) {
      fail(ErrorCode::kConfig, "noise level must be finite and non-negative");
    }
  }
  for (const auto& b : biases) {
    for (const auto& c : b.clauses) {
      for (const auto& d : c.disjuncts) {
        for (const auto& cond : d) {
          if (cond.feature >= kNumInputs) fail(ErrorCode::kSchema, "bias uses unknown feature");
        }
      }
      for (const auto& e : c.effects) {
        if (e.target >= kNumOutputs) fail(ErrorCode::kSchema, "bias targets unknown output");
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<OutputVector> out(inputs.size());
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    const auto& u = inputs[r];
    auto& v = out[r];
    for (std::size_t c = 0; c < kNumOutputs; ++c) {
      v[c] = base.intercept[c];
      for (std::size_t i = 0; i < kNumInputs; ++i) v[c] += base.slope[c][i] * u[i];
    }
    for (const auto& b : biases) {
      for (const auto& clause : b.clauses) {
        if (!clause.active(u)) continue;
        for (const auto& e : clause.effects) v[e.target] += e.direction * e.magnitude;
      }
    }
    for (std::size_t c = 0; c < kNumOutputs; ++c) {
      if (sigma[c] > 0.0) v[c] += sigma[c] * gauss(rng);
      if (is_judged(c)) v[c] = std::clamp(v[c], 1.0, 5.0);
    }
  }
  return out;
}

std::vector<TruthRule> ground_truth_rules(const std::vector<BiasSpec>& biases) {
  std::vector<TruthRule> truths;
  for (const auto& b : biases) {
    for (std::size_t ci = 0; ci < b.clauses.size(); ++ci) {
      const auto& clause = b.clauses[ci];
      std::vector<std::vector<Condition>> disjuncts;
      for (const auto& d : clause.disjuncts) {
        for (auto& e : expand_disjunct(d)) disjuncts.push_back(std::move(e));
      }
      for (const auto& e : clause.effects) {
        TruthRule t;
        t.id = b.name + "/c" + std::to_string(ci + 1) + "/" + std::string(kOutputNames[e.target]);
        t.bias = b.name;
        t.target = e.target;
        t.sign = e.direction;
        t.disjuncts = disjuncts;
        truths.push_back(std::move(t));
      }
    }
  }
  return truths;
}

Simulation simulate(const SimulationConfig& cfg) {
  PopulationConfig pc = cfg.population;
  pc.seed = cfg.seed;
  auto pop = sample_population(pc);
  auto outputs = generate_responses(pop.inputs, cfg.biases, cfg.base, cfg.noise, cfg.seed + 1);
  std::vector<std::string> ids;
  ids.reserve(pop.topics.size());
  for (const auto& t : pop.topics) ids.push_back(t.id);
  Simulation sim;
  sim.matrix = AbstractionMatrix(std::move(ids), std::move(pop.inputs), std::move(outputs));
  sim.topics = std::move(pop.topics);
  sim.truths = ground_truth_rules(cfg.biases);
  return sim;
}

BiasSpec parse_bias_spec(const std::string& json_text) {
  return spec_from(detail::parse_json(json_text, "bias"));
}

std::string bias_spec_to_json(const BiasSpec& spec) { return spec_to(spec).dump(2); }

SimulationConfig parse_simulation_config(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "simulation config");
  if (!j.is_object()) fail(ErrorCode::kConfig, "simulation config must be a JSON object");
  static const std::set<std::string> known = {"seed", "population", "biases", "noise", "base"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorCode::kConfig, "unknown simulation config key '" + key + "'");
  }
  SimulationConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("population")) {
      const auto& p = j.at("population");
      cfg.population.n_per_cell = p.value("n_per_cell", cfg.population.n_per_cell);
      cfg.population.redundancy = p.value("redundancy", cfg.population.redundancy);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      cfg.noise.sigma = n.value("sigma", 0.0);
      cfg.noise.relative = n.value("relative", 0.0);
    }
    if (j.contains("base")) {
      const auto& b = j.at("base");
      if (b.contains("intercept")) {
        for (const auto& [name, v] : b.at("intercept").items()) {
          cfg.base.intercept[require_output_index(name)] = v.get<double>();
        }
      }
      if (b.contains("slope")) {
        for (const auto& [out, row] : b.at("slope").items()) {
          auto& s = cfg.base.slope[require_output_index(out)];
          s.fill(0.0);
          for (const auto& [in, v] : row.items()) s[require_input_index(in)] = v.get<double>();
        }
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid simulation config: ") + e.what());
  }
  if (j.contains("biases")) {
    for (const auto& b : j.at("biases")) {
      if (b.is_string()) {
        cfg.biases.push_back(builtin_bias(b.get<std::string>()));
      } else {
        cfg.biases.push_back(spec_from(b));
      }
    }
  }
  if (cfg.population.n_per_cell < 1 || cfg.population.redundancy < 1) {
    fail(ErrorCode::kConfig, "population sizes must be positive");
  }
  if (!(cfg.noise.sigma >= 0.0) || !(cfg.noise.relative >= 0.0)) {
    fail(ErrorCode::kConfig, "noise levels must be non-negative");
  }
  return cfg;
}

std::string truths_to_json(const std::vector<TruthRule>& truths) {
  json arr = json::array();
  for (const auto& t : truths) {
    json disjuncts = json::array();
    for (const auto& d : t.disjuncts) {
      json conj = json::array();
      for (const auto& c : d) conj.push_back(detail::condition_to_json(c));
      disjuncts.push_back(conj);
    }
    arr.push_back({{"id", t.id},
                   {"bias", t.bias},
                   {"target", std::string(kOutputNames[t.target])},
                   {"sign", t.sign},
                   {"disjuncts", disjuncts}});
  }
  return arr.dump(2);
}

std::vector<TruthRule> parse_truths(const std::string& json_text) {
  const json arr = detail::parse_json(json_text, "ground truth");
  if (!arr.is_array()) fail(ErrorCode::kSchema, "ground truth must be a JSON array");
  std::vector<TruthRule> truths;
  for (const auto& j : arr) {
    TruthRule t;
    t.id = detail::get_field<std::string>(j, "id", "truth");
    t.bias = detail::get_field<std::string>(j, "bias", "truth");
    t.target = require_output_index(detail::get_field<std::string>(j, "target", "truth"));
    t.sign = detail::get_field<int>(j, "sign", "truth") >= 0 ? +1 : -1;
    for (const auto& d : detail::get_field<json>(j, "disjuncts", "truth")) {
      std::vector<Condition> conj;
      for (const auto& c : d) conj.push_back(detail::condition_from_json(c));
      if (conj.empty() || !is_canonical(conj)) {
        fail(ErrorCode::kSchema, "truth '" + t.id + "' has a non-canonical disjunct");
      }
      t.disjuncts.push_back(std::move(conj));
    }
    if (t.disjuncts.empty()) fail(ErrorCode::kSchema, "truth '" + t.id + "' has no disjuncts");
    truths.push_back(std::move(t));
  }
  return truths;
}

}  // namespace ruleshap
