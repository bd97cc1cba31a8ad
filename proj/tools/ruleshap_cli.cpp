// Licensed under the Apache License 2.0 (see LICENSE file).
//
// ruleshap command-line tool: simulate | abstract | explain | evaluate | audit.
// Talks to the library only through the C interface.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ruleshap/ruleshap.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kProvider = 4 };

// Failure carrying the process exit code.
struct CliError {
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{kUsage, message}; }
[[noreturn]] void data_error(const std::string& message) { throw CliError{kData, message}; }

int exit_for(rs_status s) {
  switch (s) {
    case RS_OK:
      return kOk;
    case RS_ERR_INVALID_ARGUMENT:
    case RS_ERR_CONFIG:
      return kUsage;
    case RS_ERR_PROVIDER:
      return kProvider;
    case RS_ERR_INTERNAL:
      return kFailure;
    default:
      return kData;
  }
}

void check(rs_status s) {
  if (s != RS_OK) {
    throw CliError{exit_for(s), std::string(rs_status_name(s)) + ": " + rs_last_error()};
  }
}

struct MatrixDeleter {
  void operator()(rs_matrix* m) const { rs_matrix_free(m); }
};
struct SimulationDeleter {
  void operator()(rs_simulation* s) const { rs_simulation_free(s); }
};
using MatrixPtr = std::unique_ptr<rs_matrix, MatrixDeleter>;
using SimulationPtr = std::unique_ptr<rs_simulation, SimulationDeleter>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s == nullptr ? std::string() : std::string(s);
  rs_string_free(s);
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) data_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) data_error("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) data_error("cannot create output directory " + dir.string());
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    usage_error(what + ": " + e.what());
  }
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = parse_json_text(read_file(path), path);
  if (!j.is_object()) usage_error(path + ": configuration must be a JSON object");
  return j;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Canonical form: nlohmann objects iterate in key order.
std::string config_hash(const json& effective) { return fnv1a_hex(effective.dump()); }

std::optional<json> read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) return std::nullopt;
  return parse_json_text(read_file(p), p.string());
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::vector<std::string> targets;
  std::vector<int> k;
  std::string out;
  int jobs = 1;
  std::string data;
  std::string truth;
  std::string rules;
  std::string topics;
  bool force = false;
};

std::vector<std::string> config_list(const json& cfg, const char* key,
                                     const std::vector<std::string>& flag) {
  if (!flag.empty()) return split_list(flag);
  if (!cfg.contains(key)) return {};
  try {
    return cfg.at(key).get<std::vector<std::string>>();
  } catch (const json::exception&) {
    usage_error(std::string("'") + key + "' must be a list of strings");
  }
}

std::vector<int> k_values(const json& cfg, const std::vector<int>& flag) {
  std::vector<int> k = flag;
  if (k.empty() && cfg.contains("k")) {
    try {
      k = cfg.at("k").get<std::vector<int>>();
    } catch (const json::exception&) {
      usage_error("'k' must be a list of integers");
    }
  }
  if (k.empty()) k = {1, 3, 10};
  for (int v : k) {
    if (v < 1) usage_error("k values must be at least 1");
  }
  return k;
}

std::string require_out(const Options& o, const json& cfg) {
  if (!o.out.empty()) return o.out;
  if (cfg.contains("out") && cfg.at("out").is_string()) return cfg.at("out").get<std::string>();
  usage_error("--out is required");
}

std::vector<std::string> all_method_names() {
  char* names = nullptr;
  check(rs_method_names(&names));
  return json::parse(take(names)).get<std::vector<std::string>>();
}

const std::vector<std::string> kTargets = {"gunning_fog",    "length_chars",
                                           "sentiment",      "subjectivity",
                                           "framing_effect", "information_overload",
                                           "oversimplification"};

// Simulator config with the seed resolved; builtin biases when none given.
json simulation_config(json cfg, const std::optional<std::uint64_t>& seed) {
  if (seed) cfg["seed"] = *seed;
  if (!cfg.contains("seed")) cfg["seed"] = 0;
  if (!cfg.contains("biases")) cfg["biases"] = {"b1", "b2", "b3"};
  return cfg;
}

// Writes matrix.csv, ground_truth.json and manifest.json into `dir`.
json write_simulation(const json& sim_cfg, const fs::path& dir) {
  rs_simulation* raw = nullptr;
  check(rs_simulate(sim_cfg.dump().c_str(), &raw));
  SimulationPtr sim(raw);
  rs_matrix* mraw = nullptr;
  check(rs_simulation_matrix(sim.get(), &mraw));
  MatrixPtr matrix(mraw);
  char* csv = nullptr;
  check(rs_matrix_format(matrix.get(), &csv));
  const std::string csv_text = take(csv);
  char* truths = nullptr;
  check(rs_simulation_truths(sim.get(), &truths));
  const std::string truth_text = take(truths);

  make_dir(dir);
  write_file(dir / "matrix.csv", csv_text);
  write_file(dir / "ground_truth.json", truth_text);
  const json manifest = {{"command", "simulate"},
                         {"seed", sim_cfg.at("seed")},
                         {"config", sim_cfg},
                         {"config_hash", config_hash(sim_cfg)},
                         {"rows", rs_matrix_rows(matrix.get())},
                         {"files",
                          {{"matrix.csv", fnv1a_hex(csv_text)},
                           {"ground_truth.json", fnv1a_hex(truth_text)}}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

int cmd_simulate(const Options& o) {
  const json cfg = read_config(o.config);
  const json sim_cfg = simulation_config(cfg.value("simulation", cfg), o.seed);
  const fs::path dir = require_out(o, json::object());
  const json manifest = write_simulation(sim_cfg, dir);
  std::cout << "wrote " << manifest.at("rows").get<std::size_t>() << " rows to " << dir.string()
            << " (config " << manifest.at("config_hash").get<std::string>() << ")\n";
  return kOk;
}

MatrixPtr load_matrix(const std::string& path) {
  rs_matrix* raw = nullptr;
  check(rs_matrix_load(path.c_str(), &raw));
  return MatrixPtr(raw);
}

// Method parameters: the config's "params" object plus the seed.
json method_params(const json& cfg, const std::optional<std::uint64_t>& seed) {
  json params = cfg.value("params", json::object());
  if (!params.is_object()) usage_error("'params' must be an object");
  if (seed) {
    params["seed"] = *seed;
  } else if (cfg.contains("seed") && !params.contains("seed")) {
    params["seed"] = cfg.at("seed");
  }
  return params;
}

std::string ruleset_file(const std::string& method, const std::string& target) {
  return method + "." + target + ".json";
}

int cmd_explain(const Options& o) {
  const json cfg = read_config(o.config);
  const std::string data = !o.data.empty() ? o.data : cfg.value("data", std::string());
  if (data.empty()) usage_error("--data is required");
  std::vector<std::string> methods = config_list(cfg, "methods", o.methods);
  if (methods.empty()) methods = {"ruleshap"};
  std::vector<std::string> targets = config_list(cfg, "targets", o.targets);
  if (targets.empty()) targets = kTargets;
  const json params = method_params(cfg, o.seed);
  const fs::path dir = require_out(o, cfg);

  // Validate names before doing any work.
  const auto valid = all_method_names();
  for (const auto& m : methods) {
    if (std::find(valid.begin(), valid.end(), m) == valid.end()) {
      std::string list;
      for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
      usage_error("unknown method '" + m + "' (valid: " + list + ")");
    }
  }
  const MatrixPtr matrix = load_matrix(data);
  const std::string data_text = read_file(data);
  const auto source = read_manifest(fs::path(data).parent_path());

  make_dir(dir);
  std::vector<std::string> sets;
  json files = json::array();
  for (const auto& m : methods) {
    for (const auto& t : targets) {
      char* out = nullptr;
      check(rs_explain(matrix.get(), m.c_str(), t.c_str(), params.dump().c_str(), &out));
      sets.push_back(take(out));
      write_file(dir / ruleset_file(m, t), sets.back());
      files.push_back(ruleset_file(m, t));
    }
  }
  std::vector<const char*> ptrs;
  for (const auto& s : sets) ptrs.push_back(s.c_str());
  const std::vector<int> ks = k_values(cfg, o.k);
  char* report = nullptr;
  char* table = nullptr;
  check(rs_evaluate(ptrs.data(), ptrs.size(), "[]", nullptr, ks.data(), ks.size(), &report,
                    &table));
  write_file(dir / "report.json", take(report));
  write_file(dir / "report.txt", take(table));

  const json effective = {{"methods", methods}, {"targets", targets}, {"params", params}};
  json manifest = {{"command", "explain"},
                   {"config", effective},
                   {"config_hash", config_hash(effective)},
                   {"data", data},
                   {"data_hash", fnv1a_hex(data_text)},
                   {"files", files}};
  manifest["source_config_hash"] =
      source && source->contains("config_hash") ? source->at("config_hash") : json(nullptr);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << sets.size() << " rule sets to " << dir.string() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const json cfg = read_config(o.config);
  const std::string rules = !o.rules.empty() ? o.rules : cfg.value("rules", std::string());
  const std::string truth = !o.truth.empty() ? o.truth : cfg.value("truth", std::string());
  if (rules.empty()) usage_error("--rules is required");
  if (truth.empty()) usage_error("ground truth is required (--truth)");
  if (!fs::is_directory(rules)) data_error("rules directory not found: " + rules);
  const std::string truth_text = read_file(truth);

  const auto rules_manifest = read_manifest(rules);
  const auto truth_manifest = read_manifest(fs::path(truth).parent_path());
  if (rules_manifest && truth_manifest) {
    const json a = rules_manifest->value("source_config_hash", json(nullptr));
    const json b = truth_manifest->value("config_hash", json(nullptr));
    if (!a.is_null() && !b.is_null() && a != b && !o.force) {
      data_error("config hash mismatch: rules come from " + a.get<std::string>() +
                 ", ground truth from " + b.get<std::string>() + " (use --force to override)");
    }
  }

  std::vector<fs::path> paths;
  if (rules_manifest && rules_manifest->contains("files")) {
    for (const auto& f : rules_manifest->at("files")) paths.push_back(fs::path(rules) / f.get<std::string>());
  } else {
    for (const auto& e : fs::directory_iterator(rules)) {
      const auto name = e.path().filename().string();
      if (e.path().extension() == ".json" && name != "manifest.json" && name != "report.json") {
        paths.push_back(e.path());
      }
    }
    std::sort(paths.begin(), paths.end());
  }
  if (paths.empty()) data_error("no rule sets in " + rules);
  std::vector<std::string> sets;
  for (const auto& p : paths) sets.push_back(read_file(p));
  std::vector<const char*> ptrs;
  for (const auto& s : sets) ptrs.push_back(s.c_str());

  MatrixPtr matrix;
  const std::string data = !o.data.empty() ? o.data : cfg.value("data", std::string());
  if (!data.empty()) matrix = load_matrix(data);

  const std::vector<int> ks = k_values(cfg, o.k);
  char* report = nullptr;
  char* table = nullptr;
  check(rs_evaluate(ptrs.data(), ptrs.size(), truth_text.c_str(), matrix.get(), ks.data(),
                    ks.size(), &report, &table));
  const std::string report_text = take(report);
  const std::string table_text = take(table);
  if (!o.out.empty()) {
    make_dir(o.out);
    write_file(fs::path(o.out) / "evaluation.json", report_text);
    write_file(fs::path(o.out) / "evaluation.txt", table_text);
  }
  std::cout << table_text;
  return kOk;
}

int cmd_audit(const Options& o) {
  const json cfg = read_config(o.config);
  const fs::path dir = require_out(o, cfg);
  std::string data = !o.data.empty() ? o.data : cfg.value("data", std::string());
  std::string truth = !o.truth.empty() ? o.truth : cfg.value("truth", std::string());
  const bool has_sim = cfg.contains("simulation");
  if (data.empty() == !has_sim) usage_error("give exactly one of --data and a 'simulation' config");

  make_dir(dir);
  std::optional<json> sim_manifest;
  if (has_sim) {
    const json sim_cfg = simulation_config(cfg.at("simulation"), o.seed);
    sim_manifest = write_simulation(sim_cfg, dir / "data");
    data = (dir / "data" / "matrix.csv").string();
    if (truth.empty()) truth = (dir / "data" / "ground_truth.json").string();
  }
  const MatrixPtr matrix = load_matrix(data);
  const std::string truth_text = truth.empty() ? std::string() : read_file(truth);

  json options = {{"k", k_values(cfg, o.k)}, {"jobs", o.jobs > 1 ? o.jobs : cfg.value("jobs", 1)}};
  options["params"] = method_params(cfg, o.seed);
  const auto methods = config_list(cfg, "methods", o.methods);
  if (!methods.empty()) options["methods"] = methods;
  const auto targets = config_list(cfg, "targets", o.targets);
  if (!targets.empty()) options["targets"] = targets;

  char* report = nullptr;
  char* table = nullptr;
  check(rs_audit(matrix.get(), options.dump().c_str(),
                 truth_text.empty() ? nullptr : truth_text.c_str(), &report, &table));
  const std::string table_text = take(table);
  write_file(dir / "report.json", take(report));
  write_file(dir / "report.txt", table_text);
  if (!truth_text.empty()) {
    char* certs = nullptr;
    check(rs_certificates(matrix.get(), truth_text.c_str(), &certs));
    write_file(dir / "certificates.csv", take(certs));
  }
  json effective = options;
  effective.erase("jobs");
  json manifest = {{"command", "audit"},
                   {"config", effective},
                   {"config_hash", config_hash(effective)},
                   {"data_hash", fnv1a_hex(read_file(data))}};
  if (sim_manifest) manifest["source_config_hash"] = sim_manifest->at("config_hash");
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << table_text;
  return kOk;
}

int cmd_abstract(const Options& o) {
  const json cfg = read_config(o.config);
  const std::string topics = !o.topics.empty() ? o.topics : cfg.value("topics", std::string());
  if (topics.empty()) usage_error("--topics is required");
  if (!cfg.contains("providers")) usage_error("config needs a 'providers' object");
  json providers = cfg.at("providers");
  if (o.jobs > 1) providers["jobs"] = o.jobs;
  const fs::path dir = require_out(o, cfg);
  make_dir(dir);
  rs_matrix* raw = nullptr;
  check(rs_abstract(topics.c_str(), providers.dump().c_str(), &raw));
  MatrixPtr matrix(raw);
  check(rs_matrix_save(matrix.get(), (dir / "matrix.csv").string().c_str()));
  const json manifest = {{"command", "abstract"},
                         {"topics", topics},
                         {"config_hash", config_hash(providers)},
                         {"rows", rs_matrix_rows(matrix.get())}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << rs_matrix_rows(matrix.get()) << " rows to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule extraction for auditing opinion-based biases in language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rs_version()));
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON configuration file");
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--out", o.out, "Output directory");
  };
  auto add_methods = [&](CLI::App* cmd) {
    cmd->add_option("--method", o.methods, "Method name (repeatable or comma separated)");
    cmd->add_option("--target", o.targets, "Output feature (repeatable or comma separated)");
    cmd->add_option("--k", o.k, "Cut-offs for MRR@k (repeatable)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a simulated audit dataset");
  add_common(simulate);

  auto* abstract = app.add_subcommand("abstract", "Score topics through live model endpoints");
  add_common(abstract);
  abstract->add_option("--topics", o.topics, "Topics CSV (id,domain,text)");
  abstract->add_option("--jobs", o.jobs, "Parallel requests")->check(CLI::PositiveNumber);

  auto* explain = app.add_subcommand("explain", "Extract ranked rules per method and target");
  add_common(explain);
  add_methods(explain);
  explain->add_option("--data", o.data, "Abstraction matrix CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Score rule sets against ground truth");
  add_common(evaluate);
  evaluate->add_option("--k", o.k, "Cut-offs for MRR@k (repeatable)");
  evaluate->add_option("--rules", o.rules, "Directory written by explain");
  evaluate->add_option("--truth", o.truth, "Ground-truth rules JSON");
  evaluate->add_option("--data", o.data, "Abstraction matrix CSV (enables certificates)");
  evaluate->add_flag("--force", o.force, "Ignore config hash mismatches");

  auto* audit = app.add_subcommand("audit", "Explain and evaluate in one run");
  add_common(audit);
  add_methods(audit);
  audit->add_option("--data", o.data, "Abstraction matrix CSV");
  audit->add_option("--truth", o.truth, "Ground-truth rules JSON");
  audit->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  for (auto* cmd : {simulate, abstract, explain, evaluate, audit}) {
    if (cmd->count("--seed") > 0) o.seed = seed;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*abstract) return cmd_abstract(o);
    if (*explain) return cmd_explain(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*audit) return cmd_audit(o);
  } catch (const CliError& e) {
    std::cerr << "ruleshap: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "ruleshap: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
