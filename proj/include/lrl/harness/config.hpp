#pragma once

// Experiment configuration: an INI file (sections [run], [stream], [learner],
// [optimizer], [hardness], [eluder]) plus "section.key=value" overrides.
// Unknown keys are rejected so typos do not silently fall back to defaults.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "lrl/erm.hpp"
#include "lrl/errors.hpp"
#include "lrl/random.hpp"
#include "lrl/sample_size.hpp"

namespace lrl::harness {

enum class Experiment { Table1, Curves, EluderAudit, Hardness, LemmaChecks, Certify };

inline std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Table1: return "table1";
    case Experiment::Curves: return "curves";
    case Experiment::EluderAudit: return "eluder";
    case Experiment::Hardness: return "hardness";
    case Experiment::LemmaChecks: return "lemma-checks";
    case Experiment::Certify: return "certify";
  }
  return "unknown";
}

inline Experiment experiment_from_string(std::string_view name) {
  for (Experiment e : {Experiment::Table1, Experiment::Curves, Experiment::EluderAudit, Experiment::Hardness,
                       Experiment::LemmaChecks, Experiment::Certify})
    if (name == to_string(e)) return e;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

struct HardnessSettings {
  std::vector<long> d_list{400};
  long r = 200;
  std::vector<long> n_grid{5, 50, 200, 800, 2000};
  int trials = 200;
};

struct EluderAuditSettings {
  int pairs = 50;
  int max_reps = 4;
  int max_heads = 4;
  long dim = 3;
  long rep_dim = 2;
  double epsilon = 0.1;
  std::uint64_t node_budget = 1'000'000;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Table1;
  std::uint64_t seed = 1;
  int trials = 10;
  std::string output;

  long d = 10;
  int T = 50;
  std::vector<long> k_list{3, 5, 8};
  std::vector<double> beta_list{1.0, 4.0, 8.0};

  double epsilon = 0.05;
  double delta = 0.1;
  SampleSizePolicy::Kind policy = SampleSizePolicy::Kind::Practical71;
  std::optional<long> initial_N;
  std::optional<long> known_dim;
  bool warm_start = true;
  long heldout = 0;  ///< 0 selects ceil(32 / eps^2)

  OptimizerConfig optimizer;
  HardnessSettings hardness;
  EluderAuditSettings eluder;

  SampleSizePolicy policy_for(long k) const {
    SampleSizePolicy p;
    p.kind = policy;
    p.epsilon = epsilon;
    p.delta = delta;
    p.T = T;
    p.d = d;
    p.k = k;
    return p;
  }

  std::uint64_t trial_seed(int trial) const { return derive_seed(seed, {static_cast<std::uint64_t>(trial)}); }

  void validate() const {
    auto check = [](bool ok, const char* msg) {
      if (!ok) throw ConfigError(msg);
    };
    check(trials >= 1, "run.trials must be >= 1");
    check(d >= 1 && T >= 1, "stream.d and stream.T must be >= 1");
    check(!k_list.empty() && !beta_list.empty(), "stream.k and stream.beta must be non-empty");
    for (long k : k_list) check(k >= 1 && k <= d, "stream.k entries must lie in [1, d]");
    for (double b : beta_list) check(std::isfinite(b) && b > 0.0, "stream.beta entries must be positive");
    check(epsilon > 0.0 && epsilon < 1.0, "learner.epsilon must lie in (0, 1)");
    check(delta > 0.0 && delta < 1.0, "learner.delta must lie in (0, 1)");
    check(!initial_N || *initial_N >= 1, "learner.initial_N must be >= 1");
    check(!known_dim || *known_dim >= 1, "learner.known_dim must be >= 1");
    check(heldout >= 0, "learner.heldout must be >= 0");
    check(!hardness.d_list.empty() && !hardness.n_grid.empty(), "hardness.d and hardness.n must be non-empty");
    for (long hd : hardness.d_list) check(hardness.r >= 0 && 2 * hardness.r <= hd, "hardness.r must be <= d/2 for every d");
    for (long n : hardness.n_grid) check(n >= 0, "hardness.n entries must be >= 0");
    check(hardness.trials >= 1, "hardness.trials must be >= 1");
    check(eluder.pairs >= 1 && eluder.max_reps >= 1 && eluder.max_heads >= 1, "eluder sizes must be >= 1");
    check(eluder.rep_dim >= 1 && eluder.rep_dim <= eluder.dim, "eluder.rep_dim must lie in [1, eluder.dim]");
    check(eluder.epsilon >= 0.0, "eluder.epsilon must be >= 0");
    try {
      optimizer.validate();
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "run.seed",         "run.trials",          "run.output",          "stream.d",           "stream.T",
      "stream.k",         "stream.beta",         "learner.epsilon",     "learner.delta",      "learner.policy",
      "learner.initial_N", "learner.known_dim",  "learner.warm_start",  "learner.heldout",    "optimizer.learning_rate",
      "optimizer.max_epochs", "optimizer.patience", "optimizer.tolerance", "optimizer.adaptive", "optimizer.head_norm_bound",
      "hardness.d",       "hardness.r",          "hardness.n",          "hardness.trials",    "eluder.pairs",
      "eluder.max_reps",  "eluder.max_heads",    "eluder.dim",          "eluder.rep_dim",     "eluder.epsilon",
      "eluder.node_budget"};
  return keys;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] inline void bad_field(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("field '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_field(key, raw, "an integer");
  return out;
}

inline double parse_real(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad_field(key, raw, "a number");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_field(key, raw, "a boolean");
}

inline std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string_view rest(raw);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

/// Parses "section.key=value".
inline std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(text) + "' is not of the form section.key=value");
  return {detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1))};
}

/// Defaults, then the optional INI file, then overrides (later wins).
inline ExperimentConfig load_config(Experiment experiment, const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::pair<std::string, std::string>>& overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  if (file) {
    try {
      pt::ini_parser::read_ini(file->string(), tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("config " + e.filename() + " line " + std::to_string(e.line()) + ": " + e.message());
    }
  }
  for (const auto& [key, value] : overrides) tree.put(pt::ptree::path_type(key, '.'), value);

  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' must live inside a section");
    for (const auto& [name, leaf] : body) {
      const std::string key = section + "." + name;
      if (!detail::known_keys().contains(key)) throw ConfigError("config: unknown field '" + key + "'");
    }
  }

  ExperimentConfig cfg;
  cfg.experiment = experiment;
  auto value = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(key, '.'))) return *v;
    return std::nullopt;
  };
  auto set_int = [&]<class Int>(const std::string& key, Int& target) {
    if (auto v = value(key)) target = detail::parse_integer<Int>(key, *v);
  };
  auto set_real = [&](const std::string& key, double& target) {
    if (auto v = value(key)) target = detail::parse_real(key, *v);
  };
  auto set_opt = [&](const std::string& key, std::optional<long>& target) {
    if (auto v = value(key)) target = detail::trim(*v).empty() ? std::nullopt : std::optional<long>(detail::parse_integer<long>(key, *v));
  };
  auto set_longs = [&](const std::string& key, std::vector<long>& target) {
    if (auto v = value(key)) {
      target.clear();
      for (const auto& item : detail::split_list(*v)) target.push_back(detail::parse_integer<long>(key, item));
    }
  };

  set_int("run.seed", cfg.seed);
  set_int("run.trials", cfg.trials);
  cfg.output = value("run.output").value_or("results/" + std::string(to_string(experiment)));
  set_int("stream.d", cfg.d);
  set_int("stream.T", cfg.T);
  set_longs("stream.k", cfg.k_list);
  if (auto v = value("stream.beta")) {
    cfg.beta_list.clear();
    for (const auto& item : detail::split_list(*v)) cfg.beta_list.push_back(detail::parse_real("stream.beta", item));
  }
  set_real("learner.epsilon", cfg.epsilon);
  set_real("learner.delta", cfg.delta);
  if (auto v = value("learner.policy")) {
    try {
      cfg.policy = policy_kind_from_string(detail::trim(*v));
    } catch (const InvalidInput&) {
      detail::bad_field("learner.policy", *v, "'practical' or 'theoretical'");
    }
  }
  set_opt("learner.initial_N", cfg.initial_N);
  set_opt("learner.known_dim", cfg.known_dim);
  if (auto v = value("learner.warm_start")) cfg.warm_start = detail::parse_bool("learner.warm_start", *v);
  set_int("learner.heldout", cfg.heldout);
  set_real("optimizer.learning_rate", cfg.optimizer.learning_rate);
  set_int("optimizer.max_epochs", cfg.optimizer.max_epochs);
  set_int("optimizer.patience", cfg.optimizer.early_stop_patience);
  set_real("optimizer.tolerance", cfg.optimizer.tolerance);
  if (auto v = value("optimizer.adaptive")) cfg.optimizer.adaptive_moments = detail::parse_bool("optimizer.adaptive", *v);
  set_real("optimizer.head_norm_bound", cfg.optimizer.head_norm_bound);
  set_longs("hardness.d", cfg.hardness.d_list);
  set_int("hardness.r", cfg.hardness.r);
  set_longs("hardness.n", cfg.hardness.n_grid);
  set_int("hardness.trials", cfg.hardness.trials);
  set_int("eluder.pairs", cfg.eluder.pairs);
  set_int("eluder.max_reps", cfg.eluder.max_reps);
  set_int("eluder.max_heads", cfg.eluder.max_heads);
  set_int("eluder.dim", cfg.eluder.dim);
  set_int("eluder.rep_dim", cfg.eluder.rep_dim);
  set_real("eluder.epsilon", cfg.eluder.epsilon);
  set_int("eluder.node_budget", cfg.eluder.node_budget);
  cfg.validate();
  return cfg;
}

/// Every field, in a fixed order; the basis of the manifest and config hash.
inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  auto real = [](double v) -> nlohmann::ordered_json {
    if (std::isinf(v)) return "inf";
    return v;
  };
  j["experiment"] = to_string(c.experiment);
  j["run"] = {{"seed", c.seed}, {"trials", c.trials}, {"output", c.output}};
  j["stream"] = {{"d", c.d}, {"T", c.T}, {"k", c.k_list}, {"beta", c.beta_list}};
  j["learner"] = {{"epsilon", c.epsilon},
                  {"delta", c.delta},
                  {"policy", to_string(c.policy)},
                  {"initial_N", c.initial_N ? nlohmann::ordered_json(*c.initial_N) : nlohmann::ordered_json()},
                  {"known_dim", c.known_dim ? nlohmann::ordered_json(*c.known_dim) : nlohmann::ordered_json()},
                  {"warm_start", c.warm_start},
                  {"heldout", c.heldout}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"max_epochs", c.optimizer.max_epochs},
                    {"patience", c.optimizer.early_stop_patience},
                    {"tolerance", c.optimizer.tolerance},
                    {"adaptive", c.optimizer.adaptive_moments},
                    {"head_norm_bound", real(c.optimizer.head_norm_bound)}};
  j["hardness"] = {{"d", c.hardness.d_list}, {"r", c.hardness.r}, {"n", c.hardness.n_grid}, {"trials", c.hardness.trials}};
  j["eluder"] = {{"pairs", c.eluder.pairs},     {"max_reps", c.eluder.max_reps}, {"max_heads", c.eluder.max_heads},
                 {"dim", c.eluder.dim},         {"rep_dim", c.eluder.rep_dim},   {"epsilon", c.eluder.epsilon},
                 {"node_budget", c.eluder.node_budget}};
  return j;
}

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits. The output
/// location is left out so relocated runs share a hash.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::ordered_json j = config_json(c);
  j["run"].erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

/// Relative output paths are placed under $LRL_OUTPUT_ROOT when it is set.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  std::filesystem::path p(c.output);
  if (p.is_relative())
    if (const char* root = std::getenv("LRL_OUTPUT_ROOT"); root != nullptr && *root != '\0') p = std::filesystem::path(root) / p;
  return p;
}

}  // namespace lrl::harness
