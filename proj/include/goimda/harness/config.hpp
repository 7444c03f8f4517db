#ifndef GOIMDA_HARNESS_CONFIG_HPP
#define GOIMDA_HARNESS_CONFIG_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "goimda/core.hpp"
#include "goimda/goals.hpp"
#include "goimda/ihvp.hpp"

namespace goimda::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct LogisticSection {
  std::size_t d = 20, l = 3;
  double noise_sd = 0.1;
  std::size_t pool_size = 5000, test_size = 2000;
  double margin_sd = 10.0;
  double ridge = 1e-2;
  bool operator==(const LogisticSection&) const = default;
};

struct NoisyOptSection {
  std::string objective = "branin";
  double noise_sd = 0.1;
  std::size_t n_initial = 5;
  std::size_t pool_size = 2000;
  std::size_t rbf_grid = 12;  // centres per axis
  double rbf_lengthscale = 0.125;  // in unit-box coordinates
  double ridge = 3e-2;
  bool operator==(const NoisyOptSection&) const = default;
};

struct ToySection {
  std::size_t pool_size = 1000, test_size = 1000, n_initial = 10;
  std::string model = "rbf";  // "rbf" or "mlp"
  std::size_t rbf_grid = 6;
  double rbf_lengthscale = 0.8;
  std::vector<std::size_t> hidden{16, 16};
  int max_epochs = 500;
  double ridge = 1e-3;
  bool operator==(const ToySection&) const = default;
};

struct GoalSection {
  std::string kind = "nll";
  std::string sense = "minimize";
  double focal_gamma = 0.0;
  bool operator==(const GoalSection&) const = default;
};

struct IhvpSection {
  std::string method = "auto";
  double damping = 1e-3;
  int max_iters = 1000;
  double tol = 1e-10;
  double lissa_scale = 0.0;
  std::size_t lissa_batch = 64;
  int lissa_repeats = 2;
  bool operator==(const IhvpSection&) const = default;

  IhvpConfig to_config() const {
    IhvpConfig c;
    c.method = ihvp_method_from_string(method);
    c.damping = damping;
    c.max_iters = max_iters;
    c.tol = tol;
    c.lissa_scale = lissa_scale;
    c.lissa_batch = lissa_batch;
    c.lissa_repeats = lissa_repeats;
    return c;
  }
};

struct GpSection {
  double ucb_beta = 2.0;
  std::size_t recommend_grid = 1024;
  bool operator==(const GpSection&) const = default;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string experiment;  // logistic_bias | noisy_opt | al_toy
  std::string problem;
  std::vector<std::string> methods;
  int budget = 0;
  int replications = 1;
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  std::string output_dir = "out";
  std::vector<double> thresholds{0.8, 0.9, 0.95};
  std::size_t ensemble_size = 5;
  std::size_t n_boot = 1000;
  bool write_svg = false;
  LogisticSection logistic;
  NoisyOptSection noisy_opt;
  ToySection al_toy;
  GoalSection goal;
  IhvpSection ihvp;
  GpSection gp;

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;
};

inline const std::vector<std::string>& methods_for(const std::string& experiment) {
  static const std::vector<std::string> logistic{"true_bias", "jackknife", "one_bias", "random"};
  static const std::vector<std::string> noisy{"goimda", "ei", "ucb", "pi", "random"};
  static const std::vector<std::string> toy{"goimda", "random"};
  if (experiment == "logistic_bias") return logistic;
  if (experiment == "noisy_opt") return noisy;
  if (experiment == "al_toy") return toy;
  throw ConfigError("unknown experiment kind: " + experiment);
}

inline void ExperimentConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw ConfigError("schema_version " + std::to_string(schema_version) + " is not supported");
  const auto& known = methods_for(experiment);
  if (methods.empty()) throw ConfigError("methods must be non-empty");
  for (const auto& m : methods)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw ConfigError("method '" + m + "' is not defined for " + experiment);
  if (budget < 0) throw ConfigError("budget must be nonnegative");
  if (replications < 1) throw ConfigError("replications must be positive");
  if (seeds.size() != static_cast<std::size_t>(replications))
    throw ConfigError("seeds must have one entry per replication");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (ensemble_size < 2) throw ConfigError("ensemble_size must be at least 2");
  if (n_boot < 100) throw ConfigError("n_boot must be at least 100");
  try {
    (void)goal_kind_from_string(goal.kind);
    (void)goal_sense_from_string(goal.sense);
    (void)ihvp_method_from_string(ihvp.method);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (experiment == "noisy_opt" && noisy_opt.pool_size == 0) throw ConfigError("noisy_opt.pool_size must be positive");
  if (experiment == "al_toy" && al_toy.model != "rbf" && al_toy.model != "mlp")
    throw ConfigError("al_toy.model must be rbf or mlp");
}

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown config field '" + k + "' in " + where);
}

}  // namespace detail

inline void to_json(json& j, const LogisticSection& s) {
  j = {{"d", s.d}, {"l", s.l}, {"noise_sd", s.noise_sd}, {"pool_size", s.pool_size}, {"test_size", s.test_size},
       {"margin_sd", s.margin_sd}, {"ridge", s.ridge}};
}
inline void from_json(const json& j, LogisticSection& s) {
  detail::check_keys(j, {"d", "l", "noise_sd", "pool_size", "test_size", "margin_sd", "ridge"}, "logistic");
  detail::read(j, "d", s.d);
  detail::read(j, "l", s.l);
  detail::read(j, "noise_sd", s.noise_sd);
  detail::read(j, "pool_size", s.pool_size);
  detail::read(j, "test_size", s.test_size);
  detail::read(j, "margin_sd", s.margin_sd);
  detail::read(j, "ridge", s.ridge);
}

inline void to_json(json& j, const NoisyOptSection& s) {
  j = {{"objective", s.objective}, {"noise_sd", s.noise_sd}, {"n_initial", s.n_initial},
       {"pool_size", s.pool_size}, {"rbf_grid", s.rbf_grid},   {"rbf_lengthscale", s.rbf_lengthscale},
       {"ridge", s.ridge}};
}
inline void from_json(const json& j, NoisyOptSection& s) {
  detail::check_keys(j, {"objective", "noise_sd", "n_initial", "pool_size", "rbf_grid", "rbf_lengthscale", "ridge"},
                     "noisy_opt");
  detail::read(j, "objective", s.objective);
  detail::read(j, "noise_sd", s.noise_sd);
  detail::read(j, "n_initial", s.n_initial);
  detail::read(j, "pool_size", s.pool_size);
  detail::read(j, "rbf_grid", s.rbf_grid);
  detail::read(j, "rbf_lengthscale", s.rbf_lengthscale);
  detail::read(j, "ridge", s.ridge);
}

inline void to_json(json& j, const ToySection& s) {
  j = {{"pool_size", s.pool_size}, {"test_size", s.test_size}, {"n_initial", s.n_initial},
       {"model", s.model},         {"rbf_grid", s.rbf_grid},   {"rbf_lengthscale", s.rbf_lengthscale},
       {"hidden", s.hidden},       {"max_epochs", s.max_epochs}, {"ridge", s.ridge}};
}
inline void from_json(const json& j, ToySection& s) {
  detail::check_keys(j,
                     {"pool_size", "test_size", "n_initial", "model", "rbf_grid", "rbf_lengthscale", "hidden",
                      "max_epochs", "ridge"},
                     "al_toy");
  detail::read(j, "pool_size", s.pool_size);
  detail::read(j, "test_size", s.test_size);
  detail::read(j, "n_initial", s.n_initial);
  detail::read(j, "model", s.model);
  detail::read(j, "rbf_grid", s.rbf_grid);
  detail::read(j, "rbf_lengthscale", s.rbf_lengthscale);
  detail::read(j, "hidden", s.hidden);
  detail::read(j, "max_epochs", s.max_epochs);
  detail::read(j, "ridge", s.ridge);
}

inline void to_json(json& j, const GoalSection& s) {
  j = {{"kind", s.kind}, {"sense", s.sense}, {"focal_gamma", s.focal_gamma}};
}
inline void from_json(const json& j, GoalSection& s) {
  detail::check_keys(j, {"kind", "sense", "focal_gamma"}, "goal");
  detail::read(j, "kind", s.kind);
  detail::read(j, "sense", s.sense);
  detail::read(j, "focal_gamma", s.focal_gamma);
}

inline void to_json(json& j, const IhvpSection& s) {
  j = {{"method", s.method},           {"damping", s.damping},           {"max_iters", s.max_iters},
       {"tol", s.tol},                 {"lissa_scale", s.lissa_scale},   {"lissa_batch", s.lissa_batch},
       {"lissa_repeats", s.lissa_repeats}};
}
inline void from_json(const json& j, IhvpSection& s) {
  detail::check_keys(j, {"method", "damping", "max_iters", "tol", "lissa_scale", "lissa_batch", "lissa_repeats"},
                     "ihvp");
  detail::read(j, "method", s.method);
  detail::read(j, "damping", s.damping);
  detail::read(j, "max_iters", s.max_iters);
  detail::read(j, "tol", s.tol);
  detail::read(j, "lissa_scale", s.lissa_scale);
  detail::read(j, "lissa_batch", s.lissa_batch);
  detail::read(j, "lissa_repeats", s.lissa_repeats);
}

inline void to_json(json& j, const GpSection& s) {
  j = {{"ucb_beta", s.ucb_beta}, {"recommend_grid", s.recommend_grid}};
}
inline void from_json(const json& j, GpSection& s) {
  detail::check_keys(j, {"ucb_beta", "recommend_grid"}, "gp");
  detail::read(j, "ucb_beta", s.ucb_beta);
  detail::read(j, "recommend_grid", s.recommend_grid);
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = c.experiment;
  j["problem"] = c.problem;
  j["methods"] = c.methods;
  j["budget"] = c.budget;
  j["replications"] = c.replications;
  j["seeds"] = c.seeds;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  j["thresholds"] = c.thresholds;
  j["ensemble_size"] = c.ensemble_size;
  j["n_boot"] = c.n_boot;
  j["write_svg"] = c.write_svg;
  j["logistic"] = c.logistic;
  j["noisy_opt"] = c.noisy_opt;
  j["al_toy"] = c.al_toy;
  j["goal"] = c.goal;
  j["ihvp"] = c.ihvp;
  j["gp"] = c.gp;
  return j;
}

/// Parses and validates. `seeds` may be replaced by `base_seed`, which
/// expands to one derived seed per replication.
inline ExperimentConfig parse_config(const json& j) {
  detail::check_keys(j,
                     {"schema_version", "experiment", "problem", "methods", "budget", "replications", "seeds",
                      "base_seed", "workers", "output_dir", "thresholds", "ensemble_size", "n_boot", "write_svg",
                      "logistic", "noisy_opt", "al_toy", "goal", "ihvp", "gp"},
                     "config");
  if (!j.contains("schema_version")) throw ConfigError("schema_version is required");
  if (!j.contains("experiment")) throw ConfigError("experiment is required");
  ExperimentConfig c;
  detail::read(j, "schema_version", c.schema_version);
  detail::read(j, "experiment", c.experiment);
  detail::read(j, "problem", c.problem);
  detail::read(j, "budget", c.budget);
  detail::read(j, "replications", c.replications);
  detail::read(j, "workers", c.workers);
  detail::read(j, "output_dir", c.output_dir);
  detail::read(j, "thresholds", c.thresholds);
  detail::read(j, "ensemble_size", c.ensemble_size);
  detail::read(j, "n_boot", c.n_boot);
  detail::read(j, "write_svg", c.write_svg);
  detail::read(j, "logistic", c.logistic);
  detail::read(j, "noisy_opt", c.noisy_opt);
  detail::read(j, "al_toy", c.al_toy);
  detail::read(j, "goal", c.goal);
  detail::read(j, "ihvp", c.ihvp);
  detail::read(j, "gp", c.gp);
  if (j.contains("methods"))
    detail::read(j, "methods", c.methods);
  else if (c.experiment == "logistic_bias" || c.experiment == "noisy_opt" || c.experiment == "al_toy")
    c.methods = methods_for(c.experiment);
  if (j.contains("seeds")) {
    if (j.contains("base_seed")) throw ConfigError("give either seeds or base_seed, not both");
    detail::read(j, "seeds", c.seeds);
  } else {
    std::uint64_t base = 0;
    detail::read(j, "base_seed", base);
    for (int r = 0; r < c.replications; ++r) c.seeds.push_back(derive_seed(base, 0xbe5e, r));
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace goimda::harness

#endif  // GOIMDA_HARNESS_CONFIG_HPP
