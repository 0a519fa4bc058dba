#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "estimators/estimator.hpp"
#include "tasks/tasks.hpp"

namespace covbench::bench {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal TOML reader: [section] headers, key = value, strings, booleans,
// integers, floats and flat arrays. Keys are flattened to "section.key".
using TomlValue = std::variant<std::string, bool, int64_t, double, std::vector<std::string>,
                               std::vector<int64_t>, std::vector<double>>;
std::map<std::string, TomlValue> parse_toml(const std::string& text);
std::map<std::string, TomlValue> parse_toml_file(const std::string& path);

enum class Algorithm { NPE, NLE, NRE, ABC };
std::string algorithm_to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class Variant { Plain, Sam };
std::string variant_to_string(Variant v);

struct BenchConfig {
  std::vector<tasks::TaskName> task_names = {tasks::TaskName::TG_SS};
  std::vector<Algorithm> algorithms = {Algorithm::NPE, Algorithm::NLE, Algorithm::NRE, Algorithm::ABC};
  std::vector<Variant> variants = {Variant::Plain};  // SAM applies to neural algorithms only
  std::vector<int64_t> n_train = {10000};
  std::vector<int> sigmas = {0, 1, 2, 3, 4};
  int n_obs = 20;
  int n_seeds = 5;  // doubles as the ensemble size
  uint64_t master_seed = 20240501;
  int workers = 0;  // 0 = auto

  // metrics
  std::vector<double> alpha_grid;  // empty = 19 default levels
  int m_ref = 100;
  int k_density = 1000;
  int bootstrap_resamples = 1000;
  int n_ref_cache = 2000;

  // training
  int batch_size = 128;
  double validation_fraction = 0.1;
  int patience = 20;
  int max_epochs = 5000;  // CI safety cap standing in for "unlimited"
  double learning_rate = 3e-4;
  double weight_decay = 0.01;
  double sam_rho = 0.05;
  bool sam_same_batch = true;

  // flow / classifier
  int flow_layers = 5;
  int flow_bins = 8;
  double flow_bound = 5.0;
  int flow_hidden = 64;
  int nre_hidden = 64;
  int nre_hidden_layers = 3;

  // posterior MCMC and reference oracle
  int mcmc_chains = 4;
  int mcmc_keep = 1000;
  double rhat_threshold = 1.05;
  int oracle_chains = 4;
  int oracle_keep = 1500;

  // abc
  int64_t abc_n_total = 100000;
  double abc_acceptance_rate = 0.01;

  // ensemble
  bool ensemble_normalize = true;
  int ensemble_is_draws = 5000;

  static BenchConfig from_toml_file(const std::string& path);
  static BenchConfig from_toml_text(const std::string& text);
  void validate() const;

  est::FlowConfig flow_config() const;
  est::NreConfig nre_config() const;
  std::vector<double> alpha_levels() const;

  // Hash over every result-affecting knob; resume compares it per cell.
  uint64_t result_hash() const;
};

}  // namespace covbench::bench
