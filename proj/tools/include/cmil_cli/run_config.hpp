#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmil/envs.hpp"
#include "cmil/policy.hpp"

namespace cmil::cli {

/// Flat key=value experiment configuration. Blank lines and lines starting
/// with '#' are ignored; unknown keys are errors.
struct RunConfig {
  std::optional<std::uint64_t> seed;

  // environment and data generation
  std::string env = "physim";
  int n_particles = 5;
  bool resample_each_step = true;
  int m_train = 500;
  int m_val = 100;
  int m_test = 100;
  int horizon = 100;
  int intervene_agent = -1;
  double intervene_factor = 1.0;

  // paths
  std::string out = "out";
  std::string train_data;
  std::string val_data;
  std::string test_data;
  std::string policy;
  std::string swap_policy;

  // training
  std::string copula = "kde";
  int components = 2;
  int hidden = 64;
  double lr = 0.01;
  double l2 = 1e-5;
  int epochs = 200;
  int batch_size = 128;
  double tolerance = 1e-4;
  int patience = 5;
  int copula_components = 4;
  int copula_hidden = 64;
  double copula_lr = 0.01;
  double copula_l2 = 1e-5;
  int copula_epochs = 100;
  int kde_max_support = 20000;
  int action_dim = 0;  // 0 accepts whatever the dataset has

  // evaluation, rollout, export
  std::string metrics = "nll,rmse";
  int repetitions = 3;
  int n_samples = 100;
  int rollouts = 10;
  std::string pairs = "0:1";
  int resolution = 50;
  std::string state;  // comma-separated normalized state for state-dependent copulas

  /// Checks ranges and that a seed is present.
  void validate() const;
};

RunConfig parse_run_config(std::string_view text);
std::string render_run_config(const RunConfig& cfg);

/// Applies one key=value assignment; throws ConfigError for unknown keys or bad values.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

EnvConfig make_env_config(const RunConfig& cfg);
PolicyTrainConfig make_train_config(const RunConfig& cfg);
std::vector<std::pair<int, int>> parse_pairs(std::string_view text);

}  // namespace cmil::cli
