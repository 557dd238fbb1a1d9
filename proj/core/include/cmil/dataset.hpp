#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cmil {

/// Per-coordinate affine map of states and actions onto [-1, 1] using ranges
/// observed on a training split. Empty ranges mean identity.
struct Normalization {
  Eigen::VectorXd state_min;
  Eigen::VectorXd state_max;
  Eigen::VectorXd action_min;
  Eigen::VectorXd action_max;

  bool empty() const { return state_min.size() == 0 && action_min.size() == 0; }

  Eigen::VectorXd normalize_state(const Eigen::VectorXd& s) const;
  Eigen::VectorXd denormalize_state(const Eigen::VectorXd& s) const;
  Eigen::VectorXd normalize_action(const Eigen::VectorXd& a) const;
  Eigen::VectorXd denormalize_action(const Eigen::VectorXd& a) const;

  bool operator==(const Normalization& other) const;
};

struct Step {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
};

struct Trajectory {
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
};

struct DatasetMeta {
  std::string env = "custom";
  std::string split = "train";
  int n_agents = 0;
  int state_dim = 0;
  int action_dim = 0;  // D, total scalar action coordinates
  int horizon = 0;     // nominal trajectory length T
  std::uint64_t seed = 0;
  std::vector<int> agent_of_coord;
  Normalization normalization;
};

/// Demonstrations in raw (unnormalized) units plus the normalization that the
/// models consume.
struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;

  std::size_t count() const { return trajectories.size(); }
  std::size_t total_steps() const;

  /// Dimensional consistency with metadata and finiteness of every entry.
  void validate() const;
};

/// Column-per-sample view used by the trainers.
struct SampleSet {
  Eigen::MatrixXd states;   // state_dim x n
  Eigen::MatrixXd actions;  // action_dim x n

  Eigen::Index size() const { return states.cols(); }
};

/// Min/max of every state and action coordinate over all steps.
Normalization fit_normalization(const Dataset& ds);

SampleSet to_samples(const Dataset& ds, bool normalized = true);

/// Multiplies agent `agent`'s action coordinates by `factor` in raw units.
Dataset scale_agent_actions(const Dataset& ds, int agent, double factor);

std::string render_metadata(const Dataset& ds);
std::string render_records(const Dataset& ds);
Dataset parse_dataset(std::string_view metadata, std::string_view records);

/// Writes `<prefix>.json` and `<prefix>.csv`.
void save_dataset(const Dataset& ds, const std::string& prefix);
Dataset load_dataset(const std::string& prefix);

}  // namespace cmil
