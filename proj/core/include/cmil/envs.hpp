#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "cmil/dataset.hpp"
#include "cmil/random.hpp"

namespace cmil {

// ---------------------------------------------------------------------------
// PhySim: N particles in a 2-D box, pairwise springs chosen each step from one
// of two complementary adjacency matrices. State = positions (x0, y0, x1, ...),
// action = accelerations in the same layout. Velocities stay inside the simulator.

struct PhySimConfig {
  int n_particles = 5;
  double spring_constant = 0.1;
  Eigen::MatrixXi adjacency_a;  // A1
  Eigen::MatrixXi adjacency_b;  // A2 = 1 - I - A1
  double noise_sd = 0.05;  // in normalized action units, see action_unit
  /// Raw acceleration corresponding to one normalized unit. physim_config sets
  /// it from a noise-free pilot run; 1 means noise_sd is in raw units.
  double action_unit = 1.0;
  double dt = 0.1;
  double half_width = 0.5;
  /// Draw the adjacency every step (true) or once per trajectory.
  bool resample_each_step = true;
  /// Per-particle multiplier applied to the noise-free spring acceleration.
  Eigen::VectorXd agent_scale;

  /// Symmetric binary matrices, zero diagonal, A1 + A2 + I == 1, dt > 0.
  void validate() const;
};

/// Defaults with A1 drawn as a symmetric Bernoulli(0.5) pattern from `seed`.
PhySimConfig physim_config(std::uint64_t seed, int n_particles = 5);

struct PhySimState {
  Eigen::VectorXd positions;   // 2N
  Eigen::VectorXd velocities;  // 2N
};

/// a_i = -k * agent_scale_i * sum_j A_ij (r_i - r_j), no noise.
Eigen::VectorXd physim_spring_acceleration(const PhySimConfig& cfg, const Eigen::VectorXd& positions,
                                           const Eigen::MatrixXi& adjacency);

/// Uniform choice from {A1, A2} (unless `fixed_choice` is 0 or 1) plus
/// i.i.d. Gaussian noise on every component.
Eigen::VectorXd physim_expert_action(const PhySimConfig& cfg, const Eigen::VectorXd& positions, Rng& rng,
                                     std::optional<int> fixed_choice = std::nullopt);

/// Semi-implicit Euler with elastic reflection at the walls.
PhySimState physim_step(const PhySimConfig& cfg, PhySimState state, const Eigen::VectorXd& actions);

/// Kinetic plus spring potential energy under a fixed adjacency.
double physim_energy(const PhySimConfig& cfg, const Eigen::VectorXd& positions, const Eigen::VectorXd& velocities,
                     const Eigen::MatrixXi& adjacency);

// ---------------------------------------------------------------------------
// Driving: a leader alternating between accelerating to a speed bound and
// braking to a stop, followed by a PD-controlled follower.
// State = (leader position, follower position, leader speed, follower speed),
// action = (leader acceleration, follower acceleration).

struct DrivingConfig {
  double speed_bound = 15.0;   // m/s
  double leader_accel = 2.0;   // m/s^2
  double target_gap = 8.0;     // m, standstill gap
  double time_headway = 1.0;   // s, desired gap grows by headway * follower speed
  double kp = 0.2;             // 1/s^2
  double kd = 0.6;             // 1/s
  double accel_clip = 3.0;     // m/s^2
  double dt = 0.1;             // s
  int episode_length = 100;
  double noise_sd = 0.1;       // m/s^2, added to both accelerations
  Eigen::Vector2d agent_scale = Eigen::Vector2d::Ones();

  void validate() const;
};

enum class LeaderPhase { accelerate, decelerate };

struct DrivingDecision {
  Eigen::Vector2d accelerations;
  LeaderPhase next_phase;
};

/// Noise-free expert. Throws InvalidScenario when the follower is ahead.
DrivingDecision driving_expert_action(const DrivingConfig& cfg, const Eigen::VectorXd& state, LeaderPhase phase);

/// Semi-implicit Euler; speeds are kept nonnegative.
Eigen::VectorXd driving_step(const DrivingConfig& cfg, const Eigen::VectorXd& state, const Eigen::VectorXd& actions);

// ---------------------------------------------------------------------------

using EnvConfig = std::variant<PhySimConfig, DrivingConfig>;

std::string env_tag(const EnvConfig& env);

/// M trajectories of length T. Trajectory j uses the stream derive_seed(seed, j + stream_offset).
/// Normalization is fitted on the generated data.
Dataset generate_dataset(const EnvConfig& env, int M, int T, std::uint64_t seed, std::uint64_t stream_offset = 0);

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Independent trajectory streams per split; every split carries the
/// normalization fitted on the training split only.
DatasetSplits generate_splits(const EnvConfig& env, int m_train, int m_val, int m_test, int T, std::uint64_t seed);

/// Stepping interface used by rollouts. States and actions are raw units.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Eigen::VectorXd observe() const = 0;
  virtual void step(const Eigen::VectorXd& action) = 0;
};

class PhySimEnvironment final : public Environment {
 public:
  /// Starts at rest at `positions`.
  PhySimEnvironment(PhySimConfig cfg, const Eigen::VectorXd& positions);
  Eigen::VectorXd observe() const override { return state_.positions; }
  void step(const Eigen::VectorXd& action) override;

 private:
  PhySimConfig cfg_;
  PhySimState state_;
};

class DrivingEnvironment final : public Environment {
 public:
  DrivingEnvironment(DrivingConfig cfg, const Eigen::VectorXd& state);
  Eigen::VectorXd observe() const override { return state_; }
  void step(const Eigen::VectorXd& action) override;

 private:
  DrivingConfig cfg_;
  Eigen::VectorXd state_;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& env, const Eigen::VectorXd& initial_state);

}  // namespace cmil
