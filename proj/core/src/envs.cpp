#include "cmil/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cmil/errors.hpp"

namespace cmil {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Elastic reflection of one coordinate into [-hw, hw].
void reflect(double& x, double& v, double hw) {
  while (x > hw || x < -hw) {
    x = x > hw ? 2.0 * hw - x : -2.0 * hw - x;
    v = -v;
  }
}

std::vector<int> physim_agent_map(int n) {
  std::vector<int> m;
  for (int i = 0; i < n; ++i) {
    m.push_back(i);
    m.push_back(i);
  }
  return m;
}

constexpr int kPilotTrajectories = 20;
constexpr int kPilotSteps = 100;

Trajectory physim_trajectory(const PhySimConfig& cfg, int T, Rng& rng) {
  const int dim = 2 * cfg.n_particles;
  PhySimState st;
  st.positions.resize(dim);
  for (int i = 0; i < dim; ++i) st.positions[i] = cfg.half_width * (2.0 * uniform01(rng) - 1.0);
  st.velocities = Eigen::VectorXd::Zero(dim);
  std::optional<int> choice;
  if (!cfg.resample_each_step) choice = uniform01(rng) < 0.5 ? 0 : 1;
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd a = physim_expert_action(cfg, st.positions, rng, choice);
    traj.steps.push_back({st.positions, a});
    st = physim_step(cfg, std::move(st), a);
  }
  return traj;
}

Trajectory driving_trajectory(const DrivingConfig& cfg, int T, Rng& rng) {
  Eigen::VectorXd s(4);
  const double v_leader = cfg.speed_bound * uniform01(rng);
  s << cfg.target_gap + cfg.time_headway * v_leader + 10.0 * uniform01(rng), 0.0, v_leader,
      v_leader * (0.5 + 0.5 * uniform01(rng));
  LeaderPhase phase = uniform01(rng) < 0.5 ? LeaderPhase::accelerate : LeaderPhase::decelerate;
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const DrivingDecision dec = driving_expert_action(cfg, s, phase);
    Eigen::VectorXd a(2);
    for (int i = 0; i < 2; ++i) a[i] = cfg.agent_scale[i] * dec.accelerations[i] + cfg.noise_sd * standard_normal(rng);
    traj.steps.push_back({s, a});
    s = driving_step(cfg, s, a);
    phase = dec.next_phase;
  }
  return traj;
}

}  // namespace

void PhySimConfig::validate() const {
  const int n = n_particles;
  if (n < 2) throw ConfigError("physim: at least 2 particles required");
  if (!(dt > 0.0) || !(half_width > 0.0) || !(spring_constant >= 0.0) || !(noise_sd >= 0.0) ||
      !(action_unit > 0.0)) {
    throw ConfigError("physim: dt, box half-width and action unit must be positive, k and noise nonnegative");
  }
  if (adjacency_a.rows() != n || adjacency_a.cols() != n || adjacency_b.rows() != n || adjacency_b.cols() != n) {
    throw ConfigError("physim: adjacency matrices must be N x N");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int a = adjacency_a(i, j);
      const int b = adjacency_b(i, j);
      if ((a != 0 && a != 1) || (b != 0 && b != 1)) throw ConfigError("physim: adjacency entries must be 0 or 1");
      if (a != adjacency_a(j, i) || b != adjacency_b(j, i)) throw ConfigError("physim: adjacency must be symmetric");
      if (a + b + (i == j ? 1 : 0) != 1) throw ConfigError("physim: A1 + A2 + I must be the all-ones matrix");
    }
  }
  if (agent_scale.size() != 0 && agent_scale.size() != n) throw ConfigError("physim: agent_scale must have N entries");
}

PhySimConfig physim_config(std::uint64_t seed, int n_particles) {
  if (n_particles < 2) throw ConfigError("physim: at least 2 particles required");
  PhySimConfig cfg;
  cfg.n_particles = n_particles;
  cfg.adjacency_a = Eigen::MatrixXi::Zero(n_particles, n_particles);
  Rng rng(derive_seed(seed, 0xA11CEULL));
  for (int i = 0; i < n_particles; ++i) {
    for (int j = i + 1; j < n_particles; ++j) {
      const int e = uniform01(rng) < 0.5 ? 1 : 0;
      cfg.adjacency_a(i, j) = e;
      cfg.adjacency_a(j, i) = e;
    }
  }
  cfg.adjacency_b = Eigen::MatrixXi::Ones(n_particles, n_particles) - Eigen::MatrixXi::Identity(n_particles, n_particles) -
                    cfg.adjacency_a;
  cfg.agent_scale = Eigen::VectorXd::Ones(n_particles);
  cfg.validate();

  // One normalized action unit is the mean half-range of noise-free accelerations
  // over a pilot run, so noise_sd means the same thing for any k, N or box size.
  PhySimConfig pilot = cfg;
  pilot.noise_sd = 0.0;
  Rng pilot_rng(derive_seed(seed, 0x9170ULL));
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2 * n_particles, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (int j = 0; j < kPilotTrajectories; ++j) {
    for (const auto& step : physim_trajectory(pilot, kPilotSteps, pilot_rng).steps) {
      lo = lo.cwiseMin(step.action);
      hi = hi.cwiseMax(step.action);
    }
  }
  const double unit = 0.5 * (hi - lo).mean();
  if (unit > 0.0) cfg.action_unit = unit;
  return cfg;
}

Eigen::VectorXd physim_spring_acceleration(const PhySimConfig& cfg, const Eigen::VectorXd& positions,
                                           const Eigen::MatrixXi& adjacency) {
  const int n = cfg.n_particles;
  if (positions.size() != 2 * n) throw ShapeError("physim: positions must have 2N entries");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || adjacency(i, j) == 0) continue;
      acc[2 * i] -= cfg.spring_constant * (positions[2 * i] - positions[2 * j]);
      acc[2 * i + 1] -= cfg.spring_constant * (positions[2 * i + 1] - positions[2 * j + 1]);
    }
    const double scale = cfg.agent_scale.size() == n ? cfg.agent_scale[i] : 1.0;
    acc[2 * i] *= scale;
    acc[2 * i + 1] *= scale;
  }
  return acc;
}

Eigen::VectorXd physim_expert_action(const PhySimConfig& cfg, const Eigen::VectorXd& positions, Rng& rng,
                                     std::optional<int> fixed_choice) {
  const int choice = fixed_choice ? *fixed_choice : (uniform01(rng) < 0.5 ? 0 : 1);
  Eigen::VectorXd acc = physim_spring_acceleration(cfg, positions, choice == 0 ? cfg.adjacency_a : cfg.adjacency_b);
  const double sd = cfg.noise_sd * cfg.action_unit;
  for (Eigen::Index i = 0; i < acc.size(); ++i) acc[i] += sd * standard_normal(rng);
  return acc;
}

PhySimState physim_step(const PhySimConfig& cfg, PhySimState st, const Eigen::VectorXd& actions) {
  if (actions.size() != st.positions.size() || st.velocities.size() != st.positions.size()) {
    throw ShapeError("physim_step: dimension mismatch");
  }
  st.velocities += cfg.dt * actions;
  st.positions += cfg.dt * st.velocities;
  for (Eigen::Index i = 0; i < st.positions.size(); ++i) reflect(st.positions[i], st.velocities[i], cfg.half_width);
  return st;
}

double physim_energy(const PhySimConfig& cfg, const Eigen::VectorXd& positions, const Eigen::VectorXd& velocities,
                     const Eigen::MatrixXi& adjacency) {
  double e = 0.5 * velocities.squaredNorm();
  const int n = cfg.n_particles;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (adjacency(i, j) == 0) continue;
      const double dx = positions[2 * i] - positions[2 * j];
      const double dy = positions[2 * i + 1] - positions[2 * j + 1];
      e += 0.5 * cfg.spring_constant * (dx * dx + dy * dy);
    }
  }
  return e;
}

void DrivingConfig::validate() const {
  if (!(speed_bound > 0.0) || !(leader_accel > 0.0) || !(target_gap > 0.0) || !(kp > 0.0) || !(kd > 0.0) ||
      !(accel_clip > 0.0) || !(dt > 0.0) || episode_length < 1 || !(noise_sd >= 0.0) || !(time_headway >= 0.0)) {
    throw ConfigError("driving: bounds, gains, dt and episode length must be positive");
  }
}

DrivingDecision driving_expert_action(const DrivingConfig& cfg, const Eigen::VectorXd& s, LeaderPhase phase) {
  if (s.size() != 4) throw ShapeError("driving: state must have 4 entries");
  const double gap = s[0] - s[1];
  if (gap < 0.0) throw InvalidScenario("driving: follower is ahead of the leader");
  DrivingDecision dec{};
  double leader = 0.0;
  if (phase == LeaderPhase::accelerate) {
    if (s[2] >= cfg.speed_bound) {
      dec.next_phase = LeaderPhase::decelerate;
      leader = -cfg.leader_accel;
    } else {
      dec.next_phase = LeaderPhase::accelerate;
      leader = cfg.leader_accel;
    }
  } else {
    if (s[2] <= 0.0) {
      dec.next_phase = LeaderPhase::accelerate;
      leader = cfg.leader_accel;
    } else {
      dec.next_phase = LeaderPhase::decelerate;
      leader = -cfg.leader_accel;
    }
  }
  const double desired = cfg.target_gap + cfg.time_headway * s[3];
  const double follower = std::clamp(cfg.kp * (gap - desired) + cfg.kd * (s[2] - s[3]), -cfg.accel_clip, cfg.accel_clip);
  dec.accelerations << leader, follower;
  return dec;
}

Eigen::VectorXd driving_step(const DrivingConfig& cfg, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  if (s.size() != 4 || a.size() != 2) throw ShapeError("driving_step: dimension mismatch");
  Eigen::VectorXd next(4);
  next[2] = std::max(0.0, s[2] + cfg.dt * a[0]);
  next[3] = std::max(0.0, s[3] + cfg.dt * a[1]);
  next[0] = s[0] + cfg.dt * next[2];
  next[1] = s[1] + cfg.dt * next[3];
  return next;
}

std::string env_tag(const EnvConfig& env) {
  return std::holds_alternative<PhySimConfig>(env) ? "physim" : "driving";
}

Dataset generate_dataset(const EnvConfig& env, int M, int T, std::uint64_t seed, std::uint64_t stream_offset) {
  if (M < 1 || T < 1) throw ConfigError("generate_dataset: M and T must be >= 1");
  Dataset ds;
  ds.meta.env = env_tag(env);
  ds.meta.horizon = T;
  ds.meta.seed = seed;
  std::visit(overloaded{
                 [&](const PhySimConfig& cfg) {
                   cfg.validate();
                   ds.meta.n_agents = cfg.n_particles;
                   ds.meta.state_dim = 2 * cfg.n_particles;
                   ds.meta.action_dim = 2 * cfg.n_particles;
                   ds.meta.agent_of_coord = physim_agent_map(cfg.n_particles);
                 },
                 [&](const DrivingConfig& cfg) {
                   cfg.validate();
                   ds.meta.n_agents = 2;
                   ds.meta.state_dim = 4;
                   ds.meta.action_dim = 2;
                   ds.meta.agent_of_coord = {0, 1};
                 },
             },
             env);
  ds.trajectories.resize(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) {
    Rng rng(derive_seed(seed, stream_offset + static_cast<std::uint64_t>(j)));
    ds.trajectories[static_cast<std::size_t>(j)] =
        std::visit(overloaded{
                       [&](const PhySimConfig& cfg) { return physim_trajectory(cfg, T, rng); },
                       [&](const DrivingConfig& cfg) { return driving_trajectory(cfg, T, rng); },
                   },
                   env);
  }
  ds.meta.normalization = fit_normalization(ds);
  ds.validate();
  return ds;
}

DatasetSplits generate_splits(const EnvConfig& env, int m_train, int m_val, int m_test, int T, std::uint64_t seed) {
  DatasetSplits out;
  out.train = generate_dataset(env, m_train, T, seed, 0);
  out.validation = generate_dataset(env, m_val, T, seed, static_cast<std::uint64_t>(m_train));
  out.test = generate_dataset(env, m_test, T, seed, static_cast<std::uint64_t>(m_train + m_val));
  out.train.meta.split = "train";
  out.validation.meta.split = "validation";
  out.test.meta.split = "test";
  out.validation.meta.normalization = out.train.meta.normalization;
  out.test.meta.normalization = out.train.meta.normalization;
  return out;
}

PhySimEnvironment::PhySimEnvironment(PhySimConfig cfg, const Eigen::VectorXd& positions) : cfg_(std::move(cfg)) {
  if (positions.size() != 2 * cfg_.n_particles) throw ShapeError("physim environment: bad initial state");
  state_.positions = positions;
  state_.velocities = Eigen::VectorXd::Zero(positions.size());
}

void PhySimEnvironment::step(const Eigen::VectorXd& action) { state_ = physim_step(cfg_, std::move(state_), action); }

DrivingEnvironment::DrivingEnvironment(DrivingConfig cfg, const Eigen::VectorXd& state)
    : cfg_(std::move(cfg)), state_(state) {
  if (state_.size() != 4) throw ShapeError("driving environment: bad initial state");
}

void DrivingEnvironment::step(const Eigen::VectorXd& action) { state_ = driving_step(cfg_, state_, action); }

std::unique_ptr<Environment> make_environment(const EnvConfig& env, const Eigen::VectorXd& initial_state) {
  return std::visit(overloaded{
                        [&](const PhySimConfig& cfg) -> std::unique_ptr<Environment> {
                          return std::make_unique<PhySimEnvironment>(cfg, initial_state);
                        },
                        [&](const DrivingConfig& cfg) -> std::unique_ptr<Environment> {
                          return std::make_unique<DrivingEnvironment>(cfg, initial_state);
                        },
                    },
                    env);
}

}  // namespace cmil
