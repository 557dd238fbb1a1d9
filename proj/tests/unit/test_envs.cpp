#include <cmath>
#include <vector>

#include "doctest.h"
#include "cmil/envs.hpp"
#include "cmil/errors.hpp"
#include "cmil/random.hpp"

using namespace cmil;

namespace {

PhySimConfig two_particles(double k = 1.0) {
  PhySimConfig cfg;
  cfg.n_particles = 2;
  cfg.spring_constant = k;
  cfg.adjacency_a = Eigen::MatrixXi::Ones(2, 2) - Eigen::MatrixXi::Identity(2, 2);
  cfg.adjacency_b = Eigen::MatrixXi::Zero(2, 2);
  cfg.noise_sd = 0.0;
  cfg.agent_scale = Eigen::VectorXd::Ones(2);
  return cfg;
}

double sample_variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_SUITE("envs") {

TEST_CASE("adjacency matrices are complementary") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PhySimConfig cfg = physim_config(seed);
    const Eigen::MatrixXi sum = cfg.adjacency_a + cfg.adjacency_b + Eigen::MatrixXi::Identity(5, 5);
    CHECK(sum == Eigen::MatrixXi::Ones(5, 5));
    CHECK(cfg.adjacency_a == cfg.adjacency_a.transpose());
  }
  PhySimConfig bad = physim_config(1);
  bad.adjacency_b(0, 1) = 1 - bad.adjacency_b(0, 1);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = physim_config(1);
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(physim_config(3).adjacency_a == physim_config(3).adjacency_a);
}

TEST_CASE("default PhySim constants") {
  const PhySimConfig cfg = physim_config(0);
  CHECK(cfg.n_particles == 5);
  CHECK(cfg.spring_constant == 0.1);
  CHECK(cfg.dt == 0.1);
  CHECK(cfg.noise_sd == 0.05);
  CHECK(cfg.half_width == 0.5);
  CHECK(cfg.action_unit > 0.0);
}

TEST_CASE("Hooke's law examples") {
  const PhySimConfig cfg = two_particles();
  Rng rng(1);
  Eigen::VectorXd r(4);
  r << 0.0, 0.0, 0.3, 0.4;
  const Eigen::VectorXd a = physim_expert_action(cfg, r, rng, 0);
  CHECK(a[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(a[2] == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(a[3] == doctest::Approx(-0.4).epsilon(1e-15));

  r << 0.1, -0.2, 0.1, -0.2;
  CHECK(physim_expert_action(cfg, r, rng, 0) == Eigen::VectorXd::Zero(4));
  // The unconnected pattern exerts nothing.
  r << 0.0, 0.0, 0.3, 0.4;
  CHECK(physim_expert_action(cfg, r, rng, 1) == Eigen::VectorXd::Zero(4));
}

TEST_CASE("noise-free accelerations obey Newton's third law") {
  Rng rng(2);
  const PhySimConfig cfg = physim_config(7);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd r(10);
    for (Eigen::Index k = 0; k < r.size(); ++k) r[k] = 0.5 * (2.0 * uniform01(rng) - 1.0);
    for (const Eigen::MatrixXi* adj : {&cfg.adjacency_a, &cfg.adjacency_b}) {
      const Eigen::VectorXd a = physim_spring_acceleration(cfg, r, *adj);
      double sx = 0.0;
      double sy = 0.0;
      for (int p = 0; p < 5; ++p) {
        sx += a[2 * p];
        sy += a[2 * p + 1];
      }
      CHECK(std::abs(sx) < 1e-15);
      CHECK(std::abs(sy) < 1e-15);
    }
  }
}

TEST_CASE("expert noise has the configured spread") {
  PhySimConfig cfg = physim_config(3);
  Rng rng(3);
  const Eigen::VectorXd r = Eigen::VectorXd::Zero(10);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(physim_expert_action(cfg, r, rng)[3]);
  const double sd = std::sqrt(sample_variance(xs));
  CHECK(sd == doctest::Approx(cfg.noise_sd * cfg.action_unit).epsilon(0.03));
}

TEST_CASE("integrator examples") {
  const PhySimConfig cfg = two_particles();
  PhySimState st{Eigen::Vector4d(0.1, 0.2, -0.1, 0.0), Eigen::Vector4d::Zero()};
  const PhySimState rest = physim_step(cfg, st, Eigen::Vector4d::Zero());
  CHECK(rest.positions == st.positions);

  const Eigen::Vector4d a(0.5, -1.0, 2.0, 0.0);
  const PhySimState moved = physim_step(cfg, st, a);
  CHECK((moved.positions - st.positions - a * cfg.dt * cfg.dt).cwiseAbs().maxCoeff() < 1e-15);

  PhySimState out{Eigen::Vector4d(0.49, 0.0, 0.0, 0.0), Eigen::Vector4d(0.3, 0.0, 0.0, 0.0)};
  const PhySimState bounced = physim_step(cfg, out, Eigen::Vector4d::Zero());
  CHECK(bounced.positions[0] == doctest::Approx(0.48));
  CHECK(bounced.positions[0] <= cfg.half_width);
  CHECK(bounced.velocities[0] == -0.3);
  CHECK(std::abs(bounced.velocities[0]) == 0.3);
}

TEST_CASE("two-particle spring conserves energy over 500 steps") {
  PhySimConfig cfg = two_particles(0.1);
  const Eigen::MatrixXi& adj = cfg.adjacency_a;
  PhySimState st{Eigen::Vector4d(-0.2, 0.05, 0.2, -0.05), Eigen::Vector4d::Zero()};
  // Semi-implicit Euler stores velocities half a step out of phase with positions,
  // so energy is measured with the time-centred velocity.
  Eigen::VectorXd v_prev = st.velocities;
  const double e0 = physim_energy(cfg, st.positions, st.velocities, adj);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Eigen::VectorXd a = physim_spring_acceleration(cfg, st.positions, adj);
    const Eigen::VectorXd r = st.positions;
    v_prev = st.velocities;
    st = physim_step(cfg, st, a);
    if (t == 0) continue;
    const Eigen::VectorXd v_mid = 0.5 * (v_prev + st.velocities);
    worst = std::max(worst, std::abs(physim_energy(cfg, r, v_mid, adj) - e0) / e0);
  }
  CHECK(worst < 0.02);
}

TEST_CASE("driving expert examples") {
  DrivingConfig cfg;
  Eigen::VectorXd s(4);
  s << 50.0, 10.0, 15.0, 5.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).next_phase == LeaderPhase::decelerate);
  s << 50.0, 10.0, 0.0, 0.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::decelerate).next_phase == LeaderPhase::accelerate);
  s << 50.0, 10.0, 7.0, 7.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).accelerations[0] == cfg.leader_accel);
  CHECK(driving_expert_action(cfg, s, LeaderPhase::decelerate).accelerations[0] == -cfg.leader_accel);

  // At standstill the desired gap is the target gap.
  s << 8.0, 0.0, 0.0, 0.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).accelerations[1] == 0.0);
  s << 13.0, 0.0, 0.0, 0.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).accelerations[1] == doctest::Approx(1.0));
  // Moving at matched speed the equilibrium gap grows with the headway.
  s << 8.0 + cfg.time_headway * 10.0, 0.0, 10.0, 10.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).accelerations[1] == doctest::Approx(0.0));
  s << 200.0, 0.0, 0.0, 0.0;
  CHECK(driving_expert_action(cfg, s, LeaderPhase::accelerate).accelerations[1] == cfg.accel_clip);

  s << 0.0, 5.0, 0.0, 0.0;
  CHECK_THROWS_AS(driving_expert_action(cfg, s, LeaderPhase::accelerate), InvalidScenario);
  cfg.kp = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("dataset generation") {
  SUBCASE("shape accounting") {
    const Dataset ds = generate_dataset(physim_config(0), 3, 10, 0);
    CHECK(ds.count() == 3);
    for (const auto& t : ds.trajectories) CHECK(t.length() == 10);
    CHECK(ds.meta.state_dim == 10);
    CHECK(ds.meta.action_dim == 10);
    CHECK(ds.meta.n_agents == 5);
    const Dataset dr = generate_dataset(DrivingConfig{}, 2, 7, 0);
    CHECK(dr.meta.state_dim == 4);
    CHECK(dr.meta.action_dim == 2);
    CHECK_THROWS_AS(generate_dataset(DrivingConfig{}, 0, 7, 0), ConfigError);
  }
  SUBCASE("determinism and stream independence") {
    const Dataset a = generate_dataset(physim_config(4), 5, 20, 4);
    const Dataset b = generate_dataset(physim_config(4), 5, 20, 4);
    CHECK(render_records(a) == render_records(b));
    CHECK(render_metadata(a) == render_metadata(b));
    const Dataset c = generate_dataset(physim_config(4), 5, 20, 5);
    CHECK(render_records(a) != render_records(c));
    // Trajectory j only depends on its own stream.
    const Dataset more = generate_dataset(physim_config(4), 8, 20, 4);
    CHECK(more.trajectories[4].steps[19].action == a.trajectories[4].steps[19].action);
  }
  SUBCASE("PhySim trajectories stay in the box and driving cars keep order") {
    const Dataset ds = generate_dataset(physim_config(6), 20, 100, 6);
    for (const auto& t : ds.trajectories) {
      for (const auto& st : t.steps) CHECK(st.state.cwiseAbs().maxCoeff() <= 0.5);
    }
    const Dataset dr = generate_dataset(DrivingConfig{}, 20, 100, 6);
    for (const auto& t : dr.trajectories) {
      for (const auto& st : t.steps) {
        CHECK(st.state[0] > st.state[1]);
        CHECK(st.state[2] >= 0.0);
        CHECK(st.state[3] >= 0.0);
      }
    }
  }
}

TEST_CASE("regenerated PhySim data with agent 0 doubled has four times its action variance") {
  PhySimConfig cfg = physim_config(8);
  cfg.noise_sd = 0.0;
  const Dataset base = generate_dataset(cfg, 200, 100, 8);
  cfg.agent_scale[0] = 2.0;
  const Dataset scaled = generate_dataset(cfg, 200, 100, 8);
  for (int d : {0, 1}) {
    std::vector<double> x0;
    std::vector<double> x1;
    for (std::size_t j = 0; j < base.count(); ++j) {
      for (std::size_t t = 0; t < 100; ++t) {
        x0.push_back(base.trajectories[j].steps[t].action[d]);
        x1.push_back(scaled.trajectories[j].steps[t].action[d]);
      }
    }
    CHECK(sample_variance(x1) / sample_variance(x0) == doctest::Approx(4.0).epsilon(0.10));
  }
}

TEST_CASE("environments step like the simulators") {
  const PhySimConfig cfg = physim_config(2);
  Eigen::VectorXd r = Eigen::VectorXd::Constant(10, 0.1);
  auto env = make_environment(cfg, r);
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
  env->step(a);
  env->step(a);
  PhySimState st{r, Eigen::VectorXd::Zero(10)};
  st = physim_step(cfg, physim_step(cfg, st, a), a);
  CHECK(env->observe() == st.positions);
  CHECK_THROWS_AS(make_environment(cfg, Eigen::VectorXd::Zero(3)), ShapeError);

  Eigen::VectorXd s(4);
  s << 20.0, 0.0, 5.0, 5.0;
  auto drive = make_environment(DrivingConfig{}, s);
  drive->step(Eigen::Vector2d(1.0, -1.0));
  CHECK(drive->observe() == driving_step(DrivingConfig{}, s, Eigen::Vector2d(1.0, -1.0)));
}

}  // TEST_SUITE
