#include "cmil/rollout.hpp"

#include <algorithm>

#include "cmil/errors.hpp"

namespace cmil {

Trajectory rollout(const CopulaPolicy& p, Environment& env, int L, int n_samples, Rng& rng) {
  if (L < 0) throw DomainError("rollout: L must be >= 0");
  p.validate();
  const Normalization& norm = p.normalization();
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(L) + 1);
  for (int l = 0; l <= L; ++l) {
    Eigen::VectorXd s = env.observe();
    if (s.size() != p.marginals.state_dim()) throw ShapeError("rollout: environment state size differs from policy");
    if (!s.allFinite()) throw RolloutDiverged(l, "non-finite state");
    Eigen::VectorXd a = norm.denormalize_action(predict_action(p, norm.normalize_state(s), n_samples, rng));
    if (!a.allFinite()) throw RolloutDiverged(l, "non-finite action");
    traj.steps.push_back({s, a});
    if (l < L) env.step(a);
  }
  return traj;
}

Trajectory rollout(const CopulaPolicy& p, const EnvConfig& env, const Eigen::VectorXd& s0, int L, int n_samples,
                   Rng& rng) {
  auto e = make_environment(env, s0);
  return rollout(p, *e, L, n_samples, rng);
}

Dataset rollout_dataset(const CopulaPolicy& p, const EnvConfig& env, const std::vector<Eigen::VectorXd>& starts, int L,
                        int n_samples, std::uint64_t seed) {
  Dataset ds;
  ds.meta.env = env_tag(env);
  ds.meta.split = "rollout";
  ds.meta.state_dim = p.marginals.state_dim();
  ds.meta.action_dim = p.coords();
  ds.meta.agent_of_coord = p.marginals.agent_of_coord;
  int agents = 0;
  for (int g : ds.meta.agent_of_coord) agents = std::max(agents, g + 1);
  ds.meta.n_agents = agents;
  ds.meta.horizon = L + 1;
  ds.meta.seed = seed;
  ds.meta.normalization = p.normalization();
  for (std::size_t j = 0; j < starts.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    ds.trajectories.push_back(rollout(p, env, starts[j], L, n_samples, rng));
  }
  return ds;
}

}  // namespace cmil
