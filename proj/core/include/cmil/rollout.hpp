#pragma once

#include <Eigen/Dense>

#include "cmil/dataset.hpp"
#include "cmil/envs.hpp"
#include "cmil/policy.hpp"
#include "cmil/random.hpp"

namespace cmil {

/// Generates l = 0..L: observe s[l], predict a[l], then step the environment
/// (the last action is recorded but not executed). Returns L + 1 raw-unit steps.
Trajectory rollout(const CopulaPolicy& p, Environment& env, int L, int n_samples, Rng& rng);

Trajectory rollout(const CopulaPolicy& p, const EnvConfig& env, const Eigen::VectorXd& s0, int L, int n_samples,
                   Rng& rng);

/// Wraps rollouts as a dataset carrying the policy's normalization.
Dataset rollout_dataset(const CopulaPolicy& p, const EnvConfig& env, const std::vector<Eigen::VectorXd>& starts, int L,
                        int n_samples, std::uint64_t seed);

}  // namespace cmil
