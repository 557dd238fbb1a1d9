#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cmil/copula.hpp"
#include "cmil/dataset.hpp"
#include "cmil/marginal.hpp"

namespace cmil {

/// Joint policy pi(a|s) = prod_d f_d(a_d|s) * c(F_1(a_1|s), ..., F_D(a_D|s) | s).
/// States and actions are in the normalized units of `marginals.normalization`.
struct CopulaPolicy {
  MarginalModel marginals;
  Copula copula;

  int coords() const { return marginals.coords; }
  const Normalization& normalization() const { return marginals.normalization; }
  void validate() const;
};

double joint_log_likelihood(const CopulaPolicy& p, const Eigen::VectorXd& s, const Eigen::VectorXd& a);

/// a_d = F_d^{-1}(u_d | s).
Eigen::VectorXd transform_to_actions(const CopulaPolicy& p, const Eigen::VectorXd& s, const CopulaPoint& u);

/// Mean of `n_samples` joint actions obtained by sampling the copula and
/// inverting the marginals; n_samples = 1 is a single draw.
Eigen::VectorXd predict_action(const CopulaPolicy& p, const Eigen::VectorXd& s, int n_samples, Rng& rng);

enum class CopulaKind { uniform, kde, gmm };

CopulaKind parse_copula_kind(std::string_view name);
std::string to_string(CopulaKind kind);

struct PolicyTrainConfig {
  CopulaKind copula = CopulaKind::kde;
  int components = 2;       // K
  int hidden = 64;
  MarginalTrainConfig marginal;
  int copula_components = 4;  // G
  int copula_hidden = 64;
  CopulaTrainConfig copula_train;
  KdeOptions kde;
  std::uint64_t seed = 0;
};

struct TrainingLog {
  TrainingCurve marginal;
  std::string copula_kind;
  bool copula_stage_skipped = false;
  std::vector<double> copula_train_nll;
  std::vector<double> copula_val_nll;
  int copula_epochs = 0;

  /// One line per epoch and stage, suitable for appending to a log file.
  std::string render() const;
};

struct TrainedPolicy {
  CopulaPolicy policy;
  TrainingLog log;
};

/// Stage 1 fits the marginals; stage 2 freezes them, maps the training data
/// through pit and fits the selected copula. Seeds of both stages derive from
/// cfg.seed (the per-stage seed fields in cfg are ignored).
TrainedPolicy train_policy(const Dataset& train, const PolicyTrainConfig& cfg, const Dataset* validation = nullptr);

/// Marginals (and their normalization) from `marginal_source`, copula from `copula_source`.
CopulaPolicy compose_policy(const CopulaPolicy& marginal_source, const CopulaPolicy& copula_source);

std::string serialize_policy(const CopulaPolicy& p);
CopulaPolicy parse_policy(std::string_view bytes);
void save_policy(const CopulaPolicy& p, const std::string& path);
CopulaPolicy load_policy(const std::string& path);

}  // namespace cmil
