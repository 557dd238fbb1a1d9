#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cmil/mixture.hpp"
#include "cmil/nn.hpp"
#include "cmil/random.hpp"

namespace cmil {

/// A point of the unit hypercube with every coordinate in [eps, 1 - eps].
class CopulaPoint {
 public:
  /// Throws DomainError when a coordinate lies outside [eps, 1 - eps].
  explicit CopulaPoint(Eigen::VectorXd u);
  /// Clamps into [eps, 1 - eps]; throws DomainError for values outside [0, 1].
  static CopulaPoint clamped(Eigen::VectorXd u);

  const Eigen::VectorXd& values() const { return u_; }
  Eigen::Index dim() const { return u_.size(); }
  double operator[](Eigen::Index i) const { return u_[i]; }

 private:
  Eigen::VectorXd u_;
};

/// c(u) = 1: the agents act independently given the state.
struct IndependenceCopula {
  int dim = 0;
};

/// State-independent nonparametric copula: product Gaussian kernels with
/// reflection at the faces of the cube.
struct KdeCopula {
  Eigen::MatrixXd support;    // D x n, one stored point per column
  Eigen::VectorXd bandwidth;  // per coordinate, cube units

  int dim() const { return static_cast<int>(support.rows()); }
  Eigen::Index size() const { return support.cols(); }
};

/// State-dependent copula. A network maps the state to a G-component diagonal
/// Gaussian mixture g(z|s) over z_d = PhiInv(u_d); the cube density is
/// g(z|s) / prod_d phi(z_d). Output layout: [0,G) weight logits,
/// G + g*D + d means, G + G*D + g*D + d log-spreads.
struct GaussianMixtureCopula {
  MlpParams net;
  int components = 0;  // G
  int dim = 0;         // D
};

/// Analytic Gaussian copula with a fixed correlation matrix.
class GaussianCopula {
 public:
  explicit GaussianCopula(Eigen::MatrixXd correlation);

  int dim() const { return static_cast<int>(correlation_.rows()); }
  const Eigen::MatrixXd& correlation() const { return correlation_; }
  const Eigen::MatrixXd& cholesky() const { return lower_; }
  const Eigen::MatrixXd& precision_minus_identity() const { return precision_minus_identity_; }
  double log_det() const { return log_det_; }

 private:
  Eigen::MatrixXd correlation_;
  Eigen::MatrixXd lower_;
  Eigen::MatrixXd precision_minus_identity_;
  double log_det_ = 0.0;
};

using Copula = std::variant<IndependenceCopula, KdeCopula, GaussianMixtureCopula, GaussianCopula>;

int copula_dim(const Copula& c);
bool is_state_dependent(const Copula& c);
/// "uniform", "kde", "gmm" or "gaussian".
std::string copula_kind(const Copula& c);

/// log c(u) or log c(u|s). `state` is required exactly for state-dependent copulas.
double copula_logdensity(const Copula& c, const CopulaPoint& u, const Eigen::VectorXd* state = nullptr);

CopulaPoint copula_sample(const Copula& c, Rng& rng, const Eigen::VectorXd* state = nullptr);

/// `n` draws as columns of a D x n matrix; state-dependent parameters are computed once.
Eigen::MatrixXd copula_sample_n(const Copula& c, int n, Rng& rng, const Eigen::VectorXd* state = nullptr);

struct KdeOptions {
  std::optional<Eigen::VectorXd> bandwidth;  // overrides Scott's rule
  Eigen::Index max_support = 20000;
  std::uint64_t seed = 0;
};

inline constexpr double kBandwidthFloor = 1e-3;

/// Stores the points (uniformly subsampled beyond `max_support`) and sets
/// h_d = n^(-1/(D+4)) * sd_d, floored at kBandwidthFloor.
KdeCopula kde_fit(const Eigen::MatrixXd& points, const KdeOptions& options = {});
KdeCopula kde_fit(const std::vector<CopulaPoint>& points, const KdeOptions& options = {});

/// Mixture parameters of a GaussianMixtureCopula at one state.
struct GmcState {
  Eigen::VectorXd weights;  // G
  Eigen::MatrixXd means;    // D x G
  Eigen::MatrixXd sds;      // D x G
};

GaussianMixtureCopula gmc_init(int state_dim, int dim, int components, int hidden, std::uint64_t seed);
GmcState gmc_state(const GaussianMixtureCopula& c, const Eigen::VectorXd& s);

struct GmcGradients {
  MlpGradients net;
};

/// Summed copula NLL (-log c(u|s)) over columns; `z` holds PhiInv(u).
double gmc_nll(const GaussianMixtureCopula& c, const Eigen::MatrixXd& states, const Eigen::MatrixXd& z,
               GmcGradients* grad = nullptr);

struct CopulaTrainConfig {
  int max_epochs = 100;
  int batch_size = 128;
  double learning_rate = 0.01;
  double l2 = 1e-5;
  double tolerance = 1e-4;
  int patience = 5;
  /// Each stall multiplies the step size by lr_decay, at most max_lr_cuts times.
  double lr_decay = 0.5;
  int max_lr_cuts = 6;
  std::uint64_t seed = 0;
};

struct CopulaFit {
  GaussianMixtureCopula copula;
  std::vector<double> train_nll;  // entry 0 is the untrained copula
  std::vector<double> val_nll;
  int epochs_run = 0;
  bool converged = false;
};

/// `u` columns are copula points paired with the state columns.
CopulaFit gmc_train(GaussianMixtureCopula c, const Eigen::MatrixXd& states, const Eigen::MatrixXd& u,
                    const CopulaTrainConfig& cfg, const Eigen::MatrixXd* val_states = nullptr,
                    const Eigen::MatrixXd* val_u = nullptr);

/// Normal-scores correlation estimate.
GaussianCopula fit_gaussian_copula(const Eigen::MatrixXd& points);

/// Two-dimensional copula of coordinates (a, b). KDE is refit on the selected
/// coordinates; mixture copulas are marginalized analytically at `state`.
Copula pair_copula(const Copula& c, int a, int b, const Eigen::VectorXd* state = nullptr);

std::string serialize_copula(const Copula& c);
Copula parse_copula(std::string_view kind, std::string_view bytes);

}  // namespace cmil
