#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cmil/dataset.hpp"
#include "cmil/mixture.hpp"
#include "cmil/nn.hpp"

namespace cmil {

/// State-conditioned marginal policies for all D action coordinates.
///
/// A shared network maps the (normalized) state to K component means per
/// coordinate; output index d*K + k holds the mean of component k of
/// coordinate d. Each coordinate has one free log-spread shared by its
/// components, and the component weights are fixed at 1/K.
struct MarginalModel {
  MlpParams net;
  Eigen::VectorXd log_spread;
  int components = 0;  // K
  int coords = 0;      // D
  std::vector<int> agent_of_coord;
  Normalization normalization;

  int state_dim() const { return net.layout.input; }
  double spread(int d) const;
  void validate() const;
};

MarginalModel marginal_init(int state_dim, int coords, std::vector<int> agent_of_coord, int components,
                            int hidden, std::uint64_t seed);

std::vector<GaussianMixture1D> marginal_forward(const MarginalModel& model, const Eigen::VectorXd& s);

/// Sum over coordinates of the marginal log-densities.
double marginal_log_likelihood(const MarginalModel& model, const Eigen::VectorXd& s, const Eigen::VectorXd& a);

/// Probability integral transform of a joint action, clamped to [eps, 1-eps].
Eigen::VectorXd pit(const MarginalModel& model, const Eigen::VectorXd& s, const Eigen::VectorXd& a);
Eigen::VectorXd pit(const std::vector<GaussianMixture1D>& marginals, const Eigen::VectorXd& a);

/// Column-wise pit over a batch (one network pass for all columns).
Eigen::MatrixXd pit_batch(const MarginalModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions);

struct MarginalGradients {
  MlpGradients net;
  Eigen::VectorXd log_spread;
};

/// Summed negative log-likelihood of the columns of (states, actions). When
/// `grad` is non-null it receives the gradient of that sum.
double marginal_nll(const MarginalModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                    MarginalGradients* grad = nullptr);

struct MarginalTrainConfig {
  int max_epochs = 200;
  int batch_size = 128;
  double learning_rate = 0.01;
  double l2 = 1e-5;
  /// A stall is a window of `patience` epochs in which the best training NLL
  /// improved by less than this relative amount.
  double tolerance = 1e-4;
  int patience = 5;
  /// Each stall multiplies the step size by lr_decay, at most max_lr_cuts times.
  double lr_decay = 0.5;
  int max_lr_cuts = 6;
  std::uint64_t seed = 0;
};

struct TrainingCurve {
  std::vector<double> train_nll;  // entry 0 is the untrained model
  std::vector<double> val_nll;    // empty without a validation set
  int epochs_run = 0;
  int best_epoch = 0;
  bool converged = false;
};

struct MarginalFit {
  MarginalModel model;
  TrainingCurve curve;
};

/// Minibatch SGD on the mean NLL. With a validation set the parameters of the
/// epoch with the lowest validation NLL are returned.
MarginalFit marginal_train(MarginalModel model, const SampleSet& train, const MarginalTrainConfig& cfg,
                           const SampleSet* validation = nullptr);

std::string serialize_marginal(const MarginalModel& model);
MarginalModel parse_marginal(std::string_view text);

}  // namespace cmil
