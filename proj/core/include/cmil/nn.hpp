#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace cmil {

/// One-hidden-layer perceptron: output = W2 * tanh(W1 * x + b1) + b2.
struct MlpLayout {
  int input = 0;
  int hidden = 0;
  int output = 0;

  bool operator==(const MlpLayout&) const = default;
};

struct MlpParams {
  MlpLayout layout;
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // output x hidden
  Eigen::VectorXd b2;  // output
};

/// d(loss)/d(parameter), laid out exactly like MlpParams.
struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static MlpGradients zeros(const MlpLayout& layout);
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double s);
  bool all_finite() const;
};

/// Hidden activations and outputs of a batched forward pass (one column per sample).
struct MlpActivations {
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd output;
};

/// Throws ShapeError on inconsistent shapes, DomainError on non-finite values.
void validate(const MlpParams& params);

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);

/// Gradient of dot(output, grad_out) with respect to every parameter.
MlpGradients mlp_backward(const MlpParams& params, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& grad_out);

MlpActivations mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& x);

/// Sum over columns of the per-sample gradients of dot(output_j, grad_out_j).
MlpGradients mlp_backward_batch(const MlpParams& params, const Eigen::MatrixXd& x,
                                const MlpActivations& acts, const Eigen::MatrixXd& grad_out);

/// p <- p - lr * (g + l2 * p); biases are exempt from the L2 term.
MlpParams sgd_step(MlpParams params, const MlpGradients& grads, double lr, double l2);

std::string serialize_mlp(const MlpParams& params);
MlpParams parse_mlp(std::string_view text);

}  // namespace cmil
