#include "cmil/nn.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "cmil/errors.hpp"
#include "cmil/random.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

void check_layout(const MlpLayout& layout) {
  if (layout.input < 1 || layout.hidden < 1 || layout.output < 1) {
    throw ConfigError("mlp layout sizes must be >= 1, got (" + std::to_string(layout.input) + "," +
                      std::to_string(layout.hidden) + "," + std::to_string(layout.output) + ")");
  }
}

template <typename M>
std::string row_major(const M& m) {
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return text::join_doubles(values);
}

Eigen::MatrixXd read_matrix(std::string_view line, std::string_view tag, int rows, int cols) {
  const auto sp = line.find(' ');
  if (line.substr(0, sp) != tag) {
    throw IoError("mlp record: expected '" + std::string(tag) + "' line");
  }
  const auto values = text::split_doubles(sp == std::string_view::npos ? "" : line.substr(sp + 1));
  if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw IoError("mlp record: wrong value count on '" + std::string(tag) + "' line");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = values[k++];
  }
  return m;
}

}  // namespace

MlpGradients MlpGradients::zeros(const MlpLayout& layout) {
  MlpGradients g;
  g.w1 = Eigen::MatrixXd::Zero(layout.hidden, layout.input);
  g.b1 = Eigen::VectorXd::Zero(layout.hidden);
  g.w2 = Eigen::MatrixXd::Zero(layout.output, layout.hidden);
  g.b2 = Eigen::VectorXd::Zero(layout.output);
  return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
  return *this;
}

MlpGradients& MlpGradients::operator*=(double s) {
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  return *this;
}

bool MlpGradients::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

void validate(const MlpParams& p) {
  check_layout(p.layout);
  const auto& l = p.layout;
  if (p.w1.rows() != l.hidden || p.w1.cols() != l.input || p.b1.size() != l.hidden ||
      p.w2.rows() != l.output || p.w2.cols() != l.hidden || p.b2.size() != l.output) {
    throw ShapeError("mlp parameter shapes inconsistent with layout");
  }
  if (!(p.w1.allFinite() && p.b1.allFinite() && p.w2.allFinite() && p.b2.allFinite())) {
    throw DomainError("mlp parameters contain non-finite values");
  }
}

MlpParams mlp_init(const MlpLayout& layout, std::uint64_t seed) {
  check_layout(layout);
  Rng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    }
  };
  MlpParams p;
  p.layout = layout;
  p.w1.resize(layout.hidden, layout.input);
  p.w2.resize(layout.output, layout.hidden);
  fill(p.w1, layout.input);
  fill(p.w2, layout.hidden);
  p.b1 = Eigen::VectorXd::Zero(layout.hidden);
  p.b2 = Eigen::VectorXd::Zero(layout.output);
  return p;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  if (x.size() != p.layout.input) {
    throw ShapeError("mlp_forward: input size " + std::to_string(x.size()) + " != " +
                     std::to_string(p.layout.input));
  }
  const Eigen::VectorXd h = (p.w1 * x + p.b1).array().tanh().matrix();
  return p.w2 * h + p.b2;
}

MlpGradients mlp_backward(const MlpParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out) {
  if (x.size() != p.layout.input || grad_out.size() != p.layout.output) {
    throw ShapeError("mlp_backward: input or gradient size mismatch");
  }
  const Eigen::VectorXd h = (p.w1 * x + p.b1).array().tanh().matrix();
  MlpGradients g;
  g.w2 = grad_out * h.transpose();
  g.b2 = grad_out;
  const Eigen::VectorXd dpre = ((p.w2.transpose() * grad_out).array() * (1.0 - h.array().square())).matrix();
  g.w1 = dpre * x.transpose();
  g.b1 = dpre;
  return g;
}

MlpActivations mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& x) {
  if (x.rows() != p.layout.input) throw ShapeError("mlp_forward_batch: input rows mismatch");
  MlpActivations acts;
  acts.hidden = ((p.w1 * x).colwise() + p.b1).array().tanh().matrix();
  acts.output = (p.w2 * acts.hidden).colwise() + p.b2;
  return acts;
}

MlpGradients mlp_backward_batch(const MlpParams& p, const Eigen::MatrixXd& x, const MlpActivations& acts,
                                const Eigen::MatrixXd& grad_out) {
  if (x.rows() != p.layout.input || grad_out.rows() != p.layout.output || grad_out.cols() != x.cols() ||
      acts.hidden.cols() != x.cols()) {
    throw ShapeError("mlp_backward_batch: shape mismatch");
  }
  MlpGradients g;
  g.w2.noalias() = grad_out * acts.hidden.transpose();
  g.b2 = grad_out.rowwise().sum();
  const Eigen::MatrixXd dpre =
      ((p.w2.transpose() * grad_out).array() * (1.0 - acts.hidden.array().square())).matrix();
  g.w1.noalias() = dpre * x.transpose();
  g.b1 = dpre.rowwise().sum();
  return g;
}

MlpParams sgd_step(MlpParams p, const MlpGradients& g, double lr, double l2) {
  if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("sgd_step: l2 weight must be nonnegative");
  if (!g.all_finite()) throw TrainingDiverged("sgd", -1, "non-finite gradient");
  if (g.w1.rows() != p.w1.rows() || g.w1.cols() != p.w1.cols() || g.w2.rows() != p.w2.rows() ||
      g.w2.cols() != p.w2.cols() || g.b1.size() != p.b1.size() || g.b2.size() != p.b2.size()) {
    throw ShapeError("sgd_step: gradient shape mismatch");
  }
  p.w1 -= lr * (g.w1 + l2 * p.w1);
  p.w2 -= lr * (g.w2 + l2 * p.w2);
  p.b1 -= lr * g.b1;
  p.b2 -= lr * g.b2;
  return p;
}

std::string serialize_mlp(const MlpParams& p) {
  validate(p);
  std::string out = "cmil-mlp 1\n";
  out += "layout " + std::to_string(p.layout.input) + " " + std::to_string(p.layout.hidden) + " " +
         std::to_string(p.layout.output) + "\n";
  out += "activation tanh linear\n";
  out += "w1 " + row_major(p.w1) + "\n";
  out += "b1 " + row_major(p.b1) + "\n";
  out += "w2 " + row_major(p.w2) + "\n";
  out += "b2 " + row_major(p.b2) + "\n";
  return out;
}

MlpParams parse_mlp(std::string_view text_in) {
  std::vector<std::string_view> lines;
  for (auto line : text::split(text_in, '\n')) {
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  if (lines.size() != 7 || lines[0] != "cmil-mlp 1") throw IoError("not a cmil-mlp version 1 record");
  const auto lay = text::split(lines[1], ' ');
  if (lay.size() != 4 || lay[0] != "layout") throw IoError("mlp record: bad layout line");
  MlpParams p;
  p.layout = {static_cast<int>(text::parse_int(lay[1])), static_cast<int>(text::parse_int(lay[2])),
              static_cast<int>(text::parse_int(lay[3]))};
  check_layout(p.layout);
  if (lines[2] != "activation tanh linear") throw IoError("mlp record: unsupported activation");
  p.w1 = read_matrix(lines[3], "w1", p.layout.hidden, p.layout.input);
  p.b1 = read_matrix(lines[4], "b1", p.layout.hidden, 1);
  p.w2 = read_matrix(lines[5], "w2", p.layout.output, p.layout.hidden);
  p.b2 = read_matrix(lines[6], "b2", p.layout.output, 1);
  validate(p);
  return p;
}

}  // namespace cmil
