#include "cmil/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmil/errors.hpp"
#include "schedule.hpp"
#include "cmil/normal.hpp"
#include "cmil/random.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

double mean_nll(const MarginalModel& model, const SampleSet& set) {
  constexpr Eigen::Index chunk = 4096;
  double total = 0.0;
  for (Eigen::Index start = 0; start < set.size(); start += chunk) {
    const Eigen::Index len = std::min(chunk, set.size() - start);
    total += marginal_nll(model, set.states.middleCols(start, len), set.actions.middleCols(start, len));
  }
  return total / static_cast<double>(set.size());
}

std::string vec_line(std::string_view tag, const Eigen::VectorXd& v) {
  std::string out(tag);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += text::format_double(v[i]);
  }
  return out + "\n";
}

Eigen::VectorXd parse_vec_line(std::string_view line, std::string_view tag) {
  const auto sp = line.find(' ');
  if (line.substr(0, sp) != tag) throw IoError("marginal record: expected '" + std::string(tag) + "' line");
  if (sp == std::string_view::npos) return Eigen::VectorXd();
  const auto values = text::split_doubles(line.substr(sp + 1));
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

double MarginalModel::spread(int d) const { return std::max(std::exp(log_spread[d]), kSpreadFloor); }

void MarginalModel::validate() const {
  cmil::validate(net);
  if (components < 1 || coords < 1) throw ConfigError("marginal model: K and D must be >= 1");
  if (net.layout.output != components * coords) throw ShapeError("marginal model: network output must be K*D");
  if (log_spread.size() != coords) throw ShapeError("marginal model: one log-spread per coordinate required");
  if (!log_spread.allFinite()) throw DomainError("marginal model: non-finite log-spread");
  if (static_cast<int>(agent_of_coord.size()) != coords) throw ShapeError("marginal model: agent map size != D");
}

MarginalModel marginal_init(int state_dim, int coords, std::vector<int> agent_of_coord, int components, int hidden,
                            std::uint64_t seed) {
  if (components < 1) throw ConfigError("marginal_init: K must be >= 1");
  if (coords < 1) throw ConfigError("marginal_init: D must be >= 1");
  MarginalModel m;
  m.net = mlp_init({state_dim, hidden, components * coords}, seed);
  // Spread the initial component means over [-0.5, 0.5] so components start apart.
  if (components > 1) {
    for (int d = 0; d < coords; ++d) {
      for (int k = 0; k < components; ++k) {
        m.net.b2[d * components + k] = -0.5 + static_cast<double>(k) / (components - 1);
      }
    }
  }
  m.log_spread = Eigen::VectorXd::Constant(coords, std::log(0.5));
  m.components = components;
  m.coords = coords;
  m.agent_of_coord = std::move(agent_of_coord);
  if (m.agent_of_coord.empty()) {
    for (int d = 0; d < coords; ++d) m.agent_of_coord.push_back(d);
  }
  m.validate();
  return m;
}

std::vector<GaussianMixture1D> marginal_forward(const MarginalModel& model, const Eigen::VectorXd& s) {
  if (s.size() != model.state_dim()) {
    throw ShapeError("marginal_forward: state size " + std::to_string(s.size()) + " != " +
                     std::to_string(model.state_dim()));
  }
  const Eigen::VectorXd out = mlp_forward(model.net, s);
  const int K = model.components;
  std::vector<GaussianMixture1D> result;
  result.reserve(static_cast<std::size_t>(model.coords));
  for (int d = 0; d < model.coords; ++d) {
    std::vector<double> means(out.data() + d * K, out.data() + (d + 1) * K);
    result.emplace_back(std::vector<double>(K, 1.0 / K), std::move(means), std::vector<double>(K, model.spread(d)));
  }
  return result;
}

double marginal_log_likelihood(const MarginalModel& model, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  if (a.size() != model.coords) throw ShapeError("marginal_log_likelihood: action size != D");
  const auto gms = marginal_forward(model, s);
  double ll = 0.0;
  for (int d = 0; d < model.coords; ++d) ll += gm_logpdf(gms[static_cast<std::size_t>(d)], a[d]);
  return ll;
}

Eigen::VectorXd pit(const std::vector<GaussianMixture1D>& marginals, const Eigen::VectorXd& a) {
  if (a.size() != static_cast<Eigen::Index>(marginals.size())) throw ShapeError("pit: action size != D");
  Eigen::VectorXd u(a.size());
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    u[d] = std::clamp(gm_cdf(marginals[static_cast<std::size_t>(d)], a[d]), kCubeEpsilon, 1.0 - kCubeEpsilon);
  }
  return u;
}

Eigen::VectorXd pit(const MarginalModel& model, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  return pit(marginal_forward(model, s), a);
}

Eigen::MatrixXd pit_batch(const MarginalModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  if (states.rows() != model.state_dim() || actions.rows() != model.coords || states.cols() != actions.cols()) {
    throw ShapeError("pit_batch: batch shape mismatch");
  }
  const int K = model.components;
  const MlpActivations acts = mlp_forward_batch(model.net, states);
  Eigen::MatrixXd u(model.coords, actions.cols());
  for (int d = 0; d < model.coords; ++d) {
    const double sigma = model.spread(d);
    for (Eigen::Index j = 0; j < actions.cols(); ++j) {
      double c = 0.0;
      for (int k = 0; k < K; ++k) c += normal_cdf((actions(d, j) - acts.output(d * K + k, j)) / sigma);
      u(d, j) = std::clamp(c / K, kCubeEpsilon, 1.0 - kCubeEpsilon);
    }
  }
  return u;
}

double marginal_nll(const MarginalModel& model, const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                    MarginalGradients* grad) {
  if (states.rows() != model.state_dim() || actions.rows() != model.coords || states.cols() != actions.cols()) {
    throw ShapeError("marginal_nll: batch shape mismatch");
  }
  const int K = model.components;
  const int D = model.coords;
  const Eigen::Index B = states.cols();
  const MlpActivations acts = mlp_forward_batch(model.net, states);

  Eigen::MatrixXd grad_out;
  if (grad) {
    grad_out.setZero(K * D, B);
    grad->log_spread = Eigen::VectorXd::Zero(D);
  }
  const double log_k = std::log(static_cast<double>(K));
  std::vector<double> terms(static_cast<std::size_t>(K));
  double total = 0.0;
  for (int d = 0; d < D; ++d) {
    const double raw = std::exp(model.log_spread[d]);
    const bool floored = raw < kSpreadFloor;
    const double sigma = floored ? kSpreadFloor : raw;
    const double log_sigma = std::log(sigma);
    double spread_grad = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) {
      const double a = actions(d, j);
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double z = (a - acts.output(d * K + k, j)) / sigma;
        terms[static_cast<std::size_t>(k)] = -0.5 * z * z;
        best = std::max(best, terms[static_cast<std::size_t>(k)]);
      }
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += std::exp(terms[static_cast<std::size_t>(k)] - best);
      const double log_f = best + std::log(acc) - log_k - kLogSqrt2Pi - log_sigma;
      total -= log_f;
      if (grad) {
        for (int k = 0; k < K; ++k) {
          const double r = std::exp(terms[static_cast<std::size_t>(k)] - best) / acc;
          const double z = (a - acts.output(d * K + k, j)) / sigma;
          grad_out(d * K + k, j) = -r * z / sigma;
          spread_grad += r * (1.0 - z * z);
        }
      }
    }
    if (grad) grad->log_spread[d] = floored ? 0.0 : spread_grad;
  }
  if (grad) grad->net = mlp_backward_batch(model.net, states, acts, grad_out);
  return total;
}

MarginalFit marginal_train(MarginalModel model, const SampleSet& train, const MarginalTrainConfig& cfg,
                           const SampleSet* validation) {
  model.validate();
  if (train.size() < 1) throw NotEnoughData("marginal_train: empty training set");
  if (train.states.rows() != model.state_dim() || train.actions.rows() != model.coords) {
    throw ShapeError("marginal_train: training data dimensions do not match the model");
  }
  if (cfg.max_epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) ||
      !(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0) || cfg.max_lr_cuts < 0 || cfg.patience < 1) {
    throw ConfigError("marginal_train: invalid training configuration");
  }

  MarginalFit fit{model, {}};
  fit.curve.train_nll.push_back(mean_nll(model, train));
  if (validation) fit.curve.val_nll.push_back(mean_nll(model, *validation));
  if (cfg.max_epochs == 0) return fit;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});

  MarginalModel best_model = model;
  double best_val = validation ? fit.curve.val_nll.front() : 0.0;
  detail::PlateauSchedule schedule(cfg.learning_rate, cfg.lr_decay, cfg.max_lr_cuts, cfg.patience, cfg.tolerance,
                                   fit.curve.train_nll.front());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      const Eigen::MatrixXd xs = gather(train.states, idx);
      const Eigen::MatrixXd as = gather(train.actions, idx);
      MarginalGradients g;
      const double loss = marginal_nll(model, xs, as, &g);
      if (!std::isfinite(loss)) throw TrainingDiverged("marginal", epoch, "non-finite loss");
      const double inv = 1.0 / static_cast<double>(len);
      g.net *= inv;
      try {
        model.net = sgd_step(std::move(model.net), g.net, schedule.rate(), cfg.l2);
      } catch (const TrainingDiverged&) {
        throw TrainingDiverged("marginal", epoch, "non-finite gradient");
      }
      model.log_spread -= schedule.rate() * inv * g.log_spread;
    }
    const double nll = mean_nll(model, train);
    if (!std::isfinite(nll)) throw TrainingDiverged("marginal", epoch, "non-finite loss");
    fit.curve.train_nll.push_back(nll);
    fit.curve.epochs_run = epoch;

    if (validation) {
      const double v = mean_nll(model, *validation);
      fit.curve.val_nll.push_back(v);
      if (v < best_val) {
        best_val = v;
        best_model = model;
        fit.curve.best_epoch = epoch;
      }
    } else {
      best_model = model;
      fit.curve.best_epoch = epoch;
    }

    if (schedule.update(nll)) {
      fit.curve.converged = true;
      break;
    }
  }
  fit.model = std::move(best_model);
  return fit;
}

std::string serialize_marginal(const MarginalModel& m) {
  m.validate();
  std::string out = "cmil-marginal 1\n";
  out += "components " + std::to_string(m.components) + "\n";
  out += "coords " + std::to_string(m.coords) + "\n";
  out += "agent_of_coord";
  for (int a : m.agent_of_coord) out += " " + std::to_string(a);
  out += "\n";
  out += vec_line("log_spread", m.log_spread);
  out += vec_line("state_min", m.normalization.state_min);
  out += vec_line("state_max", m.normalization.state_max);
  out += vec_line("action_min", m.normalization.action_min);
  out += vec_line("action_max", m.normalization.action_max);
  out += serialize_mlp(m.net);
  return out;
}

MarginalModel parse_marginal(std::string_view text_in) {
  std::vector<std::string_view> lines;
  for (auto line : text::split(text_in, '\n')) {
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  if (lines.size() < 9 || lines[0] != "cmil-marginal 1") throw IoError("not a cmil-marginal version 1 record");
  MarginalModel m;
  auto scalar = [&](std::string_view line, std::string_view tag) {
    const auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0] != tag) throw IoError("marginal record: expected '" + std::string(tag) + "'");
    return static_cast<int>(text::parse_int(parts[1]));
  };
  m.components = scalar(lines[1], "components");
  m.coords = scalar(lines[2], "coords");
  const auto agents = text::split(lines[3], ' ');
  if (agents.empty() || agents[0] != "agent_of_coord") throw IoError("marginal record: expected 'agent_of_coord'");
  for (std::size_t i = 1; i < agents.size(); ++i) m.agent_of_coord.push_back(static_cast<int>(text::parse_int(agents[i])));
  m.log_spread = parse_vec_line(lines[4], "log_spread");
  m.normalization.state_min = parse_vec_line(lines[5], "state_min");
  m.normalization.state_max = parse_vec_line(lines[6], "state_max");
  m.normalization.action_min = parse_vec_line(lines[7], "action_min");
  m.normalization.action_max = parse_vec_line(lines[8], "action_max");
  std::string rest;
  for (std::size_t i = 9; i < lines.size(); ++i) {
    rest += lines[i];
    rest += '\n';
  }
  m.net = parse_mlp(rest);
  m.validate();
  return m;
}

}  // namespace cmil
