#include "cmil/copula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "cmil/errors.hpp"
#include "schedule.hpp"
#include "cmil/normal.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr char kKdeMagic[] = "CMILKDE1";

void check_dim(const Copula& c, Eigen::Index d) {
  if (d != copula_dim(c)) {
    throw ShapeError("copula: point dimension " + std::to_string(d) + " != copula dimension " +
                     std::to_string(copula_dim(c)));
  }
}

const Eigen::VectorXd& require_state(const Eigen::VectorXd* state, int expected) {
  if (!state) throw UsageError("state-dependent copula queried without a state");
  if (state->size() != expected) throw ShapeError("copula: state dimension mismatch");
  return *state;
}

double clamp_cube(double u) { return std::clamp(u, kCubeEpsilon, 1.0 - kCubeEpsilon); }

double reflect_unit(double v) {
  // Fold onto [0, 1] as repeated mirror images.
  while (v < 0.0 || v > 1.0) v = v < 0.0 ? -v : 2.0 - v;
  return v;
}

double kde_logdensity(const KdeCopula& c, const Eigen::VectorXd& u) {
  const Eigen::Index D = c.support.rows();
  const Eigen::Index n = c.support.cols();
  if (n == 0) throw NotFitted("KDE copula has no support points");
  Eigen::VectorXd inv_h2(D);
  double log_norm = 0.0;
  for (Eigen::Index d = 0; d < D; ++d) {
    inv_h2[d] = 1.0 / (c.bandwidth[d] * c.bandwidth[d]);
    log_norm += std::log(c.bandwidth[d]) + kLogSqrt2Pi;
  }
  // Per stored point x the reflected kernel factorizes as
  // exp(-(u-x)^2 / 2h^2) * (1 + exp(-2ux/h^2) + exp(-2(1-u)(1-x)/h^2)).
  // The bracket is at most 3 per coordinate, so points whose direct term is
  // far below the best one are skipped before computing it.
  thread_local std::vector<double> expo;
  expo.resize(static_cast<std::size_t>(n));
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* x = c.support.col(j).data();
    double e = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double diff = u[d] - x[d];
      e += diff * diff * inv_h2[d];
    }
    expo[static_cast<std::size_t>(j)] = -0.5 * e;
    best = std::max(best, -0.5 * e);
  }
  const double cutoff = best - 40.0 - static_cast<double>(D) * std::log(3.0);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double ej = expo[static_cast<std::size_t>(j)];
    if (ej < cutoff) continue;
    const double* x = c.support.col(j).data();
    double fac = 1.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double a0 = 2.0 * u[d] * x[d] * inv_h2[d];
      const double a1 = 2.0 * (1.0 - u[d]) * (1.0 - x[d]) * inv_h2[d];
      double r = 1.0;
      if (a0 < 40.0) r += std::exp(-a0);
      if (a1 < 40.0) r += std::exp(-a1);
      fac *= r;
    }
    acc += fac * std::exp(ej - best);
  }
  return best + std::log(acc) - std::log(static_cast<double>(n)) - log_norm;
}

double gmc_logdensity(const GaussianMixtureCopula& c, const Eigen::VectorXd& u, const Eigen::VectorXd& s) {
  const GmcState st = gmc_state(c, s);
  Eigen::VectorXd z(c.dim);
  double base = 0.0;
  for (int d = 0; d < c.dim; ++d) {
    z[d] = normal_quantile(u[d]);
    base += normal_logpdf(z[d]);
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> lp(static_cast<std::size_t>(c.components));
  for (int g = 0; g < c.components; ++g) {
    double v = std::log(st.weights[g]);
    for (int d = 0; d < c.dim; ++d) {
      const double sd = st.sds(d, g);
      v += normal_logpdf((z[d] - st.means(d, g)) / sd) - std::log(sd);
    }
    lp[static_cast<std::size_t>(g)] = v;
    best = std::max(best, v);
  }
  double acc = 0.0;
  for (double v : lp) acc += std::exp(v - best);
  return best + std::log(acc) - base;
}

double gaussian_logdensity(const GaussianCopula& c, const Eigen::VectorXd& u) {
  Eigen::VectorXd z(u.size());
  for (Eigen::Index d = 0; d < u.size(); ++d) z[d] = normal_quantile(u[d]);
  return -0.5 * c.log_det() - 0.5 * z.dot(c.precision_minus_identity() * z);
}

Eigen::VectorXd sample_gmc_state(const GmcState& st, Rng& rng) {
  const double r = uniform01(rng);
  Eigen::Index g = 0;
  double acc = st.weights[0];
  while (g + 1 < st.weights.size() && r >= acc) {
    ++g;
    acc += st.weights[g];
  }
  Eigen::VectorXd u(st.means.rows());
  for (Eigen::Index d = 0; d < u.size(); ++d) {
    u[d] = clamp_cube(normal_cdf(st.means(d, g) + st.sds(d, g) * standard_normal(rng)));
  }
  return u;
}

Eigen::VectorXd sample_one(const Copula& c, Rng& rng, const std::optional<GmcState>& gmc) {
  return std::visit(
      overloaded{
          [&](const IndependenceCopula& ic) {
            Eigen::VectorXd u(ic.dim);
            for (int d = 0; d < ic.dim; ++d) u[d] = clamp_cube(uniform01(rng));
            return u;
          },
          [&](const KdeCopula& kc) {
            if (kc.size() == 0) throw NotFitted("KDE copula has no support points");
            const auto j = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(kc.size())));
            Eigen::VectorXd u(kc.dim());
            for (int d = 0; d < kc.dim(); ++d) {
              u[d] = clamp_cube(reflect_unit(kc.support(d, j) + kc.bandwidth[d] * standard_normal(rng)));
            }
            return u;
          },
          [&](const GaussianMixtureCopula&) { return sample_gmc_state(*gmc, rng); },
          [&](const GaussianCopula& gc) {
            Eigen::VectorXd e(gc.dim());
            for (int d = 0; d < gc.dim(); ++d) e[d] = standard_normal(rng);
            const Eigen::VectorXd z = gc.cholesky() * e;
            Eigen::VectorXd u(gc.dim());
            for (int d = 0; d < gc.dim(); ++d) u[d] = clamp_cube(normal_cdf(z[d]));
            return u;
          },
      },
      c);
}

void check_gmc(const GaussianMixtureCopula& c) {
  validate(c.net);
  if (c.components < 1 || c.dim < 1) throw ConfigError("mixture copula: G and D must be >= 1");
  if (c.net.layout.output != c.components * (1 + 2 * c.dim)) {
    throw ShapeError("mixture copula: network output must be G*(1+2D)");
  }
}

double mean_gmc_nll(const GaussianMixtureCopula& c, const Eigen::MatrixXd& states, const Eigen::MatrixXd& z) {
  constexpr Eigen::Index chunk = 4096;
  double total = 0.0;
  for (Eigen::Index start = 0; start < states.cols(); start += chunk) {
    const Eigen::Index len = std::min(chunk, states.cols() - start);
    total += gmc_nll(c, states.middleCols(start, len), z.middleCols(start, len));
  }
  return total / static_cast<double>(states.cols());
}

Eigen::MatrixXd to_normal_scores(const Eigen::MatrixXd& u) {
  Eigen::MatrixXd z(u.rows(), u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index d = 0; d < u.rows(); ++d) {
      const double v = u(d, j);
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("copula point coordinate outside [0, 1]");
      z(d, j) = normal_quantile(clamp_cube(v));
    }
  }
  return z;
}

}  // namespace

CopulaPoint::CopulaPoint(Eigen::VectorXd u) : u_(std::move(u)) {
  for (Eigen::Index i = 0; i < u_.size(); ++i) {
    if (!(u_[i] >= kCubeEpsilon && u_[i] <= 1.0 - kCubeEpsilon)) {
      throw DomainError("copula point coordinate outside [eps, 1 - eps]");
    }
  }
}

CopulaPoint CopulaPoint::clamped(Eigen::VectorXd u) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0 && u[i] <= 1.0)) throw DomainError("copula point coordinate outside [0, 1]");
    u[i] = clamp_cube(u[i]);
  }
  return CopulaPoint(std::move(u));
}

GaussianCopula::GaussianCopula(Eigen::MatrixXd correlation) : correlation_(std::move(correlation)) {
  const Eigen::Index D = correlation_.rows();
  if (D < 1 || correlation_.cols() != D) throw ShapeError("GaussianCopula: correlation must be square");
  for (Eigen::Index i = 0; i < D; ++i) {
    if (std::abs(correlation_(i, i) - 1.0) > 1e-12) throw DomainError("GaussianCopula: unit diagonal required");
    for (Eigen::Index j = 0; j < D; ++j) {
      if (correlation_(i, j) != correlation_(j, i)) throw DomainError("GaussianCopula: correlation not symmetric");
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(correlation_);
  if (llt.info() != Eigen::Success) throw DomainError("GaussianCopula: correlation not positive definite");
  lower_ = llt.matrixL();
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
  precision_minus_identity_ = llt.solve(Eigen::MatrixXd::Identity(D, D)) - Eigen::MatrixXd::Identity(D, D);
}

int copula_dim(const Copula& c) {
  return std::visit(overloaded{
                        [](const IndependenceCopula& ic) { return ic.dim; },
                        [](const KdeCopula& kc) { return kc.dim(); },
                        [](const GaussianMixtureCopula& gc) { return gc.dim; },
                        [](const GaussianCopula& gc) { return gc.dim(); },
                    },
                    c);
}

bool is_state_dependent(const Copula& c) { return std::holds_alternative<GaussianMixtureCopula>(c); }

std::string copula_kind(const Copula& c) {
  return std::visit(overloaded{
                        [](const IndependenceCopula&) { return std::string("uniform"); },
                        [](const KdeCopula&) { return std::string("kde"); },
                        [](const GaussianMixtureCopula&) { return std::string("gmm"); },
                        [](const GaussianCopula&) { return std::string("gaussian"); },
                    },
                    c);
}

double copula_logdensity(const Copula& c, const CopulaPoint& u, const Eigen::VectorXd* state) {
  check_dim(c, u.dim());
  return std::visit(overloaded{
                        [](const IndependenceCopula&) { return 0.0; },
                        [&](const KdeCopula& kc) { return kde_logdensity(kc, u.values()); },
                        [&](const GaussianMixtureCopula& gc) {
                          return gmc_logdensity(gc, u.values(), require_state(state, gc.net.layout.input));
                        },
                        [&](const GaussianCopula& gc) { return gaussian_logdensity(gc, u.values()); },
                    },
                    c);
}

CopulaPoint copula_sample(const Copula& c, Rng& rng, const Eigen::VectorXd* state) {
  std::optional<GmcState> gmc;
  if (const auto* gc = std::get_if<GaussianMixtureCopula>(&c)) {
    gmc = gmc_state(*gc, require_state(state, gc->net.layout.input));
  }
  return CopulaPoint(sample_one(c, rng, gmc));
}

Eigen::MatrixXd copula_sample_n(const Copula& c, int n, Rng& rng, const Eigen::VectorXd* state) {
  if (n < 1) throw DomainError("copula_sample_n: n must be >= 1");
  std::optional<GmcState> gmc;
  if (const auto* gc = std::get_if<GaussianMixtureCopula>(&c)) {
    gmc = gmc_state(*gc, require_state(state, gc->net.layout.input));
  }
  Eigen::MatrixXd out(copula_dim(c), n);
  for (int j = 0; j < n; ++j) out.col(j) = sample_one(c, rng, gmc);
  return out;
}

KdeCopula kde_fit(const Eigen::MatrixXd& points, const KdeOptions& options) {
  const Eigen::Index D = points.rows();
  const Eigen::Index n_all = points.cols();
  if (n_all < 2) throw NotEnoughData("kde_fit: at least 2 points required");
  if (D < 1) throw ShapeError("kde_fit: points must have at least one coordinate");
  if (options.max_support < 2) throw ConfigError("kde_fit: max_support must be >= 2");
  for (Eigen::Index j = 0; j < n_all; ++j) {
    for (Eigen::Index d = 0; d < D; ++d) {
      if (!(points(d, j) >= 0.0 && points(d, j) <= 1.0)) throw DomainError("kde_fit: point outside the unit cube");
    }
  }

  KdeCopula kc;
  if (n_all > options.max_support) {
    // Partial Fisher-Yates: uniform subsample without replacement.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_all));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(options.seed);
    const auto m = static_cast<std::size_t>(options.max_support);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    kc.support.resize(D, options.max_support);
    for (std::size_t i = 0; i < m; ++i) kc.support.col(static_cast<Eigen::Index>(i)) = points.col(idx[i]);
  } else {
    kc.support = points;
  }
  const Eigen::Index n = kc.support.cols();

  if (options.bandwidth) {
    if (options.bandwidth->size() != D) throw ShapeError("kde_fit: bandwidth override has wrong dimension");
    if (!(options.bandwidth->array() > 0.0).all()) throw ConfigError("kde_fit: bandwidths must be positive");
    kc.bandwidth = *options.bandwidth;
  } else {
    const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(D) + 4.0));
    kc.bandwidth.resize(D);
    for (Eigen::Index d = 0; d < D; ++d) {
      const double mean = kc.support.row(d).mean();
      const double var = (kc.support.row(d).array() - mean).square().sum() / static_cast<double>(n - 1);
      kc.bandwidth[d] = std::max(factor * std::sqrt(var), kBandwidthFloor);
    }
  }
  return kc;
}

KdeCopula kde_fit(const std::vector<CopulaPoint>& points, const KdeOptions& options) {
  if (points.size() < 2) throw NotEnoughData("kde_fit: at least 2 points required");
  Eigen::MatrixXd m(points.front().dim(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].dim() != m.rows()) throw ShapeError("kde_fit: points of differing dimension");
    m.col(static_cast<Eigen::Index>(j)) = points[j].values();
  }
  return kde_fit(m, options);
}

GaussianMixtureCopula gmc_init(int state_dim, int dim, int components, int hidden, std::uint64_t seed) {
  if (components < 1 || dim < 1) throw ConfigError("gmc_init: G and D must be >= 1");
  GaussianMixtureCopula c;
  c.net = mlp_init({state_dim, hidden, components * (1 + 2 * dim)}, seed);
  // Near-zero output weights start every component at the standard normal,
  // i.e. close to the independence copula.
  c.net.w2 *= 0.1;
  c.components = components;
  c.dim = dim;
  return c;
}

GmcState gmc_state(const GaussianMixtureCopula& c, const Eigen::VectorXd& s) {
  const Eigen::VectorXd out = mlp_forward(c.net, s);
  const int G = c.components;
  const int D = c.dim;
  GmcState st;
  const double top = out.head(G).maxCoeff();
  st.weights = (out.head(G).array() - top).exp().matrix();
  st.weights /= st.weights.sum();
  st.means.resize(D, G);
  st.sds.resize(D, G);
  for (int g = 0; g < G; ++g) {
    for (int d = 0; d < D; ++d) {
      st.means(d, g) = out[G + g * D + d];
      st.sds(d, g) = std::max(std::exp(out[G + G * D + g * D + d]), kSpreadFloor);
    }
  }
  return st;
}

double gmc_nll(const GaussianMixtureCopula& c, const Eigen::MatrixXd& states, const Eigen::MatrixXd& z,
               GmcGradients* grad) {
  const int G = c.components;
  const int D = c.dim;
  if (states.rows() != c.net.layout.input || z.rows() != D || states.cols() != z.cols()) {
    throw ShapeError("gmc_nll: batch shape mismatch");
  }
  const Eigen::Index B = states.cols();
  const MlpActivations acts = mlp_forward_batch(c.net, states);
  Eigen::MatrixXd grad_out;
  if (grad) grad_out.setZero(c.net.layout.output, B);

  std::vector<double> lp(static_cast<std::size_t>(G));
  std::vector<double> w(static_cast<std::size_t>(G));
  double total = 0.0;
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto out = acts.output.col(j);
    double top = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < G; ++g) top = std::max(top, out[g]);
    double wsum = 0.0;
    for (int g = 0; g < G; ++g) {
      w[static_cast<std::size_t>(g)] = std::exp(out[g] - top);
      wsum += w[static_cast<std::size_t>(g)];
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < G; ++g) {
      w[static_cast<std::size_t>(g)] /= wsum;
      double v = std::log(w[static_cast<std::size_t>(g)]);
      for (int d = 0; d < D; ++d) {
        const double ls = out[G + G * D + g * D + d];
        const double sd = std::max(std::exp(ls), kSpreadFloor);
        const double e = (z(d, j) - out[G + g * D + d]) / sd;
        v += -0.5 * e * e - kLogSqrt2Pi - std::log(sd);
      }
      lp[static_cast<std::size_t>(g)] = v;
      best = std::max(best, v);
    }
    double acc = 0.0;
    for (int g = 0; g < G; ++g) acc += std::exp(lp[static_cast<std::size_t>(g)] - best);
    double base = 0.0;
    for (int d = 0; d < D; ++d) base += normal_logpdf(z(d, j));
    total -= best + std::log(acc) - base;

    if (grad) {
      for (int g = 0; g < G; ++g) {
        const double r = std::exp(lp[static_cast<std::size_t>(g)] - best) / acc;
        grad_out(g, j) = w[static_cast<std::size_t>(g)] - r;
        for (int d = 0; d < D; ++d) {
          const double ls = out[G + G * D + g * D + d];
          const double raw = std::exp(ls);
          const bool floored = raw < kSpreadFloor;
          const double sd = floored ? kSpreadFloor : raw;
          const double e = (z(d, j) - out[G + g * D + d]) / sd;
          grad_out(G + g * D + d, j) = -r * e / sd;
          grad_out(G + G * D + g * D + d, j) = floored ? 0.0 : r * (1.0 - e * e);
        }
      }
    }
  }
  if (grad) grad->net = mlp_backward_batch(c.net, states, acts, grad_out);
  return total;
}

CopulaFit gmc_train(GaussianMixtureCopula c, const Eigen::MatrixXd& states, const Eigen::MatrixXd& u,
                    const CopulaTrainConfig& cfg, const Eigen::MatrixXd* val_states, const Eigen::MatrixXd* val_u) {
  check_gmc(c);
  if (states.cols() < 1) throw NotEnoughData("gmc_train: no training pairs");
  if (states.cols() != u.cols() || u.rows() != c.dim || states.rows() != c.net.layout.input) {
    throw ShapeError("gmc_train: pair shapes do not match the copula");
  }
  if (cfg.max_epochs < 0 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) ||
      !(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0) || cfg.max_lr_cuts < 0 || cfg.patience < 1) {
    throw ConfigError("gmc_train: invalid training configuration");
  }
  const bool has_val = val_states && val_u;
  const Eigen::MatrixXd z = to_normal_scores(u);
  Eigen::MatrixXd val_z;
  if (has_val) val_z = to_normal_scores(*val_u);

  CopulaFit fit{c, {}, {}, 0, false};
  fit.train_nll.push_back(mean_gmc_nll(c, states, z));
  if (has_val) fit.val_nll.push_back(mean_gmc_nll(c, *val_states, val_z));
  if (cfg.max_epochs == 0) return fit;

  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(states.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  GaussianMixtureCopula best = c;
  double best_val = has_val ? fit.val_nll.front() : 0.0;
  detail::PlateauSchedule schedule(cfg.learning_rate, cfg.lr_decay, cfg.max_lr_cuts, cfg.patience, cfg.tolerance,
                                   fit.train_nll.front());

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      Eigen::MatrixXd xs(states.rows(), static_cast<Eigen::Index>(len));
      Eigen::MatrixXd zs(z.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        xs.col(static_cast<Eigen::Index>(i)) = states.col(order[start + i]);
        zs.col(static_cast<Eigen::Index>(i)) = z.col(order[start + i]);
      }
      GmcGradients g;
      const double loss = gmc_nll(c, xs, zs, &g);
      if (!std::isfinite(loss)) throw TrainingDiverged("copula", epoch, "non-finite loss");
      g.net *= 1.0 / static_cast<double>(len);
      try {
        c.net = sgd_step(std::move(c.net), g.net, schedule.rate(), cfg.l2);
      } catch (const TrainingDiverged&) {
        throw TrainingDiverged("copula", epoch, "non-finite gradient");
      }
    }
    const double nll = mean_gmc_nll(c, states, z);
    if (!std::isfinite(nll)) throw TrainingDiverged("copula", epoch, "non-finite loss");
    fit.train_nll.push_back(nll);
    fit.epochs_run = epoch;
    if (has_val) {
      const double v = mean_gmc_nll(c, *val_states, val_z);
      fit.val_nll.push_back(v);
      if (v < best_val) {
        best_val = v;
        best = c;
      }
    } else {
      best = c;
    }
    if (schedule.update(nll)) {
      fit.converged = true;
      break;
    }
  }
  fit.copula = std::move(best);
  return fit;
}

GaussianCopula fit_gaussian_copula(const Eigen::MatrixXd& points) {
  if (points.cols() < 2) throw NotEnoughData("fit_gaussian_copula: at least 2 points required");
  const Eigen::MatrixXd z = to_normal_scores(points);
  const Eigen::VectorXd mean = z.rowwise().mean();
  const Eigen::MatrixXd centered = z.colwise() - mean;
  Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(points.cols() - 1);
  const Eigen::VectorXd inv_sd = cov.diagonal().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  corr = 0.5 * (corr + corr.transpose()).eval();
  corr.diagonal().setOnes();
  return GaussianCopula(corr);
}

Copula pair_copula(const Copula& c, int a, int b, const Eigen::VectorXd* state) {
  const int D = copula_dim(c);
  if (a == b || a < 0 || b < 0 || a >= D || b >= D) {
    throw DomainError("pair_copula: coordinates must be distinct and within [0, D)");
  }
  return std::visit(
      overloaded{
          [](const IndependenceCopula&) -> Copula { return IndependenceCopula{2}; },
          [&](const KdeCopula& kc) -> Copula {
            Eigen::MatrixXd pts(2, kc.size());
            pts.row(0) = kc.support.row(a);
            pts.row(1) = kc.support.row(b);
            KdeOptions opts;
            opts.max_support = std::max<Eigen::Index>(kc.size(), 2);
            return kde_fit(pts, opts);
          },
          [&](const GaussianMixtureCopula& gc) -> Copula {
            const GmcState st = gmc_state(gc, require_state(state, gc.net.layout.input));
            const int G = gc.components;
            // Constant network whose biases hold the two selected coordinates' parameters.
            GaussianMixtureCopula out;
            out.components = G;
            out.dim = 2;
            out.net.layout = {gc.net.layout.input, 1, G * 5};
            out.net.w1 = Eigen::MatrixXd::Zero(1, gc.net.layout.input);
            out.net.b1 = Eigen::VectorXd::Zero(1);
            out.net.w2 = Eigen::MatrixXd::Zero(G * 5, 1);
            out.net.b2.resize(G * 5);
            for (int g = 0; g < G; ++g) {
              out.net.b2[g] = std::log(st.weights[g]);
              out.net.b2[G + g * 2] = st.means(a, g);
              out.net.b2[G + g * 2 + 1] = st.means(b, g);
              out.net.b2[G + 2 * G + g * 2] = std::log(st.sds(a, g));
              out.net.b2[G + 2 * G + g * 2 + 1] = std::log(st.sds(b, g));
            }
            return out;
          },
          [&](const GaussianCopula& gc) -> Copula {
            Eigen::MatrixXd r(2, 2);
            r << 1.0, gc.correlation()(a, b), gc.correlation()(b, a), 1.0;
            return GaussianCopula(r);
          },
      },
      c);
}

std::string serialize_copula(const Copula& c) {
  return std::visit(
      overloaded{
          [](const IndependenceCopula& ic) {
            return std::string("cmil-copula-uniform 1\ndim ") + std::to_string(ic.dim) + "\n";
          },
          [](const KdeCopula& kc) {
            std::string out(kKdeMagic, 8);
            text::append_u64_le(out, static_cast<std::uint64_t>(kc.dim()));
            text::append_u64_le(out, static_cast<std::uint64_t>(kc.size()));
            for (int d = 0; d < kc.dim(); ++d) text::append_f64_le(out, kc.bandwidth[d]);
            for (Eigen::Index j = 0; j < kc.size(); ++j) {
              for (int d = 0; d < kc.dim(); ++d) text::append_f64_le(out, kc.support(d, j));
            }
            return out;
          },
          [](const GaussianMixtureCopula& gc) {
            check_gmc(gc);
            return "cmil-copula-gmm 1\ncomponents " + std::to_string(gc.components) + "\ndim " +
                   std::to_string(gc.dim) + "\n" + serialize_mlp(gc.net);
          },
          [](const GaussianCopula& gc) {
            const auto& r = gc.correlation();
            std::vector<double> values(r.data(), r.data() + r.size());
            return "cmil-copula-gaussian 1\ndim " + std::to_string(gc.dim()) + "\ncorrelation " +
                   text::join_doubles(values) + "\n";
          },
      },
      c);
}

Copula parse_copula(std::string_view kind, std::string_view bytes) {
  auto header_lines = [&](std::size_t count) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const auto nl = bytes.find('\n', pos);
      if (nl == std::string_view::npos) throw IoError("copula record truncated");
      lines.push_back(bytes.substr(pos, nl - pos));
      pos = nl + 1;
    }
    return std::make_pair(lines, bytes.substr(pos));
  };
  auto tagged_int = [](std::string_view line, std::string_view tag) {
    const auto parts = text::split(line, ' ');
    if (parts.size() != 2 || parts[0] != tag) throw IoError("copula record: expected '" + std::string(tag) + "'");
    return static_cast<int>(text::parse_int(parts[1]));
  };

  if (kind == "uniform") {
    const auto [lines, rest] = header_lines(2);
    if (lines[0] != "cmil-copula-uniform 1") throw IoError("not a uniform copula record");
    const int dim = tagged_int(lines[1], "dim");
    if (dim < 1) throw IoError("uniform copula record: dim must be >= 1");
    return IndependenceCopula{dim};
  }
  if (kind == "kde") {
    if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view(kKdeMagic, 8)) {
      throw IoError("not a KDE copula record");
    }
    std::size_t pos = 8;
    const auto D = static_cast<Eigen::Index>(text::read_u64_le(bytes, pos));
    const auto n = static_cast<Eigen::Index>(text::read_u64_le(bytes, pos));
    if (D < 1 || n < 1) throw IoError("KDE copula record: empty dimensions");
    if (bytes.size() != 24 + 8 * static_cast<std::size_t>(D) * static_cast<std::size_t>(n + 1)) {
      throw IoError("KDE copula record: length does not match header");
    }
    KdeCopula kc;
    kc.bandwidth.resize(D);
    for (Eigen::Index d = 0; d < D; ++d) kc.bandwidth[d] = text::read_f64_le(bytes, pos);
    kc.support.resize(D, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index d = 0; d < D; ++d) kc.support(d, j) = text::read_f64_le(bytes, pos);
    }
    return kc;
  }
  if (kind == "gmm") {
    const auto [lines, rest] = header_lines(3);
    if (lines[0] != "cmil-copula-gmm 1") throw IoError("not a mixture copula record");
    GaussianMixtureCopula gc;
    gc.components = tagged_int(lines[1], "components");
    gc.dim = tagged_int(lines[2], "dim");
    gc.net = parse_mlp(rest);
    check_gmc(gc);
    return gc;
  }
  if (kind == "gaussian") {
    const auto [lines, rest] = header_lines(3);
    if (lines[0] != "cmil-copula-gaussian 1") throw IoError("not a Gaussian copula record");
    const int dim = tagged_int(lines[1], "dim");
    const auto sp = lines[2].find(' ');
    if (lines[2].substr(0, sp) != "correlation") throw IoError("Gaussian copula record: expected 'correlation'");
    const auto values = text::split_doubles(lines[2].substr(sp + 1));
    if (dim < 1 || values.size() != static_cast<std::size_t>(dim * dim)) {
      throw IoError("Gaussian copula record: wrong correlation size");
    }
    return GaussianCopula(Eigen::Map<const Eigen::MatrixXd>(values.data(), dim, dim));
  }
  throw IoError("unknown copula kind '" + std::string(kind) + "'");
}

}  // namespace cmil
