#include "cmil/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cmil/errors.hpp"
#include "cmil/random.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

// Sum of log(2 / span) over action coordinates; an empty normalization is the identity.
double log_action_scale(const Normalization& n, Eigen::Index coords) {
  if (n.action_min.size() == 0) return 0.0;
  if (n.action_min.size() != coords) throw ShapeError("normalization: action range size mismatch");
  double out = 0.0;
  for (Eigen::Index d = 0; d < coords; ++d) {
    const double span = n.action_max[d] - n.action_min[d];
    if (span > 0.0) out += std::log(2.0 / span);
  }
  return out;
}

void check_compatible(const CopulaPolicy& p, const Dataset& test) {
  if (test.meta.state_dim != p.marginals.state_dim() || test.meta.action_dim != p.coords()) {
    throw ShapeError("evaluation: dataset dimensions (" + std::to_string(test.meta.state_dim) + ", " +
                     std::to_string(test.meta.action_dim) + ") differ from policy (" +
                     std::to_string(p.marginals.state_dim()) + ", " + std::to_string(p.coords()) + ")");
  }
}

std::string policy_fingerprint(const CopulaPolicy& p, const Dataset& test, std::string_view extra) {
  std::string key = std::to_string(text::fnv1a64(serialize_policy(p)));
  key += '|';
  key += std::to_string(text::fnv1a64(render_metadata(test)));
  key += '|';
  key += std::to_string(text::fnv1a64(render_records(test)));
  key += '|';
  key += extra;
  return fingerprint(key);
}

}  // namespace

EvalReport make_report(std::string metric, std::vector<double> values, std::vector<std::uint64_t> seeds,
                       std::string fp) {
  if (values.empty()) throw DomainError("make_report: at least one repetition required");
  EvalReport r;
  r.metric = std::move(metric);
  const double n = static_cast<double>(values.size());
  r.value = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.value) * (v - r.value);
    r.sd = std::sqrt(ss / (n - 1.0));
  }
  r.fingerprint = std::move(fp);
  r.seeds = std::move(seeds);
  r.repetitions = std::move(values);
  return r;
}

std::string fingerprint(std::string_view config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(text::fnv1a64(config)));
  return buf;
}

double PredictionErrors::rmse() const {
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t j = 0; j < sum_sq.size(); ++j) {
    s += sum_sq[j];
    c += count[j];
  }
  if (c == 0) throw NotEnoughData("rmse: no predictions");
  return std::sqrt(s / static_cast<double>(c));
}

PredictionErrors prediction_errors(const Dataset& test, const Predictor& predict) {
  test.validate();
  if (test.total_steps() == 0) throw NotEnoughData("prediction_errors: empty test set");
  const Normalization& tn = test.meta.normalization;
  PredictionErrors out;
  out.sum_sq.reserve(test.trajectories.size());
  out.count.reserve(test.trajectories.size());
  for (std::size_t j = 0; j < test.trajectories.size(); ++j) {
    const auto& steps = test.trajectories[j].steps;
    double s = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const Eigen::VectorXd a = tn.normalize_action(steps[t].action);
      const Eigen::VectorXd pred = predict(j, t, tn.normalize_state(steps[t].state));
      if (pred.size() != a.size()) throw ShapeError("prediction_errors: predictor returned wrong action size");
      s += (pred - a).squaredNorm();
    }
    out.sum_sq.push_back(s);
    out.count.push_back(steps.size() * static_cast<std::size_t>(test.meta.action_dim));
  }
  return out;
}

PredictionErrors prediction_errors(const CopulaPolicy& p, const Dataset& test, int n_samples, std::uint64_t seed) {
  check_compatible(p, test);
  if (n_samples < 1) throw DomainError("prediction_errors: n_samples must be >= 1");
  const Normalization& pn = p.normalization();
  const Normalization& tn = test.meta.normalization;
  Rng rng;
  std::size_t current = static_cast<std::size_t>(-1);
  return prediction_errors(test, [&](std::size_t j, std::size_t, const Eigen::VectorXd& s) {
    if (j != current) {
      rng.seed(derive_seed(seed, j));
      current = j;
    }
    const Eigen::VectorXd sp = pn.normalize_state(tn.denormalize_state(s));
    return Eigen::VectorXd(tn.normalize_action(pn.denormalize_action(predict_action(p, sp, n_samples, rng))));
  });
}

EvalReport eval_rmse(const CopulaPolicy& p, const Dataset& test, int n_samples,
                     const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw DomainError("eval_rmse: at least one seed required");
  std::vector<double> values;
  for (std::uint64_t seed : seeds) values.push_back(prediction_errors(p, test, n_samples, seed).rmse());
  const std::string extra = "rmse n_samples=" + std::to_string(n_samples);
  return make_report("rmse[n_samples=" + std::to_string(n_samples) + "]", std::move(values), seeds,
                     policy_fingerprint(p, test, extra));
}

BootstrapInterval paired_bootstrap_rmse_difference(const PredictionErrors& a, const PredictionErrors& b, int resamples,
                                                   double level, std::uint64_t seed) {
  const std::size_t m = a.sum_sq.size();
  if (m == 0 || b.sum_sq.size() != m || a.count != b.count) {
    throw ShapeError("paired bootstrap: error sets must cover the same trajectories");
  }
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) throw ConfigError("paired bootstrap: bad resamples or level");
  BootstrapInterval out;
  out.estimate = a.rmse() - b.rmse();
  Rng rng(seed);
  std::vector<double> diffs(static_cast<std::size_t>(resamples));
  for (auto& diff : diffs) {
    double sa = 0.0;
    double sb = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = uniform_index(rng, m);
      sa += a.sum_sq[k];
      sb += b.sum_sq[k];
      c += static_cast<double>(a.count[k]);
    }
    diff = std::sqrt(sa / c) - std::sqrt(sb / c);
  }
  std::sort(diffs.begin(), diffs.end());
  const double tail = 0.5 * (1.0 - level);
  auto pick = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
    return diffs[std::min(idx, diffs.size() - 1)];
  };
  out.lower = pick(tail);
  out.upper = pick(1.0 - tail);
  return out;
}

double mean_nll(const CopulaPolicy& p, const Dataset& test) {
  check_compatible(p, test);
  test.validate();
  if (test.total_steps() == 0) throw NotEnoughData("mean_nll: empty test set");
  const Normalization& pn = p.normalization();
  const double jacobian = log_action_scale(test.meta.normalization, p.coords()) - log_action_scale(pn, p.coords());
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& traj : test.trajectories) {
    for (const auto& step : traj.steps) {
      const double ll = joint_log_likelihood(p, pn.normalize_state(step.state), pn.normalize_action(step.action));
      if (!std::isfinite(ll)) throw DomainError("mean_nll: non-finite log-likelihood");
      total -= ll;
      ++n;
    }
  }
  return total / static_cast<double>(n) + jacobian;
}

EvalReport eval_nll(const CopulaPolicy& p, const Dataset& test) {
  const double v = mean_nll(p, test);
  return make_report("nll[copula=" + copula_kind(p.copula) + "]", {v}, {test.meta.seed},
                     policy_fingerprint(p, test, "nll"));
}

std::array<EvalReport, 4> eval_swap(const CopulaPolicy& old_p, const CopulaPolicy& new_p, const Dataset& new_test) {
  if (old_p.coords() != new_p.coords() || old_p.marginals.state_dim() != new_p.marginals.state_dim()) {
    throw ShapeError("eval_swap: policies have incompatible dimensions");
  }
  const CopulaPolicy* src[2] = {&old_p, &new_p};
  const char* names[2] = {"old", "new"};
  std::array<EvalReport, 4> out;
  for (int m = 0; m < 2; ++m) {
    for (int c = 0; c < 2; ++c) {
      const CopulaPolicy mixed = compose_policy(*src[m], *src[c]);
      EvalReport r = eval_nll(mixed, new_test);
      r.metric = std::string("nll[marginals=") + names[m] + ",copula=" + names[c] + "]";
      out[static_cast<std::size_t>(2 * m + c)] = std::move(r);
    }
  }
  return out;
}

Eigen::MatrixXd export_copula_grid(const CopulaPolicy& p, int dim_a, int dim_b, int resolution,
                                   const Eigen::VectorXd* state) {
  if (resolution < 1) throw DomainError("export_copula_grid: resolution must be >= 1");
  const Copula pc = pair_copula(p.copula, dim_a, dim_b, state);
  Eigen::MatrixXd grid(resolution, resolution);
  Eigen::VectorXd u(2);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      u << (i + 0.5) / resolution, (j + 0.5) / resolution;
      grid(i, j) = std::exp(copula_logdensity(pc, CopulaPoint::clamped(u), state));
    }
  }
  return grid;
}

std::string render_grid(const Eigen::MatrixXd& grid, int dim_a, int dim_b, const std::string& kind) {
  const auto r = grid.rows();
  std::string out = "# copula " + kind + "\n";
  out += "# rows u_" + std::to_string(dim_a) + " cols u_" + std::to_string(dim_b) + "\n";
  out += "# resolution " + std::to_string(r) + " cell centres (i + 0.5) / " + std::to_string(r) + "\n";
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (j) out += ',';
      out += text::format_double(grid(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.metric.size());
  std::string out;
  char buf[128];
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size() + 2, ' '); };
  out += pad("metric") + "mean        sd          reps  fingerprint\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-11.6f %-11.6f %-5zu %s\n", r.value, r.sd, r.repetitions.size(),
                  r.fingerprint.c_str());
    out += pad(r.metric) + buf;
  }
  return out;
}

std::string render_tsv(const std::vector<EvalReport>& reports) {
  std::string out = "metric\tvalue\tsd\trepetitions\tfingerprint\tseeds\tvalues\n";
  for (const auto& r : reports) {
    std::string seeds;
    for (std::size_t i = 0; i < r.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(r.seeds[i]);
    out += r.metric + '\t' + text::format_double(r.value) + '\t' + text::format_double(r.sd) + '\t' +
           std::to_string(r.repetitions.size()) + '\t' + r.fingerprint + '\t' + seeds + '\t' +
           text::join_doubles(r.repetitions, ',') + '\n';
  }
  return out;
}

}  // namespace cmil
