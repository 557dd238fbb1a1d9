#include "cmil/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cmil/errors.hpp"
#include "cmil/normal.hpp"

namespace cmil {

GaussianMixture1D::GaussianMixture1D(std::vector<double> weights, std::vector<double> means, std::vector<double> sds)
    : weights_(std::move(weights)), means_(std::move(means)), sds_(std::move(sds)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != sds_.size()) {
    throw ShapeError("GaussianMixture1D: weights, means and sds must be nonempty and equally sized");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (!(weights_[k] >= 0.0) || !std::isfinite(weights_[k])) throw DomainError("GaussianMixture1D: negative weight");
    if (!std::isfinite(means_[k])) throw DomainError("GaussianMixture1D: non-finite mean");
    if (!(sds_[k] >= kSpreadFloor) || !std::isfinite(sds_[k])) {
      throw DomainError("GaussianMixture1D: standard deviation below floor");
    }
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("GaussianMixture1D: weights do not sum to 1");
}

double GaussianMixture1D::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m += weights_[k] * means_[k];
  return m;
}

double GaussianMixture1D::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    const double d = means_[k] - m;
    v += weights_[k] * (sds_[k] * sds_[k] + d * d);
  }
  return v;
}

double gm_logpdf(const GaussianMixture1D& gm, double x) {
  const auto w = gm.weights();
  const auto mu = gm.means();
  const auto sd = gm.sds();
  double best = -std::numeric_limits<double>::infinity();
  // Terms are recomputed in the second pass; K is small.
  auto term = [&](std::size_t k) {
    const double z = (x - mu[k]) / sd[k];
    return std::log(w[k]) + normal_logpdf(z) - std::log(sd[k]);
  };
  for (std::size_t k = 0; k < gm.size(); ++k) {
    if (w[k] > 0.0) best = std::max(best, term(k));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < gm.size(); ++k) {
    if (w[k] > 0.0) acc += std::exp(term(k) - best);
  }
  return best + std::log(acc);
}

double gm_pdf(const GaussianMixture1D& gm, double x) {
  const auto w = gm.weights();
  const auto mu = gm.means();
  const auto sd = gm.sds();
  double p = 0.0;
  for (std::size_t k = 0; k < gm.size(); ++k) p += w[k] * normal_pdf((x - mu[k]) / sd[k]) / sd[k];
  return p;
}

double gm_cdf(const GaussianMixture1D& gm, double x) {
  const auto w = gm.weights();
  const auto mu = gm.means();
  const auto sd = gm.sds();
  double c = 0.0;
  for (std::size_t k = 0; k < gm.size(); ++k) c += w[k] * normal_cdf((x - mu[k]) / sd[k]);
  return std::clamp(c, 0.0, 1.0);
}

double gm_quantile(const GaussianMixture1D& gm, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("gm_quantile: probability outside [0, 1]");
  u = std::clamp(u, kCubeEpsilon, 1.0 - kCubeEpsilon);

  const auto mu = gm.means();
  const auto sd = gm.sds();
  const double sd_max = *std::max_element(sd.begin(), sd.end());
  double lo = *std::min_element(mu.begin(), mu.end()) - 10.0 * sd_max;
  double hi = *std::max_element(mu.begin(), mu.end()) + 10.0 * sd_max;
  double width = hi - lo;
  while (gm_cdf(gm, lo) > u) {
    lo -= width;
    width *= 2.0;
  }
  width = hi - lo;
  while (gm_cdf(gm, hi) < u) {
    hi += width;
    width *= 2.0;
  }

  // Bisection on the bracket; a Newton proposal replaces the midpoint
  // whenever it lands strictly inside the current bracket.
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = gm_cdf(gm, x) - u;
    if (std::abs(f) <= 1e-13) break;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) break;
    const double density = gm_pdf(gm, x);
    const double newton = density > 0.0 ? x - f / density : std::numeric_limits<double>::quiet_NaN();
    x = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  return x;
}

double gm_sample(const GaussianMixture1D& gm, Rng& rng) {
  const auto w = gm.weights();
  const double r = uniform01(rng);
  std::size_t k = 0;
  double acc = w[0];
  while (k + 1 < gm.size() && r >= acc) {
    ++k;
    acc += w[k];
  }
  return gm.means()[k] + gm.sds()[k] * standard_normal(rng);
}

}  // namespace cmil
