#pragma once

#include <span>
#include <vector>

#include "cmil/random.hpp"

namespace cmil {

/// Lower bound on every mixture standard deviation (normalized action units).
inline constexpr double kSpreadFloor = 1e-3;

/// Distance kept from the edges of the unit cube by every transformed value.
inline constexpr double kCubeEpsilon = 1e-6;

/// Univariate Gaussian mixture. Construction validates weights (nonnegative,
/// summing to one within 1e-9) and spreads (at least kSpreadFloor).
class GaussianMixture1D {
 public:
  GaussianMixture1D(std::vector<double> weights, std::vector<double> means, std::vector<double> sds);

  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> means() const { return means_; }
  std::span<const double> sds() const { return sds_; }

  double mean() const;
  double variance() const;

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> sds_;
};

double gm_logpdf(const GaussianMixture1D& gm, double x);
double gm_pdf(const GaussianMixture1D& gm, double x);
double gm_cdf(const GaussianMixture1D& gm, double x);

/// Inverse CDF by outward bracket doubling and a safeguarded bisection.
/// u must lie in [0, 1]; it is clamped to [kCubeEpsilon, 1 - kCubeEpsilon].
double gm_quantile(const GaussianMixture1D& gm, double u);

double gm_sample(const GaussianMixture1D& gm, Rng& rng);

}  // namespace cmil
