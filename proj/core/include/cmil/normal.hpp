#pragma once

namespace cmil {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

double normal_pdf(double z);
double normal_logpdf(double z);

/// Standard normal CDF via the complementary error function.
double normal_cdf(double z);

/// Inverse standard normal CDF on (0, 1). Rational initial guess refined by
/// Halley steps; relative accuracy near machine precision.
double normal_quantile(double p);

}  // namespace cmil
