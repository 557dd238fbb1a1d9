#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmil/dataset.hpp"
#include "cmil/policy.hpp"

namespace cmil {

struct EvalReport {
  std::string metric;
  double value = 0.0;  // mean over repetitions
  double sd = 0.0;     // sample sd over repetitions, 0 for a single one
  std::string fingerprint;
  std::vector<std::uint64_t> seeds;
  std::vector<double> repetitions;
};

/// Mean and sample standard deviation of `values`; one seed per value.
EvalReport make_report(std::string metric, std::vector<double> values, std::vector<std::uint64_t> seeds,
                       std::string fingerprint);

/// 16 hex digits of a 64-bit FNV-1a hash.
std::string fingerprint(std::string_view config);

/// Squared prediction errors grouped by trajectory, in the test set's normalized units.
struct PredictionErrors {
  std::vector<double> sum_sq;       // per trajectory, summed over steps and coordinates
  std::vector<std::size_t> count;   // per trajectory, steps * coordinates

  double rmse() const;
};

/// Arguments: trajectory index, step index, state in the test set's normalized units.
/// Returns the predicted action in the same units.
using Predictor = std::function<Eigen::VectorXd(std::size_t, std::size_t, const Eigen::VectorXd&)>;

PredictionErrors prediction_errors(const Dataset& test, const Predictor& predict);

/// Trajectory j draws from derive_seed(seed, j), so results do not depend on evaluation order.
PredictionErrors prediction_errors(const CopulaPolicy& p, const Dataset& test, int n_samples, std::uint64_t seed);

EvalReport eval_rmse(const CopulaPolicy& p, const Dataset& test, int n_samples, const std::vector<std::uint64_t>& seeds);

struct BootstrapInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Percentile interval for rmse(a) - rmse(b), resampling whole trajectories
/// jointly for both error sets.
BootstrapInterval paired_bootstrap_rmse_difference(const PredictionErrors& a, const PredictionErrors& b, int resamples,
                                                   double level, std::uint64_t seed);

/// Mean negative joint log-likelihood per timestep in nats, in the test set's
/// normalized units. Data is mapped into the policy's units and the log-Jacobian
/// of the change of units is added back.
double mean_nll(const CopulaPolicy& p, const Dataset& test);

EvalReport eval_nll(const CopulaPolicy& p, const Dataset& test);

/// Order: (old marginals, old copula), (old, new), (new, old), (new, new).
std::array<EvalReport, 4> eval_swap(const CopulaPolicy& old_p, const CopulaPolicy& new_p, const Dataset& new_test);

/// Row i, column j holds the pairwise copula density at ((i + 0.5) / r, (j + 0.5) / r).
Eigen::MatrixXd export_copula_grid(const CopulaPolicy& p, int dim_a, int dim_b, int resolution,
                                   const Eigen::VectorXd* state = nullptr);

std::string render_grid(const Eigen::MatrixXd& grid, int dim_a, int dim_b, const std::string& copula_kind);

std::string render_table(const std::vector<EvalReport>& reports);
std::string render_tsv(const std::vector<EvalReport>& reports);

}  // namespace cmil
