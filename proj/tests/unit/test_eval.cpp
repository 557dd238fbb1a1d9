#include <cmath>

#include "doctest.h"
#include "cmil/errors.hpp"
#include "cmil/eval.hpp"
#include "cmil/random.hpp"
#include "oracles.hpp"

using namespace cmil;

namespace {

MarginalModel standard_marginals(int state_dim, int coords) {
  std::vector<int> agents(static_cast<std::size_t>(coords), 0);
  MarginalModel m = marginal_init(state_dim, coords, agents, 2, 4, 1);
  m.net.w2.setZero();
  m.net.b2.setZero();
  m.log_spread.setZero();
  m.normalization.state_min = Eigen::VectorXd::Constant(state_dim, -1.0);
  m.normalization.state_max = Eigen::VectorXd::Constant(state_dim, 1.0);
  m.normalization.action_min = Eigen::VectorXd::Constant(coords, -1.0);
  m.normalization.action_max = Eigen::VectorXd::Constant(coords, 1.0);
  return m;
}

GaussianCopula pair(double rho) {
  Eigen::Matrix2d r;
  r << 1.0, rho, rho, 1.0;
  return GaussianCopula(r);
}

// Standard normal pairs with correlation rho; the stored normalization is the identity.
Dataset correlated_normals(double rho, int M, int T, Rng& rng) {
  Dataset ds;
  ds.meta.n_agents = 2;
  ds.meta.state_dim = 1;
  ds.meta.action_dim = 2;
  ds.meta.horizon = T;
  ds.meta.agent_of_coord = {0, 1};
  ds.meta.normalization = standard_marginals(1, 2).normalization;
  for (int j = 0; j < M; ++j) {
    Trajectory t;
    for (int l = 0; l < T; ++l) {
      const double z1 = standard_normal(rng);
      const double z2 = rho * z1 + std::sqrt(1.0 - rho * rho) * standard_normal(rng);
      t.steps.push_back({Eigen::VectorXd::Constant(1, 2.0 * uniform01(rng) - 1.0), Eigen::Vector2d(z1, z2)});
    }
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("reports") {
  const EvalReport one = make_report("m", {2.5}, {7}, "f");
  CHECK(one.value == 2.5);
  CHECK(one.sd == 0.0);
  const EvalReport three = make_report("m", {1.0, 2.0, 4.0}, {1, 2, 3}, "f");
  CHECK(three.value == doctest::Approx(7.0 / 3.0));
  CHECK(three.sd == doctest::Approx(std::sqrt((16.0 / 9 + 1.0 / 9 + 25.0 / 9) / 2.0)));
  CHECK(three.repetitions.size() == 3);
  CHECK_THROWS_AS(make_report("m", {}, {}, "f"), DomainError);

  CHECK(fingerprint("abc") == fingerprint("abc"));
  CHECK(fingerprint("abc") != fingerprint("abd"));
  CHECK(fingerprint("").size() == 16);
  // FNV-1a offset basis for the empty string.
  CHECK(fingerprint("") == "cbf29ce484222325");

  const std::string table = render_table({one, three});
  const std::string tsv = render_tsv({one, three});
  CHECK(table.find("m") != std::string::npos);
  CHECK(tsv.find('\t') != std::string::npos);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 3);
}

TEST_CASE("RMSE of stub predictors") {
  Rng rng(1);
  const Dataset ds = correlated_normals(0.0, 40, 50, rng);
  const PredictionErrors perfect =
      prediction_errors(ds, [&](std::size_t j, std::size_t l, const Eigen::VectorXd&) {
        return ds.meta.normalization.normalize_action(ds.trajectories[j].steps[l].action);
      });
  CHECK(perfect.rmse() == 0.0);
  const PredictionErrors zero =
      prediction_errors(ds, [](std::size_t, std::size_t, const Eigen::VectorXd&) { return Eigen::Vector2d::Zero(); });
  CHECK(std::abs(zero.rmse() - 1.0) < 0.05);
  CHECK(zero.sum_sq.size() == 40);
  CHECK(zero.count[3] == 100);
  CHECK_THROWS_AS(
      prediction_errors(ds, [](std::size_t, std::size_t, const Eigen::VectorXd&) { return Eigen::Vector3d::Zero(); }),
      ShapeError);
}

TEST_CASE("RMSE depends on the copula only through Monte Carlo noise") {
  // Squared error is summed coordinate by coordinate, so its expectation depends
  // on the marginals alone: a single draw from N(0,1) marginals against N(0,1)
  // data has E[(a - a_hat)^2] = 2, and the mean of n draws has 1 + 1/n.
  Rng rng(2);
  const Dataset ds = correlated_normals(0.9, 100, 50, rng);
  const CopulaPolicy indep{standard_marginals(1, 2), IndependenceCopula{2}};
  const CopulaPolicy joint{standard_marginals(1, 2), pair(0.9)};
  for (int n : {1, 20}) {
    const double oracle = std::sqrt(1.0 + 1.0 / n);
    const double a = prediction_errors(indep, ds, n, 3).rmse();
    const double b = prediction_errors(joint, ds, n, 3).rmse();
    CHECK(std::abs(a - oracle) < 0.03 * oracle);
    CHECK(std::abs(b - oracle) < 0.03 * oracle);
  }
  const BootstrapInterval ci = paired_bootstrap_rmse_difference(prediction_errors(joint, ds, 1, 4),
                                                                prediction_errors(indep, ds, 1, 4), 1000, 0.95, 5);
  CHECK(ci.lower < 0.0);
  CHECK(ci.upper > 0.0);
}

TEST_CASE("eval_rmse repetitions") {
  Rng rng(3);
  const Dataset ds = correlated_normals(0.5, 10, 10, rng);
  const CopulaPolicy p{standard_marginals(1, 2), pair(0.5)};
  const EvalReport r = eval_rmse(p, ds, 1, {1, 2, 3});
  CHECK(r.repetitions.size() == 3);
  CHECK(r.sd > 0.0);
  CHECK(r.metric == "rmse[n_samples=1]");
  const EvalReport again = eval_rmse(p, ds, 1, {1, 2, 3});
  CHECK(again.repetitions == r.repetitions);
  CHECK(again.fingerprint == r.fingerprint);
  CHECK(eval_rmse(p, ds, 1, {1}).sd == 0.0);
  CHECK(prediction_errors(p, ds, 1, 9).sum_sq == prediction_errors(p, ds, 1, 9).sum_sq);
}

TEST_CASE("paired bootstrap") {
  PredictionErrors a;
  PredictionErrors b;
  Rng rng(4);
  for (int j = 0; j < 60; ++j) {
    const double base = 1.0 + uniform01(rng);
    a.sum_sq.push_back(10.0 * base);
    b.sum_sq.push_back(10.0 * base * 1.2);
    a.count.push_back(10);
    b.count.push_back(10);
  }
  const BootstrapInterval same = paired_bootstrap_rmse_difference(a, a, 500, 0.95, 1);
  CHECK(same.estimate == 0.0);
  CHECK(same.lower == 0.0);
  CHECK(same.upper == 0.0);
  const BootstrapInterval d = paired_bootstrap_rmse_difference(a, b, 500, 0.95, 1);
  CHECK(d.estimate == doctest::Approx(a.rmse() - b.rmse()));
  CHECK(d.upper < 0.0);
  CHECK(d.lower <= d.estimate);
  CHECK(d.upper >= d.estimate);
  b.sum_sq.pop_back();
  b.count.pop_back();
  CHECK_THROWS_AS(paired_bootstrap_rmse_difference(a, b, 500, 0.95, 1), ShapeError);
}

TEST_CASE("NLL") {
  Rng rng(5);
  SUBCASE("generator entropy rate") {
    const CopulaPolicy p{standard_marginals(1, 2), IndependenceCopula{2}};
    const Dataset ds = correlated_normals(0.0, 100, 50, rng);
    CHECK(std::abs(eval_nll(p, ds).value - std::log(2.0 * M_PI * M_E)) < 0.1);
    CHECK(eval_nll(p, ds).metric == "nll[copula=uniform]");
  }
  SUBCASE("uniform copula equals the marginal-only NLL") {
    const CopulaPolicy p{standard_marginals(1, 2), IndependenceCopula{2}};
    const Dataset ds = correlated_normals(0.3, 5, 20, rng);
    double marg = 0.0;
    for (const auto& t : ds.trajectories) {
      for (const auto& st : t.steps) marg -= marginal_log_likelihood(p.marginals, st.state, st.action);
    }
    CHECK(mean_nll(p, ds) == marg / 100.0);
  }
  SUBCASE("copulas lower the NLL of correlated data") {
    const Dataset ds = correlated_normals(0.9, 100, 50, rng);
    const double mi = -0.5 * std::log(1.0 - 0.81);
    const CopulaPolicy indep{standard_marginals(1, 2), IndependenceCopula{2}};
    const CopulaPolicy gauss{standard_marginals(1, 2), pair(0.9)};
    Eigen::MatrixXd u(2, 5000);
    const Dataset fit = correlated_normals(0.9, 100, 50, rng);
    Eigen::Index c = 0;
    for (const auto& t : fit.trajectories) {
      for (const auto& st : t.steps) u.col(c++) = pit(indep.marginals, st.state, st.action);
    }
    const CopulaPolicy kde{standard_marginals(1, 2), kde_fit(u)};
    CHECK(std::abs(mean_nll(indep, ds) - mean_nll(gauss, ds) - mi) < 0.05);
    CHECK(mean_nll(indep, ds) - mean_nll(kde, ds) >= 0.5 * mi);
  }
  SUBCASE("differing normalizations are reconciled by the log-Jacobian") {
    const CopulaPolicy p{standard_marginals(1, 2), pair(0.4)};
    Dataset ds = correlated_normals(0.4, 4, 10, rng);
    ds.meta.normalization.action_min = Eigen::Vector2d(-3.0, -2.0);
    ds.meta.normalization.action_max = Eigen::Vector2d(1.0, 4.0);
    ds.meta.normalization.state_min = Eigen::VectorXd::Constant(1, -2.0);
    ds.meta.normalization.state_max = Eigen::VectorXd::Constant(1, 2.0);
    // Raw data equals the policy's units; test units are y = 2 (a - min) / span - 1.
    double sum = 0.0;
    for (const auto& t : ds.trajectories) {
      for (const auto& st : t.steps) sum -= joint_log_likelihood(p, st.state, st.action);
    }
    const double jacobian = std::log(4.0 / 2.0) + std::log(6.0 / 2.0);
    CHECK(mean_nll(p, ds) == doctest::Approx(sum / 40.0 - jacobian).epsilon(1e-12));
  }
}

TEST_CASE("four-way swap") {
  Rng rng(6);
  const Dataset ds = correlated_normals(0.6, 5, 20, rng);
  const CopulaPolicy p{standard_marginals(1, 2), pair(0.6)};
  const auto same = eval_swap(p, p, ds);
  for (const auto& r : same) CHECK(r.value == same[0].value);
  CHECK(same[1].metric == "nll[marginals=old,copula=new]");

  CopulaPolicy q = p;
  q.marginals.net.b2.array() += 0.5;
  const CopulaPolicy indep{standard_marginals(1, 2), IndependenceCopula{2}};
  const auto mixed = eval_swap(q, indep, ds);
  CHECK(mixed[0].value == mean_nll(q, ds));
  CHECK(mixed[1].value == mean_nll(CopulaPolicy{q.marginals, indep.copula}, ds));
  CHECK(mixed[2].value == mean_nll(CopulaPolicy{indep.marginals, q.copula}, ds));
  CHECK(mixed[3].value == mean_nll(indep, ds));
  CHECK_THROWS_AS(eval_swap(p, CopulaPolicy{standard_marginals(1, 3), IndependenceCopula{3}}, ds), ShapeError);
}

TEST_CASE("copula grid export") {
  const CopulaPolicy flat{standard_marginals(1, 3), IndependenceCopula{3}};
  const Eigen::MatrixXd ones = export_copula_grid(flat, 0, 2, 10);
  CHECK(ones == Eigen::MatrixXd::Ones(10, 10));

  const CopulaPolicy g{standard_marginals(1, 2), pair(0.8)};
  const Eigen::MatrixXd grid = export_copula_grid(g, 0, 1, 50);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) {
      worst = std::max(worst, std::abs(grid(i, j) - test::gaussian_copula_density((i + 0.5) / 50, (j + 0.5) / 50, 0.8)));
    }
  }
  CHECK(worst < 1e-3);
  CHECK(std::abs(grid.mean() - 1.0) < 0.05);

  const std::string text = render_grid(grid, 0, 1, "gaussian");
  CHECK(text.rfind("#", 0) == 0);
  int rows = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto end = text.find('\n', pos);
    if (text[pos] != '#') ++rows;
    pos = end + 1;
  }
  CHECK(rows == 50);

  CHECK_THROWS_AS(export_copula_grid(g, 1, 1, 10), DomainError);
  CHECK_THROWS_AS(export_copula_grid(g, 0, 2, 10), DomainError);
  const CopulaPolicy needs_state{standard_marginals(1, 2), gmc_init(1, 2, 2, 4, 3)};
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd m = export_copula_grid(needs_state, 0, 1, 40, &s);
  CHECK(std::abs(m.mean() - 1.0) < 0.05);
}

}  // TEST_SUITE
