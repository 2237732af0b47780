#include <gtest/gtest.h>

#include <cmath>

#include "blp/simulate.hpp"
#include "test_util.hpp"

namespace blp {
namespace {

using testing::expect_error;

TEST(TrueIrf, HandEvaluatedCase) {
  const Vector b = gen_true_irf(2, std::log(2.0));
  EXPECT_NEAR(b(0), 0.0, 1e-15);
  EXPECT_NEAR(b(1), 0.5, 1e-15);
  EXPECT_NEAR(b(2), 0.5, 1e-15);
}

TEST(TrueIrf, ShapeOverCurvatureGrid) {
  for (double r = 0.1; r <= 1.0 + 1e-12; r += 0.05) {
    const Vector b = gen_true_irf(20, std::min(r, 1.0));
    EXPECT_EQ(b(0), 0.0);
    EXPECT_NEAR(b.sum(), 1.0, 1e-12);
    EXPECT_GE(b.minCoeff(), 0.0);
    Eigen::Index peak = 0;
    b.maxCoeff(&peak);
    for (Eigen::Index l = 1; l <= peak; ++l) EXPECT_GE(b(l), b(l - 1));
    for (Eigen::Index l = peak + 1; l < b.size(); ++l) EXPECT_LE(b(l), b(l - 1));
  }
}

TEST(TrueIrf, RejectsBadInputs) {
  expect_error(ErrorKind::InvalidParameter, [] { gen_true_irf(0, 0.5); });
  expect_error(ErrorKind::InvalidParameter, [] { gen_true_irf(20, 0.05); });
  expect_error(ErrorKind::InvalidParameter, [] { gen_true_irf(20, 1.5); });
}

TEST(SimulateLinear, ImpulseTracesIrf) {
  const Vector beta = gen_true_irf(5, 0.4);
  Vector z = Vector::Zero(30 + 5);
  z(5 + 3) = 1.0;  // z_3 = 1
  const Vector y = moving_average_linear(z, Vector::Zero(30), beta);
  for (Eigen::Index l = 0; l <= 5; ++l) EXPECT_DOUBLE_EQ(y(3 + l), beta(l));
  EXPECT_EQ(y.head(3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(y.tail(30 - 9).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SimulateLinear, LengthsAndShockVariance) {
  DgpSpec dgp;
  dgp.t_eff = 1'000'000;
  RngStream rng(1, 0);
  const auto d = simulate_linear(dgp, rng);
  EXPECT_EQ(d.y.size(), dgp.t_eff + 20 + 4);
  EXPECT_EQ(d.z.size(), d.y.size());
  const double mean = d.z.mean();
  const double var = (d.z.array() - mean).square().mean();
  EXPECT_NEAR(var, 1.0, 5 * std::sqrt(2.0 / 1e6));
}

TEST(SimulateLinear, Reproducible) {
  DgpSpec dgp;
  RngStream a(7, 2), b(7, 2);
  const auto x = simulate_linear(dgp, a);
  const auto y = simulate_linear(dgp, b);
  EXPECT_EQ(x.y, y.y);
  EXPECT_EQ(x.z, y.z);
  EXPECT_EQ(x.truth.regime1, y.truth.regime1);
}

TEST(SimulateAsymmetric, EqualRegimesCollapseToLinear) {
  DgpSpec dgp;
  dgp.r_shape = 0.5;
  dgp.kind = DgpKind::Asymmetric;
  RngStream a(3, 0), b(3, 0);
  const auto asym = simulate_asymmetric(dgp, a);
  dgp.kind = DgpKind::Linear;
  const auto lin = simulate_linear(dgp, b);
  EXPECT_EQ(asym.y, lin.y);
}

TEST(SimulateAsymmetric, PositiveShocksUseSecondRegime) {
  RngStream rng(4, 0);
  const TrueIrf irf{gen_true_irf(6, 0.2), gen_true_irf(6, 0.9)};
  const Vector z = rng.normal_vector(40 + 6).cwiseAbs();
  const Vector eps = rng.normal_vector(40);
  EXPECT_EQ(moving_average_asymmetric(z, eps, irf), moving_average_linear(z, eps, irf.regime2));
  EXPECT_EQ(moving_average_asymmetric(-z, eps, irf), moving_average_linear(-z, eps, irf.regime1));
}

TEST(SimulateAsymmetric, Reproducible) {
  DgpSpec dgp;
  dgp.kind = DgpKind::Asymmetric;
  RngStream a(5, 1), b(5, 1);
  EXPECT_EQ(simulate(dgp, a).y, simulate(dgp, b).y);
}

TEST(SimulateStateDependent, EqualRegimesCollapseToLinear) {
  RngStream rng(6, 0);
  const Vector beta = gen_true_irf(8, 0.3);
  const Vector z = rng.normal_vector(50 + 8);
  const Vector eps = rng.normal_vector(50);
  const Vector a = moving_average_state_dependent(z, eps, TrueIrf{beta, beta});
  EXPECT_LT((a - moving_average_linear(z, eps, beta)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SimulateStateDependent, ZeroShocksLeaveNoise) {
  RngStream rng(7, 0);
  const TrueIrf irf{gen_true_irf(8, 0.3), gen_true_irf(8, 0.8)};
  const Vector eps = rng.normal_vector(50);
  EXPECT_EQ(moving_average_state_dependent(Vector::Zero(58), eps, irf), eps);
}

TEST(SimulateStateDependent, RegimeFollowsLaggedSign) {
  // L = 1: y_t = eps_t + beta_1[regime(y_{t-1})] z_{t-1}.
  TrueIrf irf{Vector(2), Vector(2)};
  irf.regime1 << 0.0, 10.0;
  irf.regime2 << 0.0, 1.0;
  Vector z(4);
  z << 0.0, 1.0, 1.0, 1.0;  // burn-in z_{-1} = 0
  Vector eps(3);
  eps << -1.0, 0.5, 0.0;
  const Vector y = moving_average_state_dependent(z, eps, irf);
  EXPECT_DOUBLE_EQ(y(0), -1.0);        // pre-sample y = 0 is regime 2, z_{-1} = 0
  EXPECT_DOUBLE_EQ(y(1), 0.5 + 10.0);  // y_0 < 0
  EXPECT_DOUBLE_EQ(y(2), 0.0 + 1.0);   // y_1 >= 0
}

TEST(SimulateStateDependent, Reproducible) {
  DgpSpec dgp;
  dgp.kind = DgpKind::StateDependent;
  RngStream a(8, 1), b(8, 1);
  EXPECT_EQ(simulate(dgp, a).y, simulate(dgp, b).y);
}

TEST(DgpSpec, Validation) {
  DgpSpec dgp;
  dgp.t_eff = 10;
  expect_error(ErrorKind::InvalidParameter, [&] { dgp.validate(); });
  expect_error(ErrorKind::ConfigError, [] { parse_dgp("quadratic"); });
  EXPECT_EQ(parse_dgp("state_dependent"), DgpKind::StateDependent);
}

TEST(Metrics, MseExamples) {
  const Matrix t = Matrix::Random(3, 21);
  EXPECT_EQ(metric_mse(t, t), 0.0);
  const Matrix one = Matrix::Zero(1, 21);
  EXPECT_NEAR(metric_mse(one.array() + 0.1, one), 0.21, 1e-15);
  expect_error(ErrorKind::DimensionMismatch, [&] { metric_mse(t, one); });
}

TEST(Metrics, CoverageExamples) {
  const Matrix t = Matrix::Zero(4, 21);
  const Matrix lo = Matrix::Constant(4, 21, -1.0);
  const Matrix hi = Matrix::Constant(4, 21, 1.0);
  EXPECT_EQ(metric_coverage(lo, hi, t), 1.0);
  EXPECT_DOUBLE_EQ(metric_coverage(lo, hi, t, Normalization::LagCount), 21.0 / 20.0);
  EXPECT_EQ(metric_coverage(lo.array() + 5.0, hi.array() + 5.0, t), 0.0);
  EXPECT_EQ(metric_coverage(t, hi, t), 0.0);
  EXPECT_EQ(metric_coverage(lo, t, t), 0.0);
}

TEST(Metrics, LengthExamples) {
  const Matrix z = Matrix::Zero(5, 21);
  EXPECT_EQ(metric_length(z, z), 0.0);
  EXPECT_NEAR(metric_length(z, z.array() + 0.23), 0.23, 1e-15);
}

TEST(Metrics, MatchDirectLoops) {
  RngStream rng(9, 0);
  const Eigen::Index m = 17, h = 21;
  Matrix est(m, h), tr(m, h), lo(m, h), hi(m, h);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index l = 0; l < h; ++l) {
      est(i, l) = rng.normal();
      tr(i, l) = rng.normal();
      lo(i, l) = est(i, l) - rng.uniform();
      hi(i, l) = est(i, l) + rng.uniform();
    }
  double mse = 0, cover = 0, len = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double row = 0;
    for (Eigen::Index l = 0; l < h; ++l) {
      row += (est(i, l) - tr(i, l)) * (est(i, l) - tr(i, l));
      if (lo(i, l) < tr(i, l) && hi(i, l) > tr(i, l)) cover += 1;
      len += hi(i, l) - lo(i, l);
    }
    mse += row;
  }
  EXPECT_NEAR(metric_mse(est, tr), mse / m, 1e-12);
  EXPECT_NEAR(metric_coverage(lo, hi, tr), cover / (m * h), 1e-12);
  EXPECT_NEAR(metric_length(lo, hi), len / (m * h), 1e-12);
}

ExperimentCell small_cell(PriorKind prior) {
  ExperimentCell c;
  c.dgp.t_eff = 60;
  c.dgp.max_lag = 6;
  c.dgp.seed = 11;
  c.projection.prior = prior;
  c.sampler.n_draws = 200;
  c.sampler.n_burnin = 50;
  return c;
}

TEST(RunExperiment, SingleReplicationIsDeterministic) {
  const std::vector<ExperimentCell> cells{small_cell(PriorKind::Normal), small_cell(PriorKind::NonAdaptiveRP)};
  const auto a = run_experiment(cells, 1);
  const auto b = run_experiment(cells, 1);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a[i].mse, b[i].mse);
    EXPECT_EQ(a[i].coverage, b[i].coverage);
    EXPECT_EQ(a[i].length, b[i].length);
    EXPECT_EQ(a[i].failures, 0);
    EXPECT_GE(a[i].mse, 0.0);
    EXPECT_GE(a[i].coverage, 0.0);
    EXPECT_LE(a[i].coverage, 1.0);
  }
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  const std::vector<ExperimentCell> cells{small_cell(PriorKind::AdaptiveRP)};
  const auto a = run_experiment(cells, 3, 1);
  const auto b = run_experiment(cells, 3, 3);
  EXPECT_EQ(a[0].mse, b[0].mse);
  EXPECT_EQ(a[0].length, b[0].length);
}

TEST(RunExperiment, FailuresAreCountedNotDropped) {
  auto cell = small_cell(PriorKind::Normal);
  cell.lags = 60;
  const auto r = run_experiment({cell}, 2);
  EXPECT_EQ(r[0].failures, 2);
  EXPECT_EQ(r[0].replications, 0);
  ASSERT_EQ(r[0].failure_messages.size(), 2u);
  EXPECT_NE(r[0].failure_messages[0].find("InsufficientData"), std::string::npos);
  expect_error(ErrorKind::ConfigError, [] { run_experiment({}, 1); });
}

TEST(RunExperiment, NoiselessLinearDgpIsCoveredByIntervals) {
  auto cell = small_cell(PriorKind::NonAdaptiveRP);
  cell.dgp.noise_sd = 0.0;
  cell.dgp.t_eff = 400;
  cell.dgp.max_lag = 20;
  cell.sampler.n_draws = 2000;
  cell.sampler.n_burnin = 500;
  const auto rep = run_replication(cell, 0);
  int inside = 0;
  for (Eigen::Index l = 0; l < rep.mean.size(); ++l) {
    const double t = rep.truth.regime1(l);
    if (rep.q05(l) <= t && t <= rep.q95(l)) ++inside;
  }
  EXPECT_GE(inside, static_cast<int>(std::ceil(0.95 * static_cast<double>(rep.mean.size()))));
}

}  // namespace
}  // namespace blp
