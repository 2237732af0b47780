#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "blp/diagnostics.hpp"
#include "test_util.hpp"

namespace blp {
namespace {

using testing::expect_error;
using testing::random_design;
using testing::random_spd;

PosteriorDraws standard_draws(const DesignSet& d, const Matrix& coeffs, const Matrix& sigma_packed) {
  PosteriorDraws p;
  p.spec = ProjectionSpec::with_horizons(0, static_cast<int>(d.horizon_count()) - 1);
  p.regressors = d.regressors();
  p.sequence_length = static_cast<int>(d.horizon_count());
  p.coeffs = coeffs;
  p.sigma = sigma_packed;
  return p;
}

Matrix repeat_row(const Vector& v, Eigen::Index rows) { return v.transpose().replicate(rows, 1); }

TEST(Quantile, TypeSevenInterpolation) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.5), 2.5);
  expect_error(ErrorKind::EmptyDraws, [] { quantile_sorted({}, 0.5); });
}

TEST(SummarizeIrf, IdenticalDrawsGiveZeroWidth) {
  Matrix paths = repeat_row(Vector::LinSpaced(4, 1, 4), 50);
  const auto s = summarize_paths(paths, {0, 1, 2, 3});
  EXPECT_EQ(s.q025, s.q975);
  EXPECT_EQ(s.q05, Vector::LinSpaced(4, 1, 4));
  EXPECT_EQ(s.mean, Vector::LinSpaced(4, 1, 4));
}

TEST(SummarizeIrf, StandardNormalQuantiles) {
  RngStream rng(1, 0);
  const Eigen::Index n = 100'000;
  Matrix paths(n, 3);
  for (Eigen::Index s = 0; s < n; ++s)
    for (Eigen::Index i = 0; i < 3; ++i) paths(s, i) = rng.normal();
  const auto sum = summarize_paths(paths, {0, 1, 2});
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(sum.q05(i), -1.6448536269514722, 0.02);
    EXPECT_NEAR(sum.q975(i), 1.959963984540054, 0.03);
    EXPECT_LE(sum.q025(i), sum.q05(i));
    EXPECT_LE(sum.q05(i), sum.mean(i));
    EXPECT_LE(sum.mean(i), sum.q95(i));
    EXPECT_LE(sum.q95(i), sum.q975(i));
  }
}

TEST(SummarizeIrf, EmptyDraws) {
  PosteriorDraws p;
  p.regressors = 2;
  expect_error(ErrorKind::EmptyDraws, [&] { summarize_irf(p); });
}

TEST(SummarizeIrf, DegreeZeroSplineEqualsStandard) {
  RngStream rng(2, 0);
  const auto d = random_design(20, 2, 4, rng);
  const Matrix coeffs = Matrix::Random(200, 8);
  const auto standard = standard_draws(d, coeffs, Matrix::Ones(200, 10));
  PosteriorDraws spline = standard;
  spline.basis = horizon_basis(standard.spec.horizons, 0);
  Matrix permuted(200, 8);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) permuted.col(j * 4 + i) = coeffs.col(i * 2 + j);
  spline.coeffs = permuted;
  for (Eigen::Index j = 0; j < 2; ++j) {
    const auto a = summarize_irf(standard, j);
    const auto b = summarize_irf(spline, j);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.q025, b.q025);
    EXPECT_EQ(a.q975, b.q975);
  }
}

TEST(PointwiseLoglik, SumsToLogLikelihood) {
  RngStream rng(3, 0);
  const auto d = random_design(25, 3, 4, rng);
  Matrix coeffs(5, 12), sig(5, 10);
  for (Eigen::Index s = 0; s < 5; ++s) {
    coeffs.row(s) = rng.normal_vector(12).transpose();
    sig.row(s) = pack_lower(SymMatrix(random_spd(4, rng))).transpose();
  }
  const auto draws = standard_draws(d, coeffs, sig);
  const Matrix ll = pointwise_loglik(draws, d);
  ASSERT_EQ(ll.rows(), 5);
  ASSERT_EQ(ll.cols(), 25);
  for (Eigen::Index s = 0; s < 5; ++s) {
    const double total = log_likelihood(d, draws.coefficient_path(s), draws.sigma_at(s));
    EXPECT_NEAR(ll.row(s).sum(), total, 1e-8 * std::abs(total));
  }
  EXPECT_TRUE(ll.allFinite());
}

TEST(PointwiseLoglik, UnitVarianceZeroResidual) {
  DesignSet d;
  d.x = Matrix::Zero(3, 1);
  d.y = Matrix::Zero(3, 1);
  d.horizons = {0};
  const auto draws = standard_draws(d, Matrix::Zero(1, 1), Matrix::Ones(1, 1));
  const Matrix ll = pointwise_loglik(draws, d);
  for (Eigen::Index t = 0; t < 3; ++t) EXPECT_NEAR(ll(0, t), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(PointwiseLoglik, DimensionMismatch) {
  RngStream rng(4, 0);
  const auto d = random_design(10, 2, 3, rng);
  const auto draws = standard_draws(d, Matrix::Zero(2, 6), Matrix::Ones(2, 6));
  const auto other = random_design(10, 3, 3, rng);
  expect_error(ErrorKind::DimensionMismatch, [&] { pointwise_loglik(draws, other); });
}

TEST(Dic, DegenerateDrawsHaveZeroPenalty) {
  RngStream rng(5, 0);
  const auto d = random_design(20, 2, 3, rng);
  const Vector theta = rng.normal_vector(6);
  const SymMatrix sigma(random_spd(3, rng));
  const auto draws = standard_draws(d, repeat_row(theta, 30), repeat_row(pack_lower(sigma), 30));
  const auto r = dic(draws, d);
  const double ll = log_likelihood(d, draws.path_of(theta), sigma);
  EXPECT_NEAR(r.p_dic, 0.0, 1e-9);
  EXPECT_NEAR(r.dic, -2.0 * ll, 1e-9 * std::abs(ll));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Waic, DegenerateDrawsHaveZeroPenalty) {
  RngStream rng(6, 0);
  const auto d = random_design(20, 2, 3, rng);
  const Vector theta = rng.normal_vector(6);
  const SymMatrix sigma(random_spd(3, rng));
  const auto draws = standard_draws(d, repeat_row(theta, 30), repeat_row(pack_lower(sigma), 30));
  const auto r = waic(draws, d);
  const double ll = log_likelihood(d, draws.path_of(theta), sigma);
  EXPECT_NEAR(r.p_waic, 0.0, 1e-18);
  EXPECT_NEAR(r.waic, -2.0 * ll, 1e-9 * std::abs(ll));
}

TEST(Waic, ShiftIdentity) {
  RngStream rng(7, 0);
  Matrix ll(200, 15);
  for (Eigen::Index s = 0; s < 200; ++s)
    for (Eigen::Index t = 0; t < 15; ++t) ll(s, t) = rng.normal() - 3.0;
  const auto a = waic_from_pointwise(ll);
  const auto b = waic_from_pointwise(ll.array() + 10000.0);
  EXPECT_NEAR(b.lppd - a.lppd, 10000.0 * 15, 1e-8);
  EXPECT_NEAR(b.p_waic, a.p_waic, 1e-6);
  EXPECT_GE(a.p_waic, 0.0);
}

TEST(FitReport, DeterministicAndFinite) {
  RngStream rng(8, 0);
  const auto d = random_design(40, 2, 4, rng);
  const StandardProjection model(d, ProjectionSpec::with_horizons(0, 3));
  SamplerConfig cfg;
  cfg.n_draws = 300;
  cfg.n_burnin = 50;
  const auto draws = run_gibbs(model, cfg);
  const auto a = fit_report(draws, d);
  const auto b = fit_report(draws, d);
  EXPECT_EQ(a.dic, b.dic);
  EXPECT_EQ(a.waic, b.waic);
  EXPECT_EQ(a.lppd, b.lppd);
  EXPECT_TRUE(std::isfinite(a.dic) && std::isfinite(a.waic));
  EXPECT_GE(a.p_waic, 0.0);
  EXPECT_GT(a.p_dic, 0.0);
}

TEST(EffectiveSampleSize, IndependentAndAutocorrelated) {
  RngStream rng(9, 0);
  const Eigen::Index n = 50'000;
  const Vector iid = rng.normal_vector(n);
  EXPECT_NEAR(effective_sample_size(iid) / n, 1.0, 0.1);
  Vector ar(n);
  ar(0) = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) ar(i) = 0.9 * ar(i - 1) + rng.normal();
  // AR(1): n (1 - rho) / (1 + rho)
  EXPECT_NEAR(effective_sample_size(ar) / (n / 19.0), 1.0, 0.15);
  EXPECT_EQ(effective_sample_size(Vector::Ones(100)), 100.0);
}

}  // namespace
}  // namespace blp
