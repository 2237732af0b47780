#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "blp/kernel.hpp"
#include "blp/model.hpp"
#include "blp/sampler.hpp"

namespace blp {

/// Type-7 (linear interpolation) quantile of an ascending-sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  require(!sorted.empty(), ErrorKind::EmptyDraws, "quantile of empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct IrfSummary {
  std::vector<int> horizons;
  Vector mean;
  Vector q025;
  Vector q05;
  Vector q95;
  Vector q975;
};

/// Per-column mean and quantiles of an S x H matrix of response-path draws.
inline IrfSummary summarize_paths(const Matrix& paths, const std::vector<int>& horizons) {
  require(paths.rows() > 0, ErrorKind::EmptyDraws, "no draws to summarize");
  const Eigen::Index h = paths.cols();
  IrfSummary s{horizons, Vector(h), Vector(h), Vector(h), Vector(h), Vector(h)};
  std::vector<double> col(static_cast<std::size_t>(paths.rows()));
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index r = 0; r < paths.rows(); ++r) col[static_cast<std::size_t>(r)] = paths(r, i);
    std::sort(col.begin(), col.end());
    s.mean(i) = paths.col(i).mean();
    s.q025(i) = quantile_sorted(col, 0.025);
    s.q05(i) = quantile_sorted(col, 0.05);
    s.q95(i) = quantile_sorted(col, 0.95);
    s.q975(i) = quantile_sorted(col, 0.975);
  }
  return s;
}

/// Summary of coefficient j's path (j = 0 is the impulse response). Spline
/// draws are mapped through the basis first.
inline IrfSummary summarize_irf(const PosteriorDraws& draws, Eigen::Index j = 0) {
  require(draws.size() > 0, ErrorKind::EmptyDraws, "no draws to summarize");
  return summarize_paths(draws.irf_draws(j), draws.spec.horizons);
}

/// Entry (s, t): log N(y_t; (I_H (x) x_t^T) theta^(s), Sigma^(s)).
inline Matrix pointwise_loglik(const PosteriorDraws& draws, const DesignSet& design) {
  require(draws.size() > 0, ErrorKind::EmptyDraws, "no draws");
  require(draws.horizon_count() == design.horizon_count() && draws.regressors == design.regressors(),
          ErrorKind::DimensionMismatch, "draws and design disagree on H or J");
  const Eigen::Index t = design.t_eff();
  const double h = static_cast<double>(design.horizon_count());
  const double c0 = -0.5 * h * std::log(2.0 * std::numbers::pi);
  Matrix ll(draws.size(), t);
  for (Eigen::Index s = 0; s < draws.size(); ++s) {
    const auto chol = cholesky_lower(draws.sigma_at(s));
    const Matrix ut = residuals(design, draws.coefficient_path(s)).transpose();  // H x T
    const Matrix z = chol.lower().triangularView<Eigen::Lower>().solve(ut);
    ll.row(s) = (c0 - 0.5 * chol.log_det() - 0.5 * z.colwise().squaredNorm().array()).matrix();
  }
  return ll;
}

inline double log_mean_exp(const Eigen::Ref<const Vector>& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().mean());
}

struct FitReport {
  double dic = 0.0;
  double waic = 0.0;
  double lppd = 0.0;
  double p_dic = 0.0;
  double p_waic = 0.0;
  double loglik_at_mean = 0.0;
  double mean_loglik = 0.0;
  std::vector<std::string> warnings;
};

/// DIC with the plug-in at the posterior mean of (coefficients, Sigma).
inline FitReport dic(const PosteriorDraws& draws, const DesignSet& design) {
  require(draws.size() > 0, ErrorKind::EmptyDraws, "no draws");
  const Matrix ll = pointwise_loglik(draws, design);
  const double mean_ll = ll.rowwise().sum().mean();

  const Vector mean_coeffs = draws.coeffs.colwise().mean().transpose();
  const Vector mean_sigma_packed = draws.sigma.colwise().mean().transpose();
  const Eigen::Index h = draws.horizon_count();
  Matrix sigma_bar = Matrix::Zero(h, h);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) sigma_bar(i, k) = mean_sigma_packed(c++);
  const double ll_bar = log_likelihood(design, draws.path_of(mean_coeffs), SymMatrix(sigma_bar));

  FitReport r;
  r.loglik_at_mean = ll_bar;
  r.mean_loglik = mean_ll;
  r.p_dic = 2.0 * (ll_bar - mean_ll);
  r.dic = -2.0 * ll_bar + 2.0 * r.p_dic;
  if (r.p_dic < 0.0) r.warnings.push_back("negative p_D: posterior far from normal");
  return r;
}

/// WAIC from an S x T pointwise log-likelihood matrix.
inline FitReport waic_from_pointwise(const Matrix& ll) {
  require(ll.rows() > 0, ErrorKind::EmptyDraws, "no draws");
  FitReport r;
  for (Eigen::Index t = 0; t < ll.cols(); ++t) {
    const auto col = ll.col(t);
    r.lppd += log_mean_exp(col);
    if (ll.rows() > 1) {
      const double mu = col.mean();
      r.p_waic += (col.array() - mu).square().sum() / static_cast<double>(ll.rows() - 1);
    }
  }
  r.waic = -2.0 * (r.lppd - r.p_waic);
  return r;
}

inline FitReport waic(const PosteriorDraws& draws, const DesignSet& design) {
  return waic_from_pointwise(pointwise_loglik(draws, design));
}

inline FitReport fit_report(const PosteriorDraws& draws, const DesignSet& design) {
  FitReport r = dic(draws, design);
  const FitReport w = waic(draws, design);
  r.waic = w.waic;
  r.lppd = w.lppd;
  r.p_waic = w.p_waic;
  return r;
}

/// Effective sample size with Geyer's initial monotone positive sequence.
inline double effective_sample_size(const Eigen::Ref<const Vector>& x) {
  const Eigen::Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Vector c = x.array() - x.mean();
  const double var0 = c.squaredNorm() / static_cast<double>(n);
  if (var0 <= 0.0) return static_cast<double>(n);
  auto rho = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / (static_cast<double>(n) * var0);
  };
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    sum += pair;
    prev_pair = pair;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

}  // namespace blp
