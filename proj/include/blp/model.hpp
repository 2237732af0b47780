#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blp/basis.hpp"
#include "blp/error.hpp"
#include "blp/kernel.hpp"

namespace blp {

enum class PriorKind { Normal, NonAdaptiveRP, AdaptiveRP };

inline std::string_view to_string(PriorKind p) {
  switch (p) {
    case PriorKind::Normal: return "normal";
    case PriorKind::NonAdaptiveRP: return "nrp";
    case PriorKind::AdaptiveRP: return "arp";
  }
  return "unknown";
}

inline PriorKind parse_prior(std::string_view s) {
  if (s == "normal") return PriorKind::Normal;
  if (s == "nrp" || s == "n-rp") return PriorKind::NonAdaptiveRP;
  if (s == "arp" || s == "a-rp") return PriorKind::AdaptiveRP;
  fail(ErrorKind::ConfigError, "unknown prior '" + std::string(s) + "' (expected normal|nrp|arp)");
}

inline bool is_roughness_prior(PriorKind p) { return p != PriorKind::Normal; }

struct Hyperparameters {
  double nu1 = 0.01;
  double nu2 = 0.01;
  double eta1 = 0.5;
  double eta2 = 0.5;
  std::optional<double> xi;  // inverse-Wishart dof; defaults to H + 2
  double xi_scale = 1.0;     // inverse-Wishart scale is xi_scale * I_H
};

struct SplineSettings {
  int degree = 3;
  KnotMode knots = KnotMode::FullSupport;
};

struct ProjectionSpec {
  std::vector<int> horizons;
  int penalty_order = 2;
  PriorKind prior = PriorKind::NonAdaptiveRP;
  double normal_variance = 100.0;
  Hyperparameters hyper;
  std::optional<SplineSettings> spline;

  int horizon_count() const { return static_cast<int>(horizons.size()); }
  int max_horizon() const { return horizons.back(); }
  double iw_dof() const { return hyper.xi.value_or(horizon_count() + 2.0); }

  static ProjectionSpec with_horizons(int first, int last) {
    ProjectionSpec s;
    for (int h = first; h <= last; ++h) s.horizons.push_back(h);
    return s;
  }

  void validate() const {
    require(!horizons.empty(), ErrorKind::InvalidParameter, "projection needs at least one horizon");
    require(horizons.front() >= 0, ErrorKind::InvalidParameter, "horizons must be >= 0");
    for (std::size_t i = 1; i < horizons.size(); ++i)
      require(horizons[i] > horizons[i - 1], ErrorKind::InvalidParameter,
              "horizons must be strictly increasing");
    if (is_roughness_prior(prior) && !spline)
      require(penalty_order >= 1 && penalty_order < horizon_count(), ErrorKind::InvalidOrder,
              "penalty order must satisfy 1 <= r < H");
    const auto& h = hyper;
    require(h.nu1 > 0 && h.nu2 > 0 && h.eta1 > 0 && h.eta2 > 0 && h.xi_scale > 0 &&
                normal_variance > 0,
            ErrorKind::InvalidParameter, "hyperparameters must be strictly positive");
    require(iw_dof() > horizon_count() - 1, ErrorKind::InvalidParameter,
            "inverse-Wishart dof must exceed H - 1");
  }
};

/// Raw inputs for a local projection. `lagged` series enter with lags
/// 1..lags; `contemporaneous` series enter at time t (e.g. a trend).
struct SeriesBundle {
  Vector response;
  Vector shock;
  std::vector<Vector> lagged;
  std::vector<Vector> contemporaneous;
};

/// Aligned SUR-form design: row t pairs x_t with (y_{t+h_1}, ..., y_{t+h_H}).
struct DesignSet {
  Matrix x;  // T_eff x J: shock, intercept, then covariates
  Matrix y;  // T_eff x H
  std::vector<int> horizons;

  Eigen::Index t_eff() const { return x.rows(); }
  Eigen::Index regressors() const { return x.cols(); }
  Eigen::Index horizon_count() const { return y.cols(); }
};

inline DesignSet build_design(const SeriesBundle& raw, const ProjectionSpec& spec, int lags) {
  spec.validate();
  require(lags >= 0, ErrorKind::InvalidParameter, "lags must be >= 0");
  const Eigen::Index n = raw.response.size();
  require(raw.shock.size() == n, ErrorKind::DimensionMismatch, "shock length differs from response");
  for (const auto& s : raw.lagged)
    require(s.size() == n, ErrorKind::DimensionMismatch, "lagged series length differs from response");
  for (const auto& s : raw.contemporaneous)
    require(s.size() == n, ErrorKind::DimensionMismatch, "covariate length differs from response");

  const Eigen::Index j_count = 2 + static_cast<Eigen::Index>(raw.contemporaneous.size()) +
                               static_cast<Eigen::Index>(raw.lagged.size()) * lags;
  const Eigen::Index t_eff = n - spec.max_horizon() - lags;
  require(t_eff >= j_count + 1, ErrorKind::InsufficientData,
          "effective sample " + std::to_string(t_eff) + " too short for " + std::to_string(j_count) +
              " regressors (raw length " + std::to_string(n) + ")");

  DesignSet d;
  d.horizons = spec.horizons;
  d.x.resize(t_eff, j_count);
  d.y.resize(t_eff, spec.horizon_count());
  for (Eigen::Index row = 0; row < t_eff; ++row) {
    const Eigen::Index t = row + lags;
    Eigen::Index col = 0;
    d.x(row, col++) = raw.shock(t);
    d.x(row, col++) = 1.0;
    for (const auto& s : raw.contemporaneous) d.x(row, col++) = s(t);
    for (const auto& s : raw.lagged)
      for (int l = 1; l <= lags; ++l) d.x(row, col++) = s(t - l);
    for (int i = 0; i < spec.horizon_count(); ++i) d.y(row, i) = raw.response(t + spec.horizons[i]);
  }
  for (Eigen::Index r = 0; r < d.x.size(); ++r)
    require(std::isfinite(d.x.data()[r]), ErrorKind::InsufficientData, "non-finite regressor cell");
  for (Eigen::Index r = 0; r < d.y.size(); ++r)
    require(std::isfinite(d.y.data()[r]), ErrorKind::InsufficientData, "non-finite response cell");
  return d;
}

struct PriorPrecision {
  Matrix q;
};

inline void check_smoothing(int n, int r, const Vector& tau, const std::vector<Vector>& lambda) {
  require(static_cast<std::size_t>(tau.size()) == lambda.size(), ErrorKind::DimensionMismatch,
          "tau and lambda must cover the same coefficients");
  for (Eigen::Index j = 0; j < tau.size(); ++j) {
    require(tau(j) > 0.0, ErrorKind::InvalidParameter, "tau must be positive");
    require(lambda[static_cast<std::size_t>(j)].size() == n - r, ErrorKind::DimensionMismatch,
            "lambda vectors must have length n - r");
    require((lambda[static_cast<std::size_t>(j)].array() > 0.0).all(), ErrorKind::InvalidParameter,
            "lambda must be positive");
  }
}

/// Sum_j (tau_j D^T Lambda_j D) (x) E_j for horizon-major theta (index i*J + j).
inline PriorPrecision assemble_q_standard(int horizons, int order, const Vector& tau,
                                          const std::vector<Vector>& lambda) {
  const auto d = difference_matrix(horizons, order);
  check_smoothing(horizons, order, tau, lambda);
  const Eigen::Index j_count = tau.size();
  Matrix q = Matrix::Zero(horizons * j_count, horizons * j_count);
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const Matrix block = tau(j) * (d.entries.transpose() *
                                   lambda[static_cast<std::size_t>(j)].asDiagonal() * d.entries);
    for (int i = 0; i < horizons; ++i)
      for (int k = 0; k < horizons; ++k) q(i * j_count + j, k * j_count + j) = block(i, k);
  }
  return PriorPrecision{std::move(q)};
}

/// blkdiag(tau_1 D^T Lambda_1 D, ..., tau_J D^T Lambda_J D) for coefficient-major vartheta.
inline PriorPrecision assemble_q_spline(int basis_size, int order, const Vector& tau,
                                        const std::vector<Vector>& lambda) {
  const auto d = difference_matrix(basis_size, order);
  check_smoothing(basis_size, order, tau, lambda);
  const Eigen::Index j_count = tau.size();
  Matrix q = Matrix::Zero(basis_size * j_count, basis_size * j_count);
  for (Eigen::Index j = 0; j < j_count; ++j)
    q.block(j * basis_size, j * basis_size, basis_size, basis_size) =
        tau(j) * (d.entries.transpose() * lambda[static_cast<std::size_t>(j)].asDiagonal() * d.entries);
  return PriorPrecision{std::move(q)};
}

/// The j-th coefficient (0-based) across all horizon blocks of theta.
inline Vector extract_sequence(const Vector& theta, Eigen::Index j, Eigen::Index regressors) {
  require(regressors > 0 && theta.size() % regressors == 0, ErrorKind::DimensionMismatch,
          "theta length not a multiple of J");
  require(j >= 0 && j < regressors, ErrorKind::IndexOutOfRange,
          "coefficient index " + std::to_string(j) + " outside [0, " + std::to_string(regressors) + ")");
  const Eigen::Index h = theta.size() / regressors;
  Vector out(h);
  for (Eigen::Index i = 0; i < h; ++i) out(i) = theta(i * regressors + j);
  return out;
}

inline Vector irf_from_spline(const Vector& b, const SplineBasis& basis) {
  require(b.size() == basis.size(), ErrorKind::DimensionMismatch,
          "spline coefficients length " + std::to_string(b.size()) + " vs basis size " +
              std::to_string(basis.size()));
  return basis.values * b;
}

/// T_eff x H realized residuals for the J x H coefficient path.
inline Matrix residuals(const DesignSet& design, const Matrix& coefficient_path) {
  require(coefficient_path.rows() == design.regressors() &&
              coefficient_path.cols() == design.horizon_count(),
          ErrorKind::DimensionMismatch, "coefficient path must be J x H");
  return design.y - design.x * coefficient_path;
}

/// -(HT/2) log 2pi - (T/2) log|Sigma| - 1/2 trace(U^T U Sigma^{-1}).
inline double log_likelihood(const DesignSet& design, const Matrix& coefficient_path,
                             const SymMatrix& sigma) {
  require(sigma.dim() == design.horizon_count(), ErrorKind::DimensionMismatch, "Sigma must be H x H");
  const auto chol = cholesky_lower(sigma);
  const Matrix u = residuals(design, coefficient_path);
  const Matrix utu = u.transpose() * u;
  const Matrix sigma_inv = inverse_from_factor(chol);
  const double t = static_cast<double>(design.t_eff());
  const double h = static_cast<double>(design.horizon_count());
  return -0.5 * h * t * std::log(2.0 * std::numbers::pi) - 0.5 * t * chol.log_det() -
         0.5 * (utu.cwiseProduct(sigma_inv)).sum();
}

/// Row t of the horizon-i spline block is x_t (x) phi(h_i).
inline Matrix spline_block(const DesignSet& design, const SplineBasis& basis, Eigen::Index i) {
  const Eigen::Index k = basis.size();
  Matrix block(design.t_eff(), design.regressors() * k);
  for (Eigen::Index j = 0; j < design.regressors(); ++j)
    block.middleCols(j * k, k) = design.x.col(j) * basis.values.row(i);
  return block;
}

// Least squares for a symmetric system, with a small ridge when the Gram
// matrix is singular.
inline constexpr double kRidgeFallback = 1e-6;

inline CholeskyFactor factor_with_ridge(const Matrix& gram) {
  try {
    return cholesky_lower(SymMatrix(gram));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NotPositiveDefinite) throw;
    return cholesky_lower(SymMatrix(gram + kRidgeFallback * Matrix::Identity(gram.rows(), gram.cols())));
  }
}

inline Matrix solve_with_factor(const CholeskyFactor& f, const Matrix& rhs) {
  Matrix out(rhs.rows(), rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) out.col(c) = solve_upper(f, solve_lower(f, rhs.col(c)));
  return out;
}

/// What the Gibbs sampler needs from a local projection variant.
template <class M>
concept ProjectionModel = requires(const M& m, const Vector& v, const Matrix& s, Eigen::Index j,
                                   const std::vector<Vector>& lam) {
  { m.design() } -> std::convertible_to<const DesignSet&>;
  { m.spec() } -> std::convertible_to<const ProjectionSpec&>;
  { m.dim() } -> std::convertible_to<Eigen::Index>;
  { m.sequence_length() } -> std::convertible_to<int>;
  { m.data_precision(s) } -> std::convertible_to<Matrix>;
  { m.data_rhs(s) } -> std::convertible_to<Vector>;
  { m.coefficient_path(v) } -> std::convertible_to<Matrix>;
  { m.sequence(v, j) } -> std::convertible_to<Vector>;
  { m.prior_precision(v, lam) } -> std::convertible_to<PriorPrecision>;
  { m.least_squares() } -> std::convertible_to<Vector>;
};

/// Local projection with one coefficient per (horizon, regressor).
class StandardProjection {
 public:
  StandardProjection(DesignSet design, ProjectionSpec spec)
      : design_(std::move(design)), spec_(std::move(spec)) {
    spec_.validate();
    require(design_.horizon_count() == spec_.horizon_count(), ErrorKind::DimensionMismatch,
            "design and spec disagree on H");
    xtx_ = design_.x.transpose() * design_.x;
    xty_ = design_.x.transpose() * design_.y;
  }

  const DesignSet& design() const { return design_; }
  const ProjectionSpec& spec() const { return spec_; }
  Eigen::Index regressors() const { return design_.regressors(); }
  Eigen::Index dim() const { return design_.regressors() * design_.horizon_count(); }
  int sequence_length() const { return static_cast<int>(design_.horizon_count()); }

  /// Sigma^{-1} (x) X^T X.
  Matrix data_precision(const Matrix& sigma_inv) const {
    const Eigen::Index j = regressors();
    const Eigen::Index h = design_.horizon_count();
    Matrix p(h * j, h * j);
    for (Eigen::Index b = 0; b < h; ++b)
      for (Eigen::Index a = 0; a < h; ++a) p.block(a * j, b * j, j, j) = sigma_inv(a, b) * xtx_;
    return p;
  }

  /// (Sigma^{-1} (x) X^T) y with y stacked horizon-major.
  Vector data_rhs(const Matrix& sigma_inv) const {
    const Matrix m = xty_ * sigma_inv;  // J x H, column i is block i
    return Eigen::Map<const Vector>(m.data(), m.size());
  }

  Matrix coefficient_path(const Vector& theta) const {
    return Eigen::Map<const Matrix>(theta.data(), regressors(), design_.horizon_count());
  }

  Vector sequence(const Vector& theta, Eigen::Index j) const {
    return extract_sequence(theta, j, regressors());
  }

  PriorPrecision prior_precision(const Vector& tau, const std::vector<Vector>& lambda) const {
    if (spec_.prior == PriorKind::Normal)
      return PriorPrecision{Matrix::Identity(dim(), dim()) / spec_.normal_variance};
    return assemble_q_standard(sequence_length(), spec_.penalty_order, tau, lambda);
  }

  /// Per-horizon OLS.
  Vector least_squares() const {
    const Matrix b = solve_with_factor(factor_with_ridge(xtx_), xty_);
    return Eigen::Map<const Vector>(b.data(), b.size());
  }

 private:
  DesignSet design_;
  ProjectionSpec spec_;
  Matrix xtx_;
  Matrix xty_;
};

/// Local projection whose coefficient sequences are B-spline expansions over
/// the horizons; vartheta is coefficient-major (index j*K + k).
class SplineProjection {
 public:
  SplineProjection(DesignSet design, ProjectionSpec spec)
      : design_(std::move(design)), spec_(std::move(spec)) {
    spec_.validate();
    require(spec_.spline.has_value(), ErrorKind::InvalidParameter, "spline settings missing");
    require(design_.horizon_count() == spec_.horizon_count(), ErrorKind::DimensionMismatch,
            "design and spec disagree on H");
    basis_ = horizon_basis(spec_.horizons, spec_.spline->degree, spec_.spline->knots);
    if (is_roughness_prior(spec_.prior))
      require(spec_.penalty_order >= 1 && spec_.penalty_order < basis_.size(), ErrorKind::InvalidOrder,
              "penalty order must satisfy 1 <= r < K");
    xtx_ = design_.x.transpose() * design_.x;
    xty_ = design_.x.transpose() * design_.y;
  }

  const DesignSet& design() const { return design_; }
  const ProjectionSpec& spec() const { return spec_; }
  const SplineBasis& basis() const { return basis_; }
  Eigen::Index regressors() const { return design_.regressors(); }
  Eigen::Index basis_size() const { return basis_.size(); }
  Eigen::Index dim() const { return regressors() * basis_size(); }
  int sequence_length() const { return static_cast<int>(basis_size()); }

  /// X~^T (Sigma^{-1} (x) I_T) X~. Since X~_(h) = X (x) phi(h)^T, the block sum
  /// sum_{i,i'} s_{ii'} X~_i^T X~_i' collapses to (X^T X) (x) (Phi^T Sigma^{-1} Phi).
  Matrix data_precision(const Matrix& sigma_inv) const {
    const Matrix inner = basis_.values.transpose() * sigma_inv * basis_.values;
    const Eigen::Index j = regressors();
    const Eigen::Index k = basis_size();
    Matrix p(j * k, j * k);
    for (Eigen::Index b = 0; b < j; ++b)
      for (Eigen::Index a = 0; a < j; ++a) p.block(a * k, b * k, k, k) = xtx_(a, b) * inner;
    return p;
  }

  /// X~^T (Sigma^{-1} (x) I_T) y, entry (j, k) = (X^T Y Sigma^{-1} Phi)_{jk}.
  Vector data_rhs(const Matrix& sigma_inv) const {
    const Matrix m = (xty_ * sigma_inv * basis_.values).transpose();  // K x J
    return Eigen::Map<const Vector>(m.data(), m.size());
  }

  Matrix coefficient_matrix(const Vector& vartheta) const {
    return Eigen::Map<const Matrix>(vartheta.data(), basis_size(), regressors()).transpose();
  }

  /// J x H path B Phi^T.
  Matrix coefficient_path(const Vector& vartheta) const {
    return coefficient_matrix(vartheta) * basis_.values.transpose();
  }

  Vector sequence(const Vector& vartheta, Eigen::Index j) const {
    require(j >= 0 && j < regressors(), ErrorKind::IndexOutOfRange, "coefficient index out of range");
    return vartheta.segment(j * basis_size(), basis_size());
  }

  PriorPrecision prior_precision(const Vector& tau, const std::vector<Vector>& lambda) const {
    if (spec_.prior == PriorKind::Normal)
      return PriorPrecision{Matrix::Identity(dim(), dim()) / spec_.normal_variance};
    return assemble_q_spline(sequence_length(), spec_.penalty_order, tau, lambda);
  }

  /// Minimum-norm least squares: B = (X^T X)^{-1} X^T Y (Phi^+)^T. Phi^T Phi is
  /// singular whenever K > H.
  Vector least_squares() const {
    const Matrix ols = solve_with_factor(factor_with_ridge(xtx_), xty_);  // J x H
    const Matrix b = basis_.values.completeOrthogonalDecomposition().solve(ols.transpose());  // K x J
    return Eigen::Map<const Vector>(b.data(), b.size());
  }

 private:
  DesignSet design_;
  ProjectionSpec spec_;
  SplineBasis basis_;
  Matrix xtx_;
  Matrix xty_;
};

static_assert(ProjectionModel<StandardProjection>);
static_assert(ProjectionModel<SplineProjection>);

}  // namespace blp
