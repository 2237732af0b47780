#pragma once

// Dense linear algebra and random variates shared by every Gibbs block.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "blp/error.hpp"

namespace blp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric matrix held densely; the lower triangle is authoritative and is
/// mirrored into the upper triangle on construction.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Matrix a) : m_(std::move(a)) {
    require(m_.rows() == m_.cols(), ErrorKind::DimensionMismatch,
            "SymMatrix needs a square matrix, got " + std::to_string(m_.rows()) + "x" +
                std::to_string(m_.cols()));
    require(m_.rows() >= 1, ErrorKind::DimensionMismatch, "SymMatrix needs dim >= 1");
    m_.triangularView<Eigen::StrictlyUpper>() = m_.transpose();
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// Lower Cholesky root L with L L^T = A and strictly positive diagonal.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Matrix lower) : l_(std::move(lower)) {}

  Eigen::Index dim() const { return l_.rows(); }
  const Matrix& lower() const { return l_; }

  double log_det() const { return 2.0 * l_.diagonal().array().log().sum(); }

  Matrix reconstruct() const { return l_ * l_.transpose(); }

 private:
  Matrix l_;
};

/// Pivots below this fraction of the largest diagonal entry are treated as
/// zero, which separates rank-deficient precisions from roundoff.
inline constexpr double kPivotTolerance = 1e-12;

inline CholeskyFactor cholesky_lower(const SymMatrix& a) {
  Eigen::LLT<Matrix, Eigen::Lower> llt(a.matrix());
  if (llt.info() != Eigen::Success) {
    fail(ErrorKind::NotPositiveDefinite, "non-positive pivot in Cholesky factorization (dim " +
                                             std::to_string(a.dim()) + ")");
  }
  Matrix l = llt.matrixL();
  const double max_diag = a.matrix().diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double pivot = l(i, i) * l(i, i);
    if (!(pivot >= kPivotTolerance * max_diag)) {
      fail(ErrorKind::NotPositiveDefinite, "pivot " + std::to_string(pivot) + " at row " +
                                               std::to_string(i) + " below tolerance");
    }
  }
  return CholeskyFactor(std::move(l));
}

/// Forward substitution: returns c with L c = b.
inline Vector solve_lower(const CholeskyFactor& factor, const Vector& b) {
  const Matrix& l = factor.lower();
  const Eigen::Index n = l.rows();
  require(b.size() == n, ErrorKind::DimensionMismatch,
          "solve_lower: rhs length " + std::to_string(b.size()) + " vs dim " + std::to_string(n));
  Vector x = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    x(k) /= l(k, k);
    const Eigen::Index rest = n - k - 1;
    if (rest > 0) x.tail(rest).noalias() -= l.col(k).tail(rest) * x(k);
  }
  return x;
}

/// Back substitution against the transpose: returns x with L^T x = b.
inline Vector solve_upper(const CholeskyFactor& factor, const Vector& b) {
  const Matrix& l = factor.lower();
  const Eigen::Index n = l.rows();
  require(b.size() == n, ErrorKind::DimensionMismatch,
          "solve_upper: rhs length " + std::to_string(b.size()) + " vs dim " + std::to_string(n));
  Vector x = b;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Eigen::Index rest = n - k - 1;
    double acc = x(k);
    if (rest > 0) acc -= l.col(k).tail(rest).dot(x.tail(rest));
    x(k) = acc / l(k, k);
  }
  return x;
}

/// Inverse of L L^T, column by column.
inline Matrix inverse_from_factor(const CholeskyFactor& factor) {
  const Eigen::Index n = factor.dim();
  Matrix inv(n, n);
  Vector e = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e.setZero();
    e(j) = 1.0;
    inv.col(j) = solve_upper(factor, solve_lower(factor, e));
  }
  return inv;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines a parent stream id with a child index into a new stream id.
inline std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t child) {
  return splitmix64(splitmix64(parent) ^ (child + 0x632be59bd9b4e019ULL));
}

/// Random stream identified by (seed, stream_id). Streams with different ids
/// are seeded through a seed_seq over all four 32-bit halves, so chains and
/// replications derived from one seed are decorrelated.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RngStream child(std::uint64_t index) const {
    return RngStream(seed_, derive_stream(stream_id_, index));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  // shape-rate parameterization: mean shape / rate
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    return dist(engine_);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// One draw from N(P^{-1} rhs, P^{-1}) given the Cholesky root of P:
/// a ~ N(0, I); L^T b = a; L c = rhs; L^T m = c; return b + m.
inline Vector sample_mvn_precision(const CholeskyFactor& factor, const Vector& rhs, RngStream& rng) {
  require(rhs.size() == factor.dim(), ErrorKind::DimensionMismatch,
          "sample_mvn_precision: rhs length " + std::to_string(rhs.size()) + " vs dim " +
              std::to_string(factor.dim()));
  const Vector a = rng.normal_vector(factor.dim());
  const Vector b = solve_upper(factor, a);
  const Vector c = solve_lower(factor, rhs);
  const Vector m = solve_upper(factor, c);
  return b + m;
}

inline Vector sample_mvn_precision(const SymMatrix& precision, const Vector& rhs, RngStream& rng) {
  return sample_mvn_precision(cholesky_lower(precision), rhs, rng);
}

inline double sample_gamma(double shape, double rate, RngStream& rng) {
  require(shape > 0.0 && rate > 0.0 && std::isfinite(shape) && std::isfinite(rate),
          ErrorKind::InvalidParameter,
          "gamma needs shape > 0 and rate > 0, got shape=" + std::to_string(shape) +
              " rate=" + std::to_string(rate));
  return rng.gamma(shape, rate);
}

/// Inverse-Wishart draw via the Bartlett decomposition of W(scale^{-1}, dof).
/// With scale = C C^T and Bartlett factor A, the draw is (C A^{-T})(C A^{-T})^T.
inline SymMatrix sample_inverse_wishart(const SymMatrix& scale, double dof, RngStream& rng) {
  const Eigen::Index p = scale.dim();
  require(dof > static_cast<double>(p - 1), ErrorKind::InvalidParameter,
          "inverse Wishart needs dof > dim - 1, got dof=" + std::to_string(dof) +
              " dim=" + std::to_string(p));
  const CholeskyFactor c = cholesky_lower(scale);
  Matrix a = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    // chi-square(k) == gamma(k/2, rate 1/2)
    a(i, i) = std::sqrt(sample_gamma(0.5 * (dof - static_cast<double>(i)), 0.5, rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Matrix bt = a.triangularView<Eigen::Lower>().solve(c.lower().transpose());
  return SymMatrix(bt.transpose() * bt);
}

}  // namespace blp
