#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "blp/error.hpp"
#include "blp/kernel.hpp"

namespace blp {

/// (n - r) x n forward-difference operator of order r: (D x)_i = Delta^r x_{i+r}.
struct DifferenceMatrix {
  int order = 0;
  int size = 0;
  Matrix entries;

  Eigen::Index rows() const { return entries.rows(); }
};

inline DifferenceMatrix difference_matrix(int n, int r) {
  require(r >= 1 && r < n, ErrorKind::InvalidOrder,
          "difference order must satisfy 1 <= r < n, got r=" + std::to_string(r) +
              " n=" + std::to_string(n));
  // Row pattern: signed binomial coefficients (-1)^(r-k) C(r, k), k = 0..r.
  std::vector<double> pattern(static_cast<std::size_t>(r) + 1);
  double binom = 1.0;
  for (int k = 0; k <= r; ++k) {
    pattern[static_cast<std::size_t>(k)] = ((r - k) % 2 == 0 ? 1.0 : -1.0) * binom;
    binom = binom * (r - k) / (k + 1);
  }
  Matrix d = Matrix::Zero(n - r, n);
  for (int i = 0; i < n - r; ++i)
    for (int k = 0; k <= r; ++k) d(i, i + k) = pattern[static_cast<std::size_t>(k)];
  return DifferenceMatrix{r, n, std::move(d)};
}

enum class KnotMode {
  FullSupport,   // h_first - degree ... h_last + degree
  Shifted,       // h_first - 2 ... h_last - 1
};

/// Unit-spaced knots over the horizon range.
///
/// FullSupport extends `degree` units past both ends so every horizon lies in
/// the fully supported span. Degree 0 gets one extra knot on the right so that
/// each integer horizon owns its own indicator basis function.
inline std::vector<double> default_knot_grid(double h_first, double h_last, int degree,
                                             KnotMode mode = KnotMode::FullSupport) {
  require(degree >= 0, ErrorKind::InvalidParameter, "spline degree must be >= 0");
  require(h_last - h_first >= 1.0, ErrorKind::InsufficientRange,
          "knot grid needs at least one unit interval between " + std::to_string(h_first) +
              " and " + std::to_string(h_last));
  double lo = 0.0;
  double hi = 0.0;
  if (mode == KnotMode::Shifted) {
    lo = h_first - 2.0;
    hi = h_last - 1.0;
  } else {
    lo = h_first - degree;
    hi = h_last + (degree == 0 ? 1 : degree);
  }
  std::vector<double> knots;
  const int count = static_cast<int>(std::ceil(hi - lo - 1e-9)) + 1;
  knots.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) knots.push_back(lo + i);
  return knots;
}

struct SplineBasis {
  int degree = 3;
  std::vector<double> knots;
  std::vector<double> eval_points;
  Matrix values;  // |eval_points| x K

  Eigen::Index size() const { return values.cols(); }
};

/// Cox-de Boor evaluation of every degree-`degree` B-spline on `knots` at x.
/// Degree-0 pieces are half-open [t_i, t_{i+1}).
inline Vector cox_de_boor_row(const std::vector<double>& knots, int degree, double x) {
  const auto m = static_cast<Eigen::Index>(knots.size());
  Vector b = Vector::Zero(m - 1);
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    if (knots[i] <= x && x < knots[i + 1]) b(i) = 1.0;
  for (int d = 1; d <= degree; ++d) {
    Vector next = Vector::Zero(m - 1 - d);
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      const double left_den = knots[i + d] - knots[i];
      const double right_den = knots[i + d + 1] - knots[i + 1];
      double v = 0.0;
      if (left_den > 0.0) v += (x - knots[i]) / left_den * b(i);
      if (right_den > 0.0) v += (knots[i + d + 1] - x) / right_den * b(i + 1);
      next(i) = v;
    }
    b = std::move(next);
  }
  return b;
}

/// With `require_support` off, points outside the fully supported span get the
/// raw recursion values (rows may sum to less than one, or to zero).
inline SplineBasis bspline_basis(const std::vector<double>& knots, int degree,
                                 const std::vector<double>& eval_points, bool require_support = true) {
  require(degree >= 0, ErrorKind::InvalidParameter, "spline degree must be >= 0");
  require(knots.size() >= static_cast<std::size_t>(degree) + 2, ErrorKind::InsufficientRange,
          "need at least degree + 2 knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    require(knots[i] > knots[i - 1], ErrorKind::InvalidParameter, "knots must be strictly increasing");

  const std::size_t m = knots.size() - 1;
  const double lo = knots[static_cast<std::size_t>(degree)];
  const double hi = knots[m - static_cast<std::size_t>(degree)];
  const auto k_count = static_cast<Eigen::Index>(knots.size()) - degree - 1;

  SplineBasis basis{degree, knots, eval_points, Matrix(static_cast<Eigen::Index>(eval_points.size()), k_count)};
  for (std::size_t e = 0; e < eval_points.size(); ++e) {
    const double x = eval_points[e];
    // The half-open convention needs a knot strictly right of x.
    const bool inside = x >= lo && (x < hi || (x == hi && degree > 0));
    require(inside || !require_support, ErrorKind::OutOfSupport,
            "eval point " + std::to_string(x) + " outside supported span [" + std::to_string(lo) +
                ", " + std::to_string(hi) + (degree > 0 ? "]" : ")"));
    basis.values.row(static_cast<Eigen::Index>(e)) = cox_de_boor_row(knots, degree, x).transpose();
  }
  return basis;
}

/// Basis over integer horizons with the default grid for `mode`. The shifted
/// grid cannot cover the whole horizon range, so it skips the support check.
inline SplineBasis horizon_basis(const std::vector<int>& horizons, int degree,
                                 KnotMode mode = KnotMode::FullSupport) {
  require(!horizons.empty(), ErrorKind::InvalidParameter, "no horizons");
  std::vector<double> points(horizons.begin(), horizons.end());
  const auto knots = default_knot_grid(points.front(), points.back(), degree, mode);
  return bspline_basis(knots, degree, points, mode == KnotMode::FullSupport);
}

}  // namespace blp
