#pragma once

// Synthetic moving-average DGPs and the Monte Carlo harness that scores
// posterior IRF estimates against the truth.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blp/diagnostics.hpp"
#include "blp/kernel.hpp"
#include "blp/model.hpp"
#include "blp/sampler.hpp"

namespace blp {

enum class DgpKind { Linear, Asymmetric, StateDependent };

inline std::string_view to_string(DgpKind k) {
  switch (k) {
    case DgpKind::Linear: return "linear";
    case DgpKind::Asymmetric: return "asymmetric";
    case DgpKind::StateDependent: return "state_dependent";
  }
  return "unknown";
}

inline DgpKind parse_dgp(std::string_view s) {
  if (s == "linear") return DgpKind::Linear;
  if (s == "asymmetric") return DgpKind::Asymmetric;
  if (s == "state_dependent" || s == "state-dependent") return DgpKind::StateDependent;
  fail(ErrorKind::ConfigError,
       "unknown dgp kind '" + std::string(s) + "' (expected linear|asymmetric|state_dependent)");
}

struct DgpSpec {
  DgpKind kind = DgpKind::Linear;
  int max_lag = 20;  // L
  int t_eff = 50;    // T after lag and horizon trimming
  std::uint64_t seed = 1;
  std::optional<double> r_shape;  // else r ~ U(0.1, 1) per regime
  double noise_sd = 1.0;
  int estimation_lags = 4;  // extra leading observations consumed by lags

  /// Observations returned: T + L (horizon trimming) + estimation lags.
  int raw_length() const { return t_eff + max_lag + estimation_lags; }

  void validate() const {
    require(max_lag >= 1, ErrorKind::InvalidParameter, "L must be >= 1");
    require(t_eff > max_lag, ErrorKind::InvalidParameter, "T must exceed L");
    require(noise_sd >= 0.0, ErrorKind::InvalidParameter, "noise_sd must be >= 0");
    require(estimation_lags >= 0, ErrorKind::InvalidParameter, "estimation_lags must be >= 0");
  }
};

struct TrueIrf {
  Vector regime1;  // z < 0 (asymmetric) or y < 0 (state-dependent)
  Vector regime2;
};

/// beta_l = l exp(r (1 - l)) / sum_l' l' exp(r (1 - l')), l = 0..L.
inline Vector gen_true_irf(int max_lag, double r) {
  require(max_lag >= 1, ErrorKind::InvalidParameter, "L must be >= 1");
  require(r >= 0.1 && r <= 1.0, ErrorKind::InvalidParameter,
          "curvature r must lie in [0.1, 1], got " + std::to_string(r));
  Vector beta(max_lag + 1);
  for (int l = 0; l <= max_lag; ++l) beta(l) = l * std::exp(r * (1.0 - l));
  return beta / beta.sum();
}

struct SimulatedData {
  Vector y;
  Vector z;
  TrueIrf truth;
};

// The z path passed to the convolutions carries `max_lag` burn-in draws in
// front of the returned sample: z_full(t + L) == z_t.

inline Vector moving_average_linear(const Vector& z_full, const Vector& eps, const Vector& beta) {
  const Eigen::Index lag = beta.size() - 1;
  require(z_full.size() == eps.size() + lag, ErrorKind::DimensionMismatch, "z path must include burn-in");
  Vector y(eps.size());
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    double acc = eps(t);
    for (Eigen::Index l = 0; l <= lag; ++l) acc += beta(l) * z_full(t + lag - l);
    y(t) = acc;
  }
  return y;
}

inline Vector moving_average_asymmetric(const Vector& z_full, const Vector& eps, const TrueIrf& irf) {
  const Eigen::Index lag = irf.regime1.size() - 1;
  require(irf.regime2.size() == lag + 1, ErrorKind::DimensionMismatch, "regime IRFs differ in length");
  require(z_full.size() == eps.size() + lag, ErrorKind::DimensionMismatch, "z path must include burn-in");
  Vector y(eps.size());
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    double acc = eps(t);
    for (Eigen::Index l = 0; l <= lag; ++l) {
      const double z = z_full(t + lag - l);
      acc += (z < 0.0 ? irf.regime1(l) : irf.regime2(l)) * z;
    }
    y(t) = acc;
  }
  return y;
}

/// Regime of lag l is set by the sign of y_{t-l}; pre-sample y is zero. The
/// l = 0 term uses y_{t-1}, since y_t is not yet known (beta_0 is zero for
/// generated IRFs, so this only matters for user-supplied paths).
inline Vector moving_average_state_dependent(const Vector& z_full, const Vector& eps,
                                             const TrueIrf& irf) {
  const Eigen::Index lag = irf.regime1.size() - 1;
  require(irf.regime2.size() == lag + 1, ErrorKind::DimensionMismatch, "regime IRFs differ in length");
  require(z_full.size() == eps.size() + lag, ErrorKind::DimensionMismatch, "z path must include burn-in");
  const Eigen::Index n = eps.size();
  // y_full(t + lag) == y_t; the first `lag` entries are the zero pre-sample.
  Vector y_full = Vector::Zero(n + lag);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = eps(t);
    for (Eigen::Index l = 0; l <= lag; ++l) {
      const double state = y_full(t + lag - std::max<Eigen::Index>(l, 1));
      acc += (state < 0.0 ? irf.regime1(l) : irf.regime2(l)) * z_full(t + lag - l);
    }
    y_full(t + lag) = acc;
  }
  return y_full.tail(n);
}

namespace detail {

// Always consumes the same draws (two curvatures, then z, then eps) so the
// three kinds share one random path for a given stream.
struct DgpDraws {
  TrueIrf truth;
  Vector z_full;
  Vector eps;
};

inline DgpDraws draw_dgp_inputs(const DgpSpec& dgp, RngStream& rng) {
  dgp.validate();
  const double u1 = rng.uniform(0.1, 1.0);
  const double u2 = rng.uniform(0.1, 1.0);
  const double r1 = dgp.r_shape.value_or(u1);
  const double r2 = dgp.r_shape.value_or(u2);
  DgpDraws d;
  d.truth.regime1 = gen_true_irf(dgp.max_lag, r1);
  d.truth.regime2 = dgp.kind == DgpKind::Linear ? d.truth.regime1 : gen_true_irf(dgp.max_lag, r2);
  const int n = dgp.raw_length();
  d.z_full = rng.normal_vector(n + dgp.max_lag);
  d.eps = rng.normal_vector(n) * dgp.noise_sd;
  return d;
}

inline SimulatedData finish(DgpDraws d, Vector y, int max_lag) {
  SimulatedData out;
  out.z = d.z_full.tail(d.z_full.size() - max_lag);
  out.y = std::move(y);
  out.truth = std::move(d.truth);
  return out;
}

}  // namespace detail

inline SimulatedData simulate_linear(const DgpSpec& dgp, RngStream& rng) {
  auto d = detail::draw_dgp_inputs(dgp, rng);
  Vector y = moving_average_linear(d.z_full, d.eps, d.truth.regime1);
  return detail::finish(std::move(d), std::move(y), dgp.max_lag);
}

inline SimulatedData simulate_asymmetric(const DgpSpec& dgp, RngStream& rng) {
  auto d = detail::draw_dgp_inputs(dgp, rng);
  Vector y = moving_average_asymmetric(d.z_full, d.eps, d.truth);
  return detail::finish(std::move(d), std::move(y), dgp.max_lag);
}

inline SimulatedData simulate_state_dependent(const DgpSpec& dgp, RngStream& rng) {
  auto d = detail::draw_dgp_inputs(dgp, rng);
  Vector y = moving_average_state_dependent(d.z_full, d.eps, d.truth);
  return detail::finish(std::move(d), std::move(y), dgp.max_lag);
}

inline SimulatedData simulate(const DgpSpec& dgp, RngStream& rng) {
  switch (dgp.kind) {
    case DgpKind::Linear: return simulate_linear(dgp, rng);
    case DgpKind::Asymmetric: return simulate_asymmetric(dgp, rng);
    case DgpKind::StateDependent: return simulate_state_dependent(dgp, rng);
  }
  fail(ErrorKind::InvalidParameter, "unknown dgp kind");
}

/// Covariates used throughout the experiments: constant plus `lags` lags of y and z.
inline SeriesBundle simulation_bundle(const SimulatedData& data) {
  return SeriesBundle{data.y, data.z, {data.y, data.z}, {}};
}

// ---------------------------------------------------------------------------
// Metrics over M experiments (rows) and L + 1 horizons (columns).

enum class Normalization {
  PointCount,    // divide by the number of summed horizon points (L + 1)
  LagCount,      // divide by L while summing L + 1 points
};

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
          std::string(what) + ": shapes differ");
  require(a.rows() > 0 && a.cols() > 0, ErrorKind::DimensionMismatch, std::string(what) + ": empty input");
}

inline double horizon_divisor(Eigen::Index points, Normalization norm) {
  return norm == Normalization::LagCount ? static_cast<double>(points - 1)
                                             : static_cast<double>(points);
}

/// M^{-1} sum_m sum_l (estimate - truth)^2.
inline double metric_mse(const Matrix& estimates, const Matrix& truths) {
  check_same_shape(estimates, truths, "metric_mse");
  return (estimates - truths).array().square().sum() / static_cast<double>(estimates.rows());
}

/// Share of (experiment, horizon) cells with lower < truth < upper.
inline double metric_coverage(const Matrix& lower, const Matrix& upper, const Matrix& truths,
                              Normalization norm = Normalization::PointCount) {
  check_same_shape(lower, truths, "metric_coverage");
  check_same_shape(upper, truths, "metric_coverage");
  const double hits = ((lower.array() < truths.array()) && (upper.array() > truths.array())).count();
  return hits / (static_cast<double>(truths.rows()) * horizon_divisor(truths.cols(), norm));
}

inline double metric_length(const Matrix& lower, const Matrix& upper,
                            Normalization norm = Normalization::PointCount) {
  check_same_shape(lower, upper, "metric_length");
  return (upper - lower).sum() / (static_cast<double>(lower.rows()) * horizon_divisor(lower.cols(), norm));
}

struct MetricReport {
  double mse = 0.0;
  double coverage = 0.0;
  double length = 0.0;
  double speed_seconds = 0.0;
  int replications = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
};

struct ExperimentCell {
  DgpSpec dgp;
  ProjectionSpec projection;  // horizons are set to 0..L by the runner
  SamplerConfig sampler;
  int lags = 4;
  Normalization normalization = Normalization::PointCount;
};

struct ReplicationResult {
  Vector mean;
  Vector q05;
  Vector q95;
  TrueIrf truth;
  double seconds = 0.0;
};

inline std::uint64_t data_stream(std::uint64_t replication) { return derive_stream(0xDA7AULL, replication); }
inline std::uint64_t chain_stream(std::uint64_t replication) { return derive_stream(0xC4A1ULL, replication); }

/// Simulate, estimate, summarize. Replication m of every cell sharing a DGP
/// seed sees the same data set.
inline ReplicationResult run_replication(const ExperimentCell& cell, int m) {
  RngStream data_rng(cell.dgp.seed, data_stream(static_cast<std::uint64_t>(m)));
  DgpSpec dgp = cell.dgp;
  dgp.estimation_lags = cell.lags;
  const SimulatedData data = simulate(dgp, data_rng);

  ProjectionSpec spec = cell.projection;
  spec.horizons.clear();
  for (int h = 0; h <= dgp.max_lag; ++h) spec.horizons.push_back(h);
  DesignSet design = build_design(simulation_bundle(data), spec, cell.lags);

  const auto stream = chain_stream(static_cast<std::uint64_t>(m));
  PosteriorDraws draws = spec.spline ? run_gibbs(SplineProjection(std::move(design), spec), cell.sampler, stream)
                                     : run_gibbs(StandardProjection(std::move(design), spec), cell.sampler, stream);
  const IrfSummary s = summarize_irf(draws, 0);
  return ReplicationResult{s.mean, s.q05, s.q95, data.truth, draws.seconds};
}

/// Aggregates replications; each metric is the average of its value against
/// the regime-1 and regime-2 truths (identical for the linear DGP).
inline MetricReport aggregate(const std::vector<ReplicationResult>& reps, Normalization norm) {
  MetricReport r;
  r.replications = static_cast<int>(reps.size());
  if (reps.empty()) return r;
  const Eigen::Index h = reps.front().mean.size();
  const auto m = static_cast<Eigen::Index>(reps.size());
  Matrix est(m, h), lo(m, h), hi(m, h), t1(m, h), t2(m, h);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& rep = reps[static_cast<std::size_t>(i)];
    est.row(i) = rep.mean.transpose();
    lo.row(i) = rep.q05.transpose();
    hi.row(i) = rep.q95.transpose();
    t1.row(i) = rep.truth.regime1.transpose();
    t2.row(i) = rep.truth.regime2.transpose();
    r.speed_seconds += rep.seconds;
  }
  r.speed_seconds /= static_cast<double>(m);
  r.mse = 0.5 * (metric_mse(est, t1) + metric_mse(est, t2));
  r.coverage = 0.5 * (metric_coverage(lo, hi, t1, norm) + metric_coverage(lo, hi, t2, norm));
  r.length = metric_length(lo, hi, norm);
  return r;
}

/// Runs M replications of every cell. Failed replications are excluded from
/// the metrics and counted.
inline std::vector<MetricReport> run_experiment(const std::vector<ExperimentCell>& cells, int replications,
                                                unsigned threads = 1) {
  require(!cells.empty(), ErrorKind::ConfigError, "experiment matrix is empty");
  require(replications >= 1, ErrorKind::ConfigError, "replications must be >= 1");
  const auto per_cell = static_cast<std::size_t>(replications);
  std::vector<std::optional<ReplicationResult>> results(cells.size() * per_cell);
  std::vector<std::string> errors(results.size());
  parallel_for(results.size(), threads, [&](std::size_t idx) {
    const auto& cell = cells[idx / per_cell];
    const int m = static_cast<int>(idx % per_cell);
    try {
      results[idx] = run_replication(cell, m);
    } catch (const std::exception& e) {
      errors[idx] = "replication " + std::to_string(m) + ": " + e.what();
    }
  });
  std::vector<MetricReport> out;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<ReplicationResult> ok;
    std::vector<std::string> failed;
    for (std::size_t m = 0; m < per_cell; ++m) {
      const std::size_t idx = c * per_cell + m;
      if (results[idx]) ok.push_back(*results[idx]);
      else failed.push_back(errors[idx]);
    }
    MetricReport r = aggregate(ok, cells[c].normalization);
    r.failures = static_cast<int>(failed.size());
    r.failure_messages = std::move(failed);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace blp
