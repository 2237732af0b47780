#pragma once

// Block Gibbs sampler for local projections under normal or roughness-penalty
// priors. One sweep draws coefficients, then tau, then lambda, then Sigma.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "blp/kernel.hpp"
#include "blp/model.hpp"

namespace blp {

struct ChainState {
  Vector coeffs;
  SymMatrix sigma;
  Vector tau;                  // empty under the normal prior
  std::vector<Vector> lambda;  // per coefficient, length n - r, element 0 pinned to 1
  long iteration = 0;
};

enum class InitMode { LeastSquares, Zero };

struct SamplerConfig {
  int n_draws = 40000;
  int n_burnin = 10000;
  int thin = 1;
  std::uint64_t seed = 1;
  InitMode init = InitMode::LeastSquares;

  int stored() const { return n_draws / thin; }

  void validate() const {
    require(n_draws > 0, ErrorKind::InvalidParameter, "n_draws must be > 0");
    require(n_burnin >= 0, ErrorKind::InvalidParameter, "n_burnin must be >= 0");
    require(thin >= 1, ErrorKind::InvalidParameter, "thin must be >= 1");
    require(stored() > 0, ErrorKind::InvalidParameter, "thin exceeds n_draws");
  }
};

struct GammaParams {
  double shape;
  double rate;
};

/// Stored draws, one row per kept iteration. Sigma rows hold the packed lower
/// triangle (i >= i', row-major over i). Lambda rows hold J blocks of n - r.
struct PosteriorDraws {
  ProjectionSpec spec;
  Eigen::Index regressors = 0;
  int sequence_length = 0;
  std::optional<SplineBasis> basis;
  Matrix coeffs;
  Matrix sigma;
  Matrix tau;
  Matrix lambda;
  double seconds = 0.0;

  Eigen::Index size() const { return coeffs.rows(); }
  Eigen::Index horizon_count() const { return static_cast<Eigen::Index>(spec.horizons.size()); }
  bool has_tau() const { return tau.size() > 0; }
  bool has_lambda() const { return lambda.size() > 0; }

  SymMatrix sigma_at(Eigen::Index s) const {
    const Eigen::Index h = horizon_count();
    Matrix m = Matrix::Zero(h, h);
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index k = 0; k <= i; ++k) m(i, k) = sigma(s, c++);
    return SymMatrix(std::move(m));
  }

  /// J x H coefficient path of draw s.
  Matrix coefficient_path(Eigen::Index s) const { return path_of(coeffs.row(s).transpose()); }

  Matrix path_of(const Vector& c) const {
    if (basis) {
      const Matrix b = Eigen::Map<const Matrix>(c.data(), basis->size(), regressors).transpose();
      return b * basis->values.transpose();
    }
    return Eigen::Map<const Matrix>(c.data(), regressors, horizon_count());
  }

  /// S x H draws of coefficient j's response path.
  Matrix irf_draws(Eigen::Index j) const {
    require(j >= 0 && j < regressors, ErrorKind::IndexOutOfRange, "coefficient index out of range");
    const Eigen::Index h = horizon_count();
    Matrix out(size(), h);
    if (basis) {
      const Eigen::Index k = basis->size();
      out = coeffs.middleCols(j * k, k) * basis->values.transpose();
    } else {
      for (Eigen::Index i = 0; i < h; ++i) out.col(i) = coeffs.col(i * regressors + j);
    }
    return out;
  }
};

inline Vector pack_lower(const SymMatrix& s) {
  const Eigen::Index h = s.dim();
  Vector v(h * (h + 1) / 2);
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) v(c++) = s(i, k);
  return v;
}

template <ProjectionModel M>
ChainState init_state(const M& model, InitMode mode = InitMode::LeastSquares) {
  const auto& spec = model.spec();
  const auto& design = model.design();
  const Eigen::Index h = design.horizon_count();
  require(design.t_eff() >= design.regressors() + 1, ErrorKind::InsufficientData,
          "not enough observations to initialize");
  ChainState st;
  st.coeffs = mode == InitMode::LeastSquares ? model.least_squares() : Vector::Zero(model.dim());
  const Matrix u = residuals(design, model.coefficient_path(st.coeffs));
  st.sigma = SymMatrix(u.transpose() * u / static_cast<double>(design.t_eff()) +
                       1e-8 * Matrix::Identity(h, h));
  if (is_roughness_prior(spec.prior)) {
    const Eigen::Index j = model.design().regressors();
    st.tau = Vector::Constant(j, spec.hyper.nu1 / spec.hyper.nu2);
    st.lambda.assign(static_cast<std::size_t>(j),
                     Vector::Ones(model.sequence_length() - spec.penalty_order));
  }
  return st;
}

template <ProjectionModel M>
PriorPrecision current_prior(const M& model, const ChainState& st) {
  return model.prior_precision(st.tau, st.lambda);
}

/// Coefficient block: N(P^{-1} rhs, P^{-1}) with P = data precision + Q.
template <ProjectionModel M>
Vector draw_coefficients(const ChainState& st, const M& model, const PriorPrecision& prior,
                         RngStream& rng) {
  const Matrix sigma_inv = inverse_from_factor(cholesky_lower(st.sigma));
  Matrix p = model.data_precision(sigma_inv);
  require(prior.q.rows() == p.rows(), ErrorKind::DimensionMismatch, "prior precision has wrong size");
  p += prior.q;
  return sample_mvn_precision(cholesky_lower(SymMatrix(std::move(p))), model.data_rhs(sigma_inv), rng);
}

inline Vector draw_theta(const ChainState& st, const StandardProjection& model,
                         const PriorPrecision& prior, RngStream& rng) {
  return draw_coefficients(st, model, prior, rng);
}

inline Vector draw_vartheta(const ChainState& st, const SplineProjection& model,
                            const PriorPrecision& prior, RngStream& rng) {
  return draw_coefficients(st, model, prior, rng);
}

template <ProjectionModel M>
GammaParams tau_conditional(const ChainState& st, const M& model, Eigen::Index j) {
  const auto& spec = model.spec();
  const int n = model.sequence_length();
  const int r = spec.penalty_order;
  const auto d = difference_matrix(n, r);
  const Vector diff = d.entries * model.sequence(st.coeffs, j);
  const Vector& lam = st.lambda.at(static_cast<std::size_t>(j));
  const double penalty = (lam.array() * diff.array().square()).sum();
  // rank(D^T D) = n - r
  return {spec.hyper.nu1 + 0.5 * (n - r), spec.hyper.nu2 + 0.5 * penalty};
}

template <ProjectionModel M>
double draw_tau(const ChainState& st, const M& model, Eigen::Index j, RngStream& rng) {
  const auto g = tau_conditional(st, model, j);
  return sample_gamma(g.shape, g.rate, rng);
}

/// Conditional of lambda element `l` (0-based within the n - r penalty rows).
/// Element 0 is pinned to one and has no conditional.
template <ProjectionModel M>
GammaParams lambda_conditional(const ChainState& st, const M& model, Eigen::Index j, Eigen::Index l) {
  const auto& spec = model.spec();
  const int n = model.sequence_length();
  const int r = spec.penalty_order;
  require(l >= 1 && l < n - r, ErrorKind::IndexOutOfRange,
          "lambda index " + std::to_string(l) + " is pinned or outside [1, " + std::to_string(n - r) + ")");
  const Vector seq = model.sequence(st.coeffs, j);
  const auto d = difference_matrix(n, r);
  const double delta = d.entries.row(l).dot(seq);
  return {spec.hyper.eta1 + 0.5, spec.hyper.eta2 + 0.5 * st.tau(j) * delta * delta};
}

template <ProjectionModel M>
double draw_lambda(const ChainState& st, const M& model, Eigen::Index j, Eigen::Index l, RngStream& rng) {
  const auto g = lambda_conditional(st, model, j, l);
  return sample_gamma(g.shape, g.rate, rng);
}

template <ProjectionModel M>
SymMatrix draw_sigma(const ChainState& st, const M& model, RngStream& rng) {
  const auto& design = model.design();
  const auto& spec = model.spec();
  const Matrix u = residuals(design, model.coefficient_path(st.coeffs));
  const Eigen::Index h = design.horizon_count();
  Matrix scale = spec.hyper.xi_scale * Matrix::Identity(h, h);
  scale.noalias() += u.transpose() * u;
  return sample_inverse_wishart(SymMatrix(std::move(scale)),
                                spec.iw_dof() + static_cast<double>(design.t_eff()), rng);
}

namespace detail {

template <class F>
void with_context(long iteration, const char* block, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    throw Error(e.kind(), "iteration " + std::to_string(iteration) + ", block " + block + ": " + e.what());
  }
}

}  // namespace detail

/// One full sweep: coefficients -> tau -> lambda -> Sigma. The normal prior
/// skips tau and lambda; the non-adaptive prior skips lambda.
template <ProjectionModel M>
void gibbs_sweep(ChainState& st, const M& model, RngStream& rng) {
  const auto prior_kind = model.spec().prior;
  detail::with_context(st.iteration, "coefficients", [&] {
    st.coeffs = draw_coefficients(st, model, current_prior(model, st), rng);
  });
  if (is_roughness_prior(prior_kind)) {
    detail::with_context(st.iteration, "tau", [&] {
      for (Eigen::Index j = 0; j < st.tau.size(); ++j) st.tau(j) = draw_tau(st, model, j, rng);
    });
  }
  if (prior_kind == PriorKind::AdaptiveRP) {
    detail::with_context(st.iteration, "lambda", [&] {
      for (Eigen::Index j = 0; j < st.tau.size(); ++j) {
        auto& lam = st.lambda[static_cast<std::size_t>(j)];
        for (Eigen::Index l = 1; l < lam.size(); ++l) lam(l) = draw_lambda(st, model, j, l, rng);
      }
    });
  }
  detail::with_context(st.iteration, "sigma", [&] { st.sigma = draw_sigma(st, model, rng); });
  ++st.iteration;
}

template <ProjectionModel M>
PosteriorDraws empty_draws(const M& model, Eigen::Index rows) {
  PosteriorDraws d;
  d.spec = model.spec();
  d.regressors = model.design().regressors();
  d.sequence_length = model.sequence_length();
  if constexpr (std::is_same_v<M, SplineProjection>) d.basis = model.basis();
  const Eigen::Index h = model.design().horizon_count();
  d.coeffs.resize(rows, model.dim());
  d.sigma.resize(rows, h * (h + 1) / 2);
  if (is_roughness_prior(model.spec().prior)) d.tau.resize(rows, d.regressors);
  if (model.spec().prior == PriorKind::AdaptiveRP)
    d.lambda.resize(rows, d.regressors * (d.sequence_length - model.spec().penalty_order));
  return d;
}

inline void store_draw(PosteriorDraws& d, Eigen::Index row, const ChainState& st) {
  d.coeffs.row(row) = st.coeffs.transpose();
  d.sigma.row(row) = pack_lower(st.sigma).transpose();
  if (d.has_tau()) d.tau.row(row) = st.tau.transpose();
  if (d.has_lambda()) {
    Eigen::Index c = 0;
    for (const auto& lam : st.lambda)
      for (Eigen::Index l = 0; l < lam.size(); ++l) d.lambda(row, c++) = lam(l);
  }
}

/// Runs one chain on stream (config.seed, stream_id).
template <ProjectionModel M>
PosteriorDraws run_gibbs(const M& model, const SamplerConfig& config, std::uint64_t stream_id = 0) {
  config.validate();
  RngStream rng(config.seed, stream_id);
  ChainState st = init_state(model, config.init);
  PosteriorDraws draws = empty_draws(model, config.stored());
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < config.n_burnin; ++it) gibbs_sweep(st, model, rng);
  Eigen::Index row = 0;
  for (int it = 0; it < config.n_draws; ++it) {
    gibbs_sweep(st, model, rng);
    if ((it + 1) % config.thin == 0 && row < draws.size()) store_draw(draws, row++, st);
  }
  draws.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return draws;
}

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Concatenates chains in chain order.
inline PosteriorDraws merge_draws(std::vector<PosteriorDraws> chains) {
  require(!chains.empty(), ErrorKind::EmptyDraws, "no chains to merge");
  if (chains.size() == 1) return std::move(chains.front());
  PosteriorDraws out = chains.front();
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.size();
  auto stack = [&](Matrix PosteriorDraws::*field) {
    const Eigen::Index cols = (chains.front().*field).cols();
    Matrix m(rows, cols);
    Eigen::Index r = 0;
    for (const auto& c : chains) {
      if (cols > 0) m.middleRows(r, c.size()) = c.*field;
      r += c.size();
    }
    if (cols == 0) m.resize(0, 0);
    out.*field = std::move(m);
  };
  stack(&PosteriorDraws::coeffs);
  stack(&PosteriorDraws::sigma);
  stack(&PosteriorDraws::tau);
  stack(&PosteriorDraws::lambda);
  out.seconds = 0.0;
  for (const auto& c : chains) out.seconds += c.seconds;
  return out;
}

/// Independent chains on streams 0..chains-1, merged in chain order.
template <ProjectionModel M>
PosteriorDraws run_chains(const M& model, const SamplerConfig& config, int chains, unsigned threads) {
  require(chains >= 1, ErrorKind::InvalidParameter, "chains must be >= 1");
  std::vector<PosteriorDraws> out(static_cast<std::size_t>(chains));
  parallel_for(out.size(), threads, [&](std::size_t c) { out[c] = run_gibbs(model, config, c); });
  return merge_draws(std::move(out));
}

}  // namespace blp
