#pragma once

// Command-line front end: JSON run configs, the four subcommands, and the
// CSV/JSON artifacts they emit.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "blp/diagnostics.hpp"
#include "blp/error.hpp"
#include "blp/ingest.hpp"
#include "blp/model.hpp"
#include "blp/sampler.hpp"
#include "blp/simulate.hpp"

namespace blp::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidParameter:
    case ErrorKind::InvalidOrder:
    case ErrorKind::InsufficientRange:
    case ErrorKind::OutOfSupport:
      return kConfigError;
    case ErrorKind::NotPositiveDefinite:
      return kNumericalError;
    default:
      return kDataError;
  }
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_of(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Strict JSON access: every key must be read, or finish() names the stray one.

class Fields {
 public:
  Fields(const json& node, std::string where) : node_(&node), where_(std::move(where)) {
    require(node.is_object(), ErrorKind::ConfigError, label() + ": expected a JSON object");
  }

  std::string name(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return node_->contains(key) && !node_->at(key).is_null();
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    return has(key) ? as<T>(node_->at(key), name(key)) : fallback;
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(node_->at(key), name(key));
  }

  template <class T>
  T need(const std::string& key) {
    require(has(key), ErrorKind::ConfigError, name(key) + " is required");
    return as<T>(node_->at(key), name(key));
  }

  template <class T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) {
    if (!has(key)) return fallback;
    const json& v = node_->at(key);
    require(v.is_array(), ErrorKind::ConfigError, name(key) + ": expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as<T>(v[i], name(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  Fields child(const std::string& key) {
    used_.insert(key);
    return Fields(node_->at(key), name(key));
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return node_->at(key);
  }

  void finish() const {
    for (const auto& item : node_->items())
      require(used_.count(item.key()) > 0, ErrorKind::ConfigError, "unknown key '" + name(item.key()) + "'");
  }

  template <class T>
  static T as(const json& v, const std::string& field) {
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
    else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>)
      ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    else if constexpr (std::is_integral_v<T>) ok = v.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>) ok = v.is_number();
    else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
    require(ok, ErrorKind::ConfigError, field + ": wrong type (got " + v.dump() + ")");
    return v.get<T>();
  }

 private:
  std::string label() const { return where_.empty() ? "config" : where_; }

  const json* node_;
  std::string where_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Run configuration

struct SeriesSource {
  std::string path_text;
  fs::path path;
  std::optional<std::string> column;
  std::optional<std::string> name;
  bool log_diff = false;
};

enum class DataKind { Simulated, Monthly };

struct DataConfig {
  DataKind kind = DataKind::Simulated;
  std::string series_text;
  fs::path series;
  std::vector<SeriesSource> macro;
  SeriesSource shock;
  std::vector<std::string> responses;
  bool trend = true;
};

struct EstimateConfig {
  DataConfig data;
  ProjectionSpec spec;
  SamplerConfig sampler;
  int lags = 4;
};

struct SummarizeConfig {
  std::optional<std::string> draws_dir_text;
  std::optional<fs::path> draws_dir;
};

struct BenchmarkConfig {
  std::vector<int> t_values{50};
  std::vector<DgpKind> dgps{DgpKind::Linear};
  std::vector<PriorKind> priors{PriorKind::Normal, PriorKind::NonAdaptiveRP, PriorKind::AdaptiveRP};
  std::vector<bool> bspline{false, true};
  std::vector<double> nu{0.01};
  int max_lag = 20;
  int lags = 4;
  double noise_sd = 1.0;
  std::optional<double> r_shape;
  int replications = 100;
  ProjectionSpec base;
  SplineSettings spline;
  SamplerConfig sampler;
  Normalization normalization = Normalization::PointCount;
};

struct RunConfig {
  fs::path base_dir;
  fs::path out;
  std::uint64_t seed = 1;
  std::string seed_source = "default";
  int chains = 1;
  unsigned threads = 1;
  std::optional<DgpSpec> simulate;
  std::optional<EstimateConfig> estimate;
  std::optional<SummarizeConfig> summarize;
  std::optional<BenchmarkConfig> benchmark;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> chains;
  std::optional<unsigned> threads;
};

namespace detail {

inline KnotMode parse_knots(const std::string& s, const std::string& field) {
  if (s == "full_support") return KnotMode::FullSupport;
  if (s == "shifted") return KnotMode::Shifted;
  fail(ErrorKind::ConfigError, field + ": unknown knot mode '" + s + "' (expected full_support|shifted)");
}

inline std::string knots_name(KnotMode m) { return m == KnotMode::FullSupport ? "full_support" : "shifted"; }

inline InitMode parse_init(const std::string& s, const std::string& field) {
  if (s == "least_squares") return InitMode::LeastSquares;
  if (s == "zero") return InitMode::Zero;
  fail(ErrorKind::ConfigError, field + ": unknown init '" + s + "' (expected least_squares|zero)");
}

inline std::string init_name(InitMode m) { return m == InitMode::LeastSquares ? "least_squares" : "zero"; }

template <class F>
auto field_context(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, field + ": " + e.what());
  }
}

inline SplineSettings read_spline(Fields f) {
  SplineSettings s;
  s.degree = f.get("degree", s.degree);
  s.knots = parse_knots(f.get<std::string>("knots", "full_support"), f.name("knots"));
  f.finish();
  return s;
}

inline void read_hyper(Fields f, Hyperparameters& h, bool allow_nu) {
  if (allow_nu) {
    h.nu1 = f.get("nu1", h.nu1);
    h.nu2 = f.get("nu2", h.nu2);
  }
  h.eta1 = f.get("eta1", h.eta1);
  h.eta2 = f.get("eta2", h.eta2);
  h.xi = f.maybe<double>("xi");
  h.xi_scale = f.get("xi_scale", h.xi_scale);
  f.finish();
}

inline SamplerConfig read_sampler(Fields f) {
  SamplerConfig s;
  s.n_draws = f.get("draws", s.n_draws);
  s.n_burnin = f.get("burnin", s.n_burnin);
  s.thin = f.get("thin", s.thin);
  s.init = parse_init(f.get<std::string>("init", "least_squares"), f.name("init"));
  f.finish();
  field_context(f.name("draws"), [&] {
    s.validate();
    return 0;
  });
  return s;
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline SeriesSource read_source(Fields f, const fs::path& base) {
  SeriesSource s;
  s.path_text = f.need<std::string>("path");
  s.path = resolve(base, s.path_text);
  s.column = f.maybe<std::string>("column");
  s.name = f.maybe<std::string>("name");
  const auto transform = f.get<std::string>("transform", "none");
  require(transform == "none" || transform == "log_diff", ErrorKind::ConfigError,
          f.name("transform") + ": expected none|log_diff, got '" + transform + "'");
  s.log_diff = transform == "log_diff";
  f.finish();
  return s;
}

inline DgpSpec read_simulate(Fields f) {
  DgpSpec d;
  d.kind = field_context(f.name("dgp"), [&] { return parse_dgp(f.get<std::string>("dgp", "linear")); });
  d.max_lag = f.get("L", d.max_lag);
  d.t_eff = f.get("T", d.t_eff);
  d.r_shape = f.maybe<double>("r");
  d.noise_sd = f.get("noise_sd", d.noise_sd);
  d.estimation_lags = f.get("lags", d.estimation_lags);
  f.finish();
  field_context("simulate", [&] {
    d.validate();
    if (d.r_shape) gen_true_irf(d.max_lag, *d.r_shape);
    return 0;
  });
  return d;
}

inline EstimateConfig read_estimate(Fields f, const fs::path& base) {
  EstimateConfig e;
  {
    Fields d = f.child("data");
    if (d.has("simulated")) {
      e.data.kind = DataKind::Simulated;
      e.data.series_text = d.need<std::string>("simulated");
      e.data.series = resolve(base, e.data.series_text);
      e.data.responses = {"y"};
    } else {
      e.data.kind = DataKind::Monthly;
      const json& macro = d.raw("macro");
      require(macro.is_array() && !macro.empty(), ErrorKind::ConfigError,
              d.name("macro") + ": expected a non-empty array of series");
      for (std::size_t i = 0; i < macro.size(); ++i)
        e.data.macro.push_back(read_source(Fields(macro[i], d.name("macro") + "[" + std::to_string(i) + "]"), base));
      require(d.has("shock"), ErrorKind::ConfigError, d.name("shock") + " is required");
      e.data.shock = read_source(d.child("shock"), base);
      e.data.responses = d.list<std::string>("responses", {});
      require(!e.data.responses.empty(), ErrorKind::ConfigError, d.name("responses") + " must list at least one series");
      e.data.trend = d.get("trend", true);
    }
    d.finish();
  }
  e.lags = f.get("lags", e.lags);
  require(e.lags >= 0, ErrorKind::ConfigError, f.name("lags") + " must be >= 0");
  const int h_first = f.get("h_first", 0);
  const int h_last = f.get("h_last", 20);
  e.spec = ProjectionSpec::with_horizons(h_first, h_last);
  e.spec.prior = field_context(f.name("prior"), [&] { return parse_prior(f.get<std::string>("prior", "nrp")); });
  e.spec.penalty_order = f.get("penalty_order", e.spec.penalty_order);
  e.spec.normal_variance = f.get("normal_variance", e.spec.normal_variance);
  if (f.has("hyper")) read_hyper(f.child("hyper"), e.spec.hyper, true);
  if (f.has("spline")) e.spec.spline = read_spline(f.child("spline"));
  if (f.has("sampler")) e.sampler = read_sampler(f.child("sampler"));
  f.finish();
  field_context("estimate", [&] {
    e.spec.validate();
    return 0;
  });
  return e;
}

inline BenchmarkConfig read_benchmark(Fields f) {
  BenchmarkConfig b;
  b.t_values = f.list<int>("T", b.t_values);
  std::vector<std::string> dgps;
  for (auto d : b.dgps) dgps.emplace_back(to_string(d));
  b.dgps.clear();
  for (const auto& s : f.list<std::string>("dgp", dgps))
    b.dgps.push_back(field_context(f.name("dgp"), [&] { return parse_dgp(s); }));
  std::vector<std::string> priors;
  for (auto p : b.priors) priors.emplace_back(to_string(p));
  b.priors.clear();
  for (const auto& s : f.list<std::string>("prior", priors))
    b.priors.push_back(field_context(f.name("prior"), [&] { return parse_prior(s); }));
  b.bspline = f.list<bool>("bspline", b.bspline);
  b.nu = f.list<double>("nu", b.nu);
  b.max_lag = f.get("L", b.max_lag);
  b.lags = f.get("lags", b.lags);
  b.noise_sd = f.get("noise_sd", b.noise_sd);
  b.r_shape = f.maybe<double>("r");
  b.replications = f.get("replications", b.replications);
  b.base.penalty_order = f.get("penalty_order", b.base.penalty_order);
  b.base.normal_variance = f.get("normal_variance", b.base.normal_variance);
  if (f.has("hyper")) read_hyper(f.child("hyper"), b.base.hyper, false);
  if (f.has("spline")) b.spline = read_spline(f.child("spline"));
  if (f.has("sampler")) b.sampler = read_sampler(f.child("sampler"));
  const auto norm = f.get<std::string>("coverage_normalization", "points");
  require(norm == "points" || norm == "lag_count", ErrorKind::ConfigError,
          f.name("coverage_normalization") + ": expected points|lag_count, got '" + norm + "'");
  b.normalization = norm == "points" ? Normalization::PointCount : Normalization::LagCount;
  f.finish();
  require(b.replications >= 1, ErrorKind::ConfigError, f.name("replications") + " must be >= 1");
  for (double nu : b.nu) require(nu > 0.0, ErrorKind::ConfigError, f.name("nu") + " values must be > 0");
  const bool any_rp = std::any_of(b.priors.begin(), b.priors.end(), is_roughness_prior);
  require(!b.t_values.empty() && !b.dgps.empty() && !b.priors.empty() && !b.bspline.empty() &&
              (!any_rp || !b.nu.empty()),
          ErrorKind::ConfigError, "benchmark: experiment matrix is empty");
  return b;
}

inline json hyper_json(const Hyperparameters& h, bool with_nu) {
  json j{{"eta1", h.eta1}, {"eta2", h.eta2}, {"xi_scale", h.xi_scale}};
  j["xi"] = h.xi ? json(*h.xi) : json(nullptr);
  if (with_nu) {
    j["nu1"] = h.nu1;
    j["nu2"] = h.nu2;
  }
  return j;
}

inline json spline_json(const SplineSettings& s) { return {{"degree", s.degree}, {"knots", knots_name(s.knots)}}; }

inline json sampler_json(const SamplerConfig& s) {
  return {{"draws", s.n_draws}, {"burnin", s.n_burnin}, {"thin", s.thin}, {"init", init_name(s.init)}};
}

inline json source_json(const SeriesSource& s) {
  json j{{"path", s.path_text}, {"transform", s.log_diff ? "log_diff" : "none"}};
  j["column"] = s.column ? json(*s.column) : json(nullptr);
  j["name"] = s.name ? json(*s.name) : json(nullptr);
  return j;
}

}  // namespace detail

inline json effective_json(const DgpSpec& d) {
  json j{{"dgp", to_string(d.kind)}, {"L", d.max_lag}, {"T", d.t_eff}, {"noise_sd", d.noise_sd},
         {"lags", d.estimation_lags}};
  j["r"] = d.r_shape ? json(*d.r_shape) : json(nullptr);
  return j;
}

inline json effective_json(const EstimateConfig& e) {
  json data;
  if (e.data.kind == DataKind::Simulated) {
    data["simulated"] = e.data.series_text;
  } else {
    data["macro"] = json::array();
    for (const auto& s : e.data.macro) data["macro"].push_back(detail::source_json(s));
    data["shock"] = detail::source_json(e.data.shock);
    data["responses"] = e.data.responses;
    data["trend"] = e.data.trend;
  }
  json j{{"data", data},
         {"lags", e.lags},
         {"h_first", e.spec.horizons.front()},
         {"h_last", e.spec.horizons.back()},
         {"prior", to_string(e.spec.prior)},
         {"penalty_order", e.spec.penalty_order},
         {"normal_variance", e.spec.normal_variance},
         {"hyper", detail::hyper_json(e.spec.hyper, true)},
         {"sampler", detail::sampler_json(e.sampler)}};
  j["spline"] = e.spec.spline ? detail::spline_json(*e.spec.spline) : json(nullptr);
  return j;
}

inline json effective_json(const BenchmarkConfig& b) {
  json j{{"T", b.t_values},
         {"bspline", b.bspline},
         {"nu", b.nu},
         {"L", b.max_lag},
         {"lags", b.lags},
         {"noise_sd", b.noise_sd},
         {"replications", b.replications},
         {"penalty_order", b.base.penalty_order},
         {"normal_variance", b.base.normal_variance},
         {"hyper", detail::hyper_json(b.base.hyper, false)},
         {"spline", detail::spline_json(b.spline)},
         {"sampler", detail::sampler_json(b.sampler)},
         {"coverage_normalization", b.normalization == Normalization::PointCount ? "points" : "lag_count"}};
  j["r"] = b.r_shape ? json(*b.r_shape) : json(nullptr);
  j["dgp"] = json::array();
  for (auto d : b.dgps) j["dgp"].push_back(to_string(d));
  j["prior"] = json::array();
  for (auto p : b.priors) j["prior"].push_back(to_string(p));
  return j;
}

/// Hash of the estimate settings that determine the draws layout and content,
/// excluding seed and chain count.
inline std::string spec_hash(const EstimateConfig& e) { return hash_of(effective_json(e)); }

inline RunConfig parse_config(const json& root, const fs::path& base_dir, const Overrides& over = {}) {
  RunConfig rc;
  rc.base_dir = base_dir;
  Fields f(root, "");
  if (const auto seed = f.maybe<std::uint64_t>("seed")) {
    rc.seed = *seed;
    rc.seed_source = "config";
  }
  if (over.seed) {
    rc.seed = *over.seed;
    rc.seed_source = "flag";
  }
  rc.chains = over.chains.value_or(f.get("chains", rc.chains));
  rc.threads = over.threads.value_or(f.get("threads", rc.threads));
  require(rc.chains >= 1, ErrorKind::ConfigError, "chains must be >= 1");
  require(rc.threads >= 1, ErrorKind::ConfigError, "threads must be >= 1");
  const auto out_cfg = f.get<std::string>("out", "out");
  rc.out = over.out ? fs::path(*over.out) : detail::resolve(base_dir, out_cfg);
  if (f.has("simulate")) rc.simulate = detail::read_simulate(f.child("simulate"));
  if (f.has("estimate")) rc.estimate = detail::read_estimate(f.child("estimate"), base_dir);
  if (f.has("summarize")) {
    Fields s = f.child("summarize");
    SummarizeConfig sc;
    sc.draws_dir_text = s.maybe<std::string>("draws_dir");
    if (sc.draws_dir_text) sc.draws_dir = detail::resolve(base_dir, *sc.draws_dir_text);
    s.finish();
    rc.summarize = sc;
  }
  if (f.has("benchmark")) rc.benchmark = detail::read_benchmark(f.child("benchmark"));
  f.finish();
  return rc;
}

inline RunConfig load_config(const fs::path& path, const Overrides& over = {}) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::ConfigError, "cannot open config file " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return parse_config(root, path.has_parent_path() ? path.parent_path() : fs::path("."), over);
}

// ---------------------------------------------------------------------------
// Artifacts

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline Metadata base_metadata(const std::string& command, const std::string& config_hash, const RunConfig& rc) {
  return {{"version", std::string(kVersion)},
          {"command", command},
          {"config_hash", config_hash},
          {"seed", std::to_string(rc.seed)},
          {"seed_source", rc.seed_source}};
}

inline std::string csv_preamble(const Metadata& meta) {
  std::string s;
  for (const auto& [k, v] : meta) s += "# " + k + ": " + v + "\n";
  return s;
}

inline json json_metadata(const Metadata& meta) {
  json j = json::object();
  for (const auto& [k, v] : meta) j[k] = v;
  return j;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  out.close();
  require(!out.fail(), ErrorKind::IoError, "write failed for " + path.string());
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::IoError,
          "cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

inline void append_row(std::string& s, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c > 0) s += ',';
    s += format_double(row(c));
  }
}

/// Column names in storage order: coefficients, packed Sigma, tau, lambda.
inline std::vector<std::string> draw_columns(const PosteriorDraws& d) {
  std::vector<std::string> cols;
  const auto& hz = d.spec.horizons;
  const auto j_count = static_cast<int>(d.regressors);
  if (d.basis) {
    for (int j = 0; j < j_count; ++j)
      for (Eigen::Index k = 0; k < d.basis->size(); ++k)
        cols.push_back("vartheta_j" + std::to_string(j) + "_k" + std::to_string(k));
  } else {
    for (int h : hz)
      for (int j = 0; j < j_count; ++j) cols.push_back("theta_h" + std::to_string(h) + "_j" + std::to_string(j));
  }
  for (std::size_t i = 0; i < hz.size(); ++i)
    for (std::size_t k = 0; k <= i; ++k) cols.push_back("sigma_" + std::to_string(hz[i]) + "_" + std::to_string(hz[k]));
  if (d.has_tau())
    for (int j = 0; j < j_count; ++j) cols.push_back("tau_" + std::to_string(j));
  if (d.has_lambda()) {
    const int per = d.sequence_length - d.spec.penalty_order;
    for (int j = 0; j < j_count; ++j)
      for (int l = 0; l < per; ++l) cols.push_back("lambda_" + std::to_string(j) + "_" + std::to_string(l));
  }
  return cols;
}

inline std::string draws_csv(const PosteriorDraws& d, const Metadata& meta) {
  std::string s = csv_preamble(meta);
  const auto cols = draw_columns(d);
  for (std::size_t c = 0; c < cols.size(); ++c) s += (c ? "," : "") + cols[c];
  s += '\n';
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    append_row(s, d.coeffs.row(r));
    s += ',';
    append_row(s, d.sigma.row(r));
    if (d.has_tau()) {
      s += ',';
      append_row(s, d.tau.row(r));
    }
    if (d.has_lambda()) {
      s += ',';
      append_row(s, d.lambda.row(r));
    }
    s += '\n';
  }
  return s;
}

inline std::string irf_csv(const IrfSummary& s, const Metadata& meta) {
  std::string out = csv_preamble(meta) + "horizon,mean,q2.5,q5,q95,q97.5\n";
  for (std::size_t i = 0; i < s.horizons.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out += std::to_string(s.horizons[i]) + "," + format_double(s.mean(k)) + "," + format_double(s.q025(k)) + "," +
           format_double(s.q05(k)) + "," + format_double(s.q95(k)) + "," + format_double(s.q975(k)) + "\n";
  }
  return out;
}

/// Table read from one of our CSV files: '#' metadata lines, a header, rows.
struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline void add_metadata_line(std::map<std::string, std::string>& meta, std::string_view line) {
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return;
  meta[std::string(blp::detail::trim(line.substr(1, colon - 1)))] = std::string(blp::detail::trim(line.substr(colon + 1)));
}

}  // namespace detail

/// Leading '#' lines only.
inline std::map<std::string, std::string> read_metadata(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') detail::add_metadata_line(meta, line);
  return meta;
}

inline CsvTable read_csv_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      detail::add_metadata_line(t.metadata, line);
      continue;
    }
    const auto cells = blp::detail::split_csv(line);
    if (t.header.empty()) {
      for (auto c : cells) t.header.emplace_back(c);
      continue;
    }
    const auto where = path.string() + " line " + std::to_string(line_no);
    require(cells.size() == t.header.size(), ErrorKind::ParseError,
            where + ": expected " + std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      require(v.has_value(), ErrorKind::ParseError,
              where + ": column '" + t.header[c] + "' is not a number ('" + std::string(cells[c]) + "')");
      row[c] = *v;
    }
    t.rows.push_back(std::move(row));
  }
  require(!t.header.empty(), ErrorKind::ParseError, path.string() + ": missing header row");
  return t;
}

/// Rebuilds draws written by draws_csv for the given spec.
inline PosteriorDraws read_draws(const fs::path& path, const ProjectionSpec& spec) {
  const CsvTable t = read_csv_table(path);
  PosteriorDraws d;
  d.spec = spec;
  if (spec.spline) d.basis = horizon_basis(spec.horizons, spec.spline->degree, spec.spline->knots);
  d.sequence_length = d.basis ? static_cast<int>(d.basis->size()) : spec.horizon_count();
  const std::string prefix = d.basis ? "vartheta_" : "theta_";
  Eigen::Index n_coef = 0;
  while (n_coef < static_cast<Eigen::Index>(t.header.size()) &&
         t.header[static_cast<std::size_t>(n_coef)].rfind(prefix, 0) == 0)
    ++n_coef;
  require(n_coef > 0 && n_coef % d.sequence_length == 0, ErrorKind::ParseError,
          path.string() + ": coefficient columns do not match the configured " +
              (d.basis ? "spline" : "standard") + " layout");
  d.regressors = n_coef / d.sequence_length;
  const auto h = static_cast<Eigen::Index>(spec.horizon_count());
  const Eigen::Index n_sigma = h * (h + 1) / 2;
  const Eigen::Index n_tau = is_roughness_prior(spec.prior) ? d.regressors : 0;
  const Eigen::Index n_lambda =
      spec.prior == PriorKind::AdaptiveRP ? d.regressors * (d.sequence_length - spec.penalty_order) : 0;
  const auto s = static_cast<Eigen::Index>(t.rows.size());
  require(s > 0, ErrorKind::EmptyDraws, path.string() + ": no draws");
  d.coeffs.resize(s, n_coef);
  d.sigma.resize(s, n_sigma);
  if (n_tau) d.tau.resize(s, n_tau);
  if (n_lambda) d.lambda.resize(s, n_lambda);
  const auto expected = draw_columns(d);
  require(expected == t.header, ErrorKind::ParseError,
          path.string() + ": column layout does not match the configured spec");
  for (Eigen::Index r = 0; r < s; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    Eigen::Index c = 0;
    for (Eigen::Index k = 0; k < n_coef; ++k) d.coeffs(r, k) = row[static_cast<std::size_t>(c++)];
    for (Eigen::Index k = 0; k < n_sigma; ++k) d.sigma(r, k) = row[static_cast<std::size_t>(c++)];
    for (Eigen::Index k = 0; k < n_tau; ++k) d.tau(r, k) = row[static_cast<std::size_t>(c++)];
    for (Eigen::Index k = 0; k < n_lambda; ++k) d.lambda(r, k) = row[static_cast<std::size_t>(c++)];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Commands

inline void require_section(bool present, const std::string& name) {
  require(present, ErrorKind::ConfigError, "config has no '" + name + "' section");
}

inline void cmd_simulate(const RunConfig& rc, std::ostream& log = std::cerr) {
  require_section(rc.simulate.has_value(), "simulate");
  DgpSpec dgp = *rc.simulate;
  dgp.seed = rc.seed;
  const std::string hash = hash_of({{"command", "simulate"}, {"seed", rc.seed}, {"simulate", effective_json(dgp)}});
  const Metadata meta = base_metadata("simulate", hash, rc);
  RngStream rng(dgp.seed, data_stream(0));
  const SimulatedData data = simulate(dgp, rng);
  ensure_dir(rc.out);

  std::string series = csv_preamble(meta) + "t,y,z\n";
  for (Eigen::Index t = 0; t < data.y.size(); ++t)
    series += std::to_string(t) + "," + format_double(data.y(t)) + "," + format_double(data.z(t)) + "\n";
  write_text(rc.out / "series.csv", series);

  std::string irf = csv_preamble(meta) + "horizon,regime1,regime2\n";
  for (Eigen::Index l = 0; l < data.truth.regime1.size(); ++l)
    irf += std::to_string(l) + "," + format_double(data.truth.regime1(l)) + "," +
           format_double(data.truth.regime2(l)) + "\n";
  write_text(rc.out / "true_irf.csv", irf);

  json m{{"metadata", json_metadata(meta)}, {"simulate", effective_json(dgp)}, {"raw_length", data.y.size()}};
  write_text(rc.out / "metadata.json", m.dump(2) + "\n");
  log << "simulate: wrote " << data.y.size() << " observations to " << rc.out.string() << "\n";
}

struct EstimationInput {
  std::string response;
  SeriesBundle bundle;
  std::vector<std::string> regressor_names;
};

inline std::vector<EstimationInput> load_estimation_inputs(const EstimateConfig& e) {
  std::vector<EstimationInput> out;
  if (e.data.kind == DataKind::Simulated) {
    const CsvTable t = read_csv_table(e.data.series);
    const std::vector<std::string> want{"t", "y", "z"};
    require(t.header == want, ErrorKind::ParseError, e.data.series.string() + ": expected columns t,y,z");
    require(!t.rows.empty(), ErrorKind::InsufficientData, e.data.series.string() + ": no observations");
    SimulatedData data;
    const auto n = static_cast<Eigen::Index>(t.rows.size());
    data.y.resize(n);
    data.z.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      data.y(i) = t.rows[static_cast<std::size_t>(i)][1];
      data.z(i) = t.rows[static_cast<std::size_t>(i)][2];
    }
    EstimationInput in{"y", simulation_bundle(data), {"z", "const"}};
    for (const char* s : {"y", "z"})
      for (int l = 1; l <= e.lags; ++l) in.regressor_names.push_back(std::string(s) + "_lag" + std::to_string(l));
    out.push_back(std::move(in));
    return out;
  }
  auto load = [](const SeriesSource& src) {
    MonthlySeries s = load_csv_series(src.path, ColumnSpec{src.column, src.name});
    return src.log_diff ? log_diff_annualized(s) : s;
  };
  std::vector<MonthlySeries> macro;
  for (const auto& src : e.data.macro) macro.push_back(load(src));
  const MonthlySeries shock = load(e.data.shock);
  for (const auto& resp : e.data.responses) {
    ApplicationData app = build_application_design(macro, shock, resp, e.lags, e.data.trend);
    out.push_back({resp, std::move(app.bundle), std::move(app.regressor_names)});
  }
  return out;
}

inline json ess_json(const PosteriorDraws& draws) {
  const Matrix irf = draws.irf_draws(0);
  json horizons = json::array(), values = json::array();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < irf.cols(); ++i) {
    const double e = effective_sample_size(irf.col(i));
    horizons.push_back(draws.spec.horizons[static_cast<std::size_t>(i)]);
    values.push_back(e);
    lo = std::min(lo, e);
  }
  return {{"horizon", horizons}, {"irf", values}, {"min", lo}};
}

inline std::string estimate_config_hash(const RunConfig& rc) {
  return hash_of({{"command", "estimate"},
                  {"seed", rc.seed},
                  {"chains", rc.chains},
                  {"estimate", effective_json(*rc.estimate)}});
}

inline void cmd_estimate(const RunConfig& rc, std::ostream& log = std::cerr) {
  require_section(rc.estimate.has_value(), "estimate");
  const EstimateConfig& e = *rc.estimate;
  if (e.data.kind == DataKind::Simulated) {
    require(fs::exists(e.data.series), ErrorKind::IoError, "estimate.data.simulated: no such file " + e.data.series.string());
  }
  SamplerConfig sampler = e.sampler;
  sampler.seed = rc.seed;
  Metadata meta = base_metadata("estimate", estimate_config_hash(rc), rc);
  meta.emplace_back("spec_hash", spec_hash(e));
  meta.emplace_back("chains", std::to_string(rc.chains));
  const auto inputs = load_estimation_inputs(e);
  ensure_dir(rc.out);
  for (const auto& in : inputs) {
    DesignSet design = build_design(in.bundle, e.spec, e.lags);
    const PosteriorDraws draws =
        e.spec.spline ? run_chains(SplineProjection(design, e.spec), sampler, rc.chains, rc.threads)
                      : run_chains(StandardProjection(design, e.spec), sampler, rc.chains, rc.threads);
    Metadata m = meta;
    m.emplace_back("response", in.response);
    write_text(rc.out / ("draws_" + in.response + ".csv"), draws_csv(draws, m));
    write_text(rc.out / ("irf_" + in.response + ".csv"), irf_csv(summarize_irf(draws, 0), m));
    const FitReport fit = fit_report(draws, design);
    json report{{"metadata", json_metadata(m)},
                {"response", in.response},
                {"draws", draws.size()},
                {"t_eff", design.t_eff()},
                {"regressors", in.regressor_names},
                {"dic", fit.dic},
                {"p_dic", fit.p_dic},
                {"waic", fit.waic},
                {"p_waic", fit.p_waic},
                {"lppd", fit.lppd},
                {"loglik_at_mean", fit.loglik_at_mean},
                {"mean_loglik", fit.mean_loglik},
                {"warnings", fit.warnings},
                {"ess", ess_json(draws)}};
    write_text(rc.out / ("fit_" + in.response + ".json"), report.dump(2) + "\n");
    log << "estimate: " << in.response << ": " << draws.size() << " draws in " << draws.seconds << " s\n";
  }
}

inline void cmd_summarize(const RunConfig& rc, std::ostream& log = std::cerr) {
  require_section(rc.estimate.has_value(), "estimate");
  const EstimateConfig& e = *rc.estimate;
  const fs::path dir = rc.summarize && rc.summarize->draws_dir ? *rc.summarize->draws_dir : rc.out;
  const std::string expected = spec_hash(e);
  for (const auto& resp : e.data.responses) {
    const fs::path path = dir / ("draws_" + resp + ".csv");
    require(fs::exists(path), ErrorKind::IoError, "summarize: no draws file " + path.string() + " (run estimate first)");
    const auto stored = read_metadata(path);
    const auto found = stored.find("spec_hash");
    require(found != stored.end(), ErrorKind::ParseError, path.string() + ": missing spec_hash metadata");
    require(found->second == expected, ErrorKind::ConfigError,
            "summarize: " + path.string() + " was produced with spec hash " + found->second +
                " but the estimate section of this config hashes to " + expected +
                "; the draws cannot be interpreted under this config");
    const PosteriorDraws draws = read_draws(path, e.spec);
    Metadata meta = base_metadata("summarize", hash_of({{"command", "summarize"}, {"estimate", effective_json(e)}}), rc);
    meta.emplace_back("spec_hash", expected);
    meta.emplace_back("draws_config_hash", stored.count("config_hash") ? stored.at("config_hash") : "");
    meta.emplace_back("response", resp);
    ensure_dir(rc.out);
    write_text(rc.out / ("plot_" + resp + ".csv"), irf_csv(summarize_irf(draws, 0), meta));
    log << "summarize: " << resp << ": " << draws.size() << " draws\n";
  }
}

struct BenchmarkRow {
  int t_eff;
  DgpKind dgp;
  PriorKind prior;
  bool bspline;
  std::optional<double> nu;
};

inline std::string prior_label(PriorKind p) {
  switch (p) {
    case PriorKind::Normal: return "Normal";
    case PriorKind::NonAdaptiveRP: return "N-RP";
    case PriorKind::AdaptiveRP: return "A-RP";
  }
  return "?";
}

/// Experiment matrix in T, DGP, prior, bspline, nu order. Normal rows carry no nu.
inline std::vector<BenchmarkRow> benchmark_rows(const BenchmarkConfig& b) {
  std::vector<BenchmarkRow> rows;
  for (int t : b.t_values)
    for (auto dgp : b.dgps)
      for (auto prior : b.priors)
        for (bool spline : b.bspline) {
          if (!is_roughness_prior(prior)) {
            rows.push_back({t, dgp, prior, spline, std::nullopt});
            continue;
          }
          for (double nu : b.nu) rows.push_back({t, dgp, prior, spline, nu});
        }
  require(!rows.empty(), ErrorKind::ConfigError, "benchmark: experiment matrix is empty");
  return rows;
}

inline ExperimentCell benchmark_cell(const BenchmarkConfig& b, const BenchmarkRow& row, std::uint64_t seed) {
  ExperimentCell cell;
  cell.dgp.kind = row.dgp;
  cell.dgp.max_lag = b.max_lag;
  cell.dgp.t_eff = row.t_eff;
  cell.dgp.seed = seed;
  cell.dgp.r_shape = b.r_shape;
  cell.dgp.noise_sd = b.noise_sd;
  cell.dgp.estimation_lags = b.lags;
  cell.projection = b.base;
  cell.projection.horizons = ProjectionSpec::with_horizons(0, b.max_lag).horizons;
  cell.projection.prior = row.prior;
  if (row.nu) cell.projection.hyper.nu1 = cell.projection.hyper.nu2 = *row.nu;
  if (row.bspline) cell.projection.spline = b.spline;
  cell.sampler = b.sampler;
  cell.sampler.seed = seed;
  cell.lags = b.lags;
  cell.normalization = b.normalization;
  return cell;
}

inline void cmd_benchmark(const RunConfig& rc, std::ostream& log = std::cerr) {
  require_section(rc.benchmark.has_value(), "benchmark");
  const BenchmarkConfig& b = *rc.benchmark;
  const auto rows = benchmark_rows(b);
  std::vector<ExperimentCell> cells;
  for (const auto& row : rows) cells.push_back(benchmark_cell(b, row, rc.seed));
  for (const auto& c : cells) {
    detail::field_context("benchmark", [&] {
      c.dgp.validate();
      c.projection.validate();
      return 0;
    });
  }
  const std::string hash = hash_of({{"command", "benchmark"}, {"seed", rc.seed}, {"benchmark", effective_json(b)}});
  const Metadata meta = base_metadata("benchmark", hash, rc);
  ensure_dir(rc.out);
  const auto reports = run_experiment(cells, b.replications, rc.threads);

  std::string csv = csv_preamble(meta) + "T,DGP,prior,bspline,nu,MSE,Coverage,Length,Speed,failures\n";
  std::string failures;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto& r = reports[i];
    const bool ok = r.replications > 0;
    auto metric = [&](double v) { return ok ? format_double(v) : std::string("NA"); };
    csv += std::to_string(row.t_eff) + "," + std::string(to_string(row.dgp)) + "," + prior_label(row.prior) + "," +
           (row.bspline ? "yes" : "no") + "," + (row.nu ? format_double(*row.nu) : "NA") + "," + metric(r.mse) + "," +
           metric(r.coverage) + "," + metric(r.length) + "," + metric(r.speed_seconds) + "," +
           std::to_string(r.failures) + "\n";
    for (const auto& msg : r.failure_messages) failures += "# failure row " + std::to_string(i) + ": " + msg + "\n";
  }
  write_text(rc.out / "metrics.csv", csv + failures);
  int total_failures = 0;
  for (const auto& r : reports) total_failures += r.failures;
  log << "benchmark: " << rows.size() << " rows x " << b.replications << " replications, " << total_failures
      << " failed\n";
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(const std::vector<std::string>& args, std::ostream& log = std::cerr) {
  CLI::App app{"Smoothed local-projection impulse responses", "blp"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int chains = 0;
  unsigned threads = 0;
  auto* o_config = app.add_option("--config", config_path, "JSON run configuration")->required();
  auto* o_seed = app.add_option("--seed", seed, "RNG seed (overrides the config)");
  auto* o_out = app.add_option("--out", out, "output directory (overrides the config)");
  auto* o_chains = app.add_option("--chains", chains, "independent chains for estimate")->check(CLI::PositiveNumber);
  auto* o_threads = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  (void)o_config;
  auto* simulate = app.add_subcommand("simulate", "simulate a synthetic data set and its true IRF");
  auto* estimate = app.add_subcommand("estimate", "run the Gibbs sampler on configured data");
  auto* summarize = app.add_subcommand("summarize", "turn stored draws into plot data");
  auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo comparison of prior specifications");

  std::vector<const char*> argv{"blp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream cli_out, cli_err;
    const int code = app.exit(e, cli_out, cli_err);
    log << cli_out.str() << cli_err.str();
    return code == 0 ? kOk : kConfigError;
  }

  Overrides over;
  if (*o_seed) over.seed = seed;
  if (*o_out) over.out = out;
  if (*o_chains) over.chains = chains;
  if (*o_threads) over.threads = threads;
  try {
    const RunConfig rc = load_config(config_path, over);
    if (simulate->parsed()) cmd_simulate(rc, log);
    else if (estimate->parsed()) cmd_estimate(rc, log);
    else if (summarize->parsed()) cmd_summarize(rc, log);
    else if (benchmark->parsed()) cmd_benchmark(rc, log);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

}  // namespace blp::cli
