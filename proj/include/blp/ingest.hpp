#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "blp/error.hpp"
#include "blp/kernel.hpp"
#include "blp/model.hpp"

namespace blp {

struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int idx) { return {idx / 12, idx % 12 + 1}; }
  YearMonth next() const { return from_index(index() + 1); }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }
};

struct Observation {
  YearMonth month;
  double value;
};

/// Monthly series with strictly increasing, gap-free months.
struct MonthlySeries {
  std::string name;
  std::vector<Observation> observations;

  std::size_t size() const { return observations.size(); }
  YearMonth first() const { return observations.front().month; }
  YearMonth last() const { return observations.back().month; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Accepts YYYY-MM and YYYY-MM-DD.
inline std::optional<YearMonth> parse_year_month(std::string_view s) {
  if (s.size() != 7 && s.size() != 10) return std::nullopt;
  if (s[4] != '-') return std::nullopt;
  const auto y = detail::parse_int(s.substr(0, 4));
  const auto m = detail::parse_int(s.substr(5, 2));
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  if (s.size() == 10) {
    if (s[7] != '-') return std::nullopt;
    const auto d = detail::parse_int(s.substr(8, 2));
    if (!d || *d < 1 || *d > 31) return std::nullopt;
  }
  return YearMonth{*y, *m};
}

struct ColumnSpec {
  std::optional<std::string> value_column;  // header name; default: second column
  std::optional<std::string> name;          // default: the value column header
};

/// Parses a header + (date, value) CSV. Line numbers in errors are 1-based
/// file lines.
inline MonthlySeries parse_csv_series(std::istream& in, const ColumnSpec& spec = {},
                                      const std::string& source = "<stream>") {
  std::string line;
  int line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    header_line = line;
    break;
  }
  require(!header_line.empty(), ErrorKind::ParseError, source + ": missing header row");
  header = detail::split_csv(header_line);
  require(header.size() >= 2, ErrorKind::ParseError, source + ": need (date, value) columns");
  std::size_t col = 1;
  if (spec.value_column) {
    const auto it = std::find(header.begin(), header.end(), *spec.value_column);
    require(it != header.end(), ErrorKind::ParseError,
            source + ": no column named '" + *spec.value_column + "'");
    col = static_cast<std::size_t>(it - header.begin());
  }
  MonthlySeries s;
  s.name = spec.name.value_or(std::string(header[col]));
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    const auto cells = detail::split_csv(line);
    const auto where = source + " line " + std::to_string(line_no) + " ('" + line + "')";
    require(cells.size() == header.size(), ErrorKind::ParseError, where + ": wrong number of cells");
    const auto ym = parse_year_month(cells[0]);
    require(ym.has_value(), ErrorKind::ParseError, where + ": bad date");
    const auto v = parse_double(cells[col]);
    require(v.has_value(), ErrorKind::ParseError, where + ": non-numeric value");
    if (!s.observations.empty()) {
      const YearMonth prev = s.observations.back().month;
      require(*ym > prev, ErrorKind::ParseError, where + ": months not strictly increasing");
      require(*ym == prev.next(), ErrorKind::GapError,
              source + ": missing month " + prev.next().str() + " before line " + std::to_string(line_no));
    }
    s.observations.push_back({*ym, *v});
  }
  require(!s.observations.empty(), ErrorKind::ParseError, source + ": no observations");
  return s;
}

inline MonthlySeries load_csv_series(const std::filesystem::path& path, const ColumnSpec& spec = {}) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  return parse_csv_series(in, spec, path.string());
}

/// FRED-style CSV: DATE,<name> with first-of-month dates.
inline void write_csv_series(const MonthlySeries& s, std::ostream& out) {
  out << "DATE," << s.name << '\n';
  for (const auto& o : s.observations) out << o.month.str() << "-01," << format_double(o.value) << '\n';
}

/// out_t = 1200 (ln s_t - ln s_{t-1}).
inline MonthlySeries log_diff_annualized(const MonthlySeries& s) {
  for (const auto& o : s.observations)
    require(o.value > 0.0, ErrorKind::NonPositiveValue,
            s.name + ": non-positive value at " + o.month.str());
  MonthlySeries out{s.name, {}};
  for (std::size_t i = 1; i < s.observations.size(); ++i)
    out.observations.push_back({s.observations[i].month,
                                1200.0 * (std::log(s.observations[i].value) -
                                          std::log(s.observations[i - 1].value))});
  return out;
}

/// Trims every series to the common span.
inline std::vector<MonthlySeries> align_series(const std::vector<MonthlySeries>& series) {
  require(!series.empty(), ErrorKind::SpanMismatch, "no series to align");
  YearMonth lo = series.front().first();
  YearMonth hi = series.front().last();
  for (const auto& s : series) {
    require(!s.observations.empty(), ErrorKind::SpanMismatch, s.name + " is empty");
    lo = std::max(lo, s.first());
    hi = std::min(hi, s.last());
  }
  require(lo <= hi, ErrorKind::SpanMismatch, "series spans do not overlap");
  std::vector<MonthlySeries> out;
  for (const auto& s : series) {
    MonthlySeries t{s.name, {}};
    for (const auto& o : s.observations)
      if (o.month >= lo && o.month <= hi) t.observations.push_back(o);
    out.push_back(std::move(t));
  }
  return out;
}

struct ApplicationData {
  std::vector<YearMonth> months;
  SeriesBundle bundle;
  std::vector<std::string> regressor_names;
};

inline Vector to_vector(const MonthlySeries& s) {
  Vector v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v(static_cast<Eigen::Index>(i)) = s.observations[i].value;
  return v;
}

/// Regressors: shock, intercept, optional trend (1, 2, ... after trimming),
/// then `lags` lags of each macro series (sorted by name) and of the shock.
inline ApplicationData build_application_design(std::vector<MonthlySeries> macro, const MonthlySeries& shock,
                                                const std::string& response, int lags = 4,
                                                bool trend = true) {
  require(!macro.empty(), ErrorKind::InvalidParameter, "no macro series");
  std::sort(macro.begin(), macro.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < macro.size(); ++i)
    require(macro[i].name != macro[i - 1].name, ErrorKind::InvalidParameter,
            "duplicate series name " + macro[i].name);
  std::vector<MonthlySeries> all = macro;
  all.push_back(shock);
  const auto aligned = align_series(all);
  const auto n = aligned.front().size();
  require(n > static_cast<std::size_t>(lags), ErrorKind::InsufficientData,
          "common span of " + std::to_string(n) + " months too short for " + std::to_string(lags) + " lags");

  ApplicationData app;
  for (const auto& o : aligned.front().observations) app.months.push_back(o.month);
  const auto& shock_aligned = aligned.back();
  app.bundle.shock = to_vector(shock_aligned);
  app.regressor_names = {shock_aligned.name, "const"};
  if (trend) {
    app.bundle.contemporaneous.push_back(Vector::LinSpaced(static_cast<Eigen::Index>(n), 1.0, static_cast<double>(n)));
    app.regressor_names.push_back("trend");
  }
  bool found = false;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const auto& s = aligned[i];
    app.bundle.lagged.push_back(to_vector(s));
    for (int l = 1; l <= lags; ++l) app.regressor_names.push_back(s.name + "_lag" + std::to_string(l));
    if (i + 1 < aligned.size() && s.name == response) {
      app.bundle.response = to_vector(s);
      found = true;
    }
  }
  require(found, ErrorKind::InvalidParameter, "response '" + response + "' is not one of the macro series");
  return app;
}

}  // namespace blp
