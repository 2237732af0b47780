#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blp {

enum class ErrorKind {
  NotPositiveDefinite,
  DimensionMismatch,
  InvalidParameter,
  InvalidOrder,
  InsufficientRange,
  OutOfSupport,
  InsufficientData,
  IndexOutOfRange,
  EmptyDraws,
  ParseError,
  GapError,
  NonPositiveValue,
  SpanMismatch,
  ConfigError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidOrder: return "InvalidOrder";
    case ErrorKind::InsufficientRange: return "InsufficientRange";
    case ErrorKind::OutOfSupport: return "OutOfSupport";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyDraws: return "EmptyDraws";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::GapError: return "GapError";
    case ErrorKind::NonPositiveValue: return "NonPositiveValue";
    case ErrorKind::SpanMismatch: return "SpanMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace blp
