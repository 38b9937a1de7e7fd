#pragma once

#include <stdexcept>
#include <string>

namespace fairreg {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (dataset, config, report). Message names the
/// offending line or key.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

/// Invalid configuration or violated operation precondition.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// A metric has no defined value on the given inputs (e.g. no negative
/// examples in a group). Message carries the relevant counts.
class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(const std::string& msg) : Error(msg) {}
};

/// Non-finite value encountered where training must abort.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace fairreg
