#ifndef POPCACHE_ERRORS_HPP
#define POPCACHE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace popcache {

/// Dimension mismatch between vectors, layers or gradient sets.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A result that is not defined for the given input (e.g. MSE of an empty set).
class UndefinedResultError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or invalid configuration (JSON configs, CLI overrides).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Errors raised while reading a trace file; carries the 1-based line number.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TraceParseError : public TraceError {
 public:
  using TraceError::TraceError;
};

class TraceOrderError : public TraceError {
 public:
  using TraceError::TraceError;
};

/// A request timestamp that does not belong to the feature store's current epoch.
class EpochOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace popcache

#endif  // POPCACHE_ERRORS_HPP
