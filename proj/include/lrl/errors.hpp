#pragma once

#include <stdexcept>
#include <string>

namespace lrl {

/// Argument outside an operation's domain (bad dimensions, non-finite values, ...).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// Input that is well-formed but numerically degenerate, e.g. a rank-deficient matrix.
class DegenerateInput : public std::domain_error {
 public:
  explicit DegenerateInput(const std::string& what) : std::domain_error(what) {}
};

/// A search or computation would exceed its configured budget.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

}  // namespace detail
}  // namespace lrl
