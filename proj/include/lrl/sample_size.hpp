#pragma once

// Per-round sample sizes m_N (multi-task ERM rounds) and m~ (few-shot tests).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "lrl/errors.hpp"

namespace lrl {

/// Sample-size formulas.
///
/// TheoreticalC1 evaluates the constant-explicit bounds with the covering-number
/// estimates log C(F, s) = 2k log(2e/s) and log C(H, s) = 2dk log(2e/s) for the
/// norm-bounded linear classes. Practical71 uses the desk-scale formulas
///   m_N = (dk + kN) log(1/eps) / eps^2,   m~ = k log(1/eps) / eps^2.
/// All logarithms are natural.
struct SampleSizePolicy {
  enum class Kind { TheoreticalC1, Practical71, Custom };

  Kind kind = Kind::Practical71;
  double epsilon = 0.05;
  double delta = 0.1;
  int T = 50;
  long d = 10;
  long k = 3;
  std::function<double(long N)> custom_m_N;
  std::function<double()> custom_m_tilde;

  void validate() const {
    detail::require(epsilon > 0.0 && epsilon < 1.0, "sample-size policy: epsilon must lie in (0, 1)");
    detail::require(delta > 0.0 && delta < 1.0, "sample-size policy: delta must lie in (0, 1)");
    detail::require(T >= 1, "sample-size policy: T must be >= 1");
    detail::require(k >= 1 && k <= d, "sample-size policy: need 1 <= k <= d");
    if (kind == Kind::Custom)
      detail::require(static_cast<bool>(custom_m_N) && static_cast<bool>(custom_m_tilde),
                      "sample-size policy: custom kind needs both formulas");
  }

  /// Default starting value of the eluder estimate N: ceil(k log(1/eps)) for the
  /// practical policy, 1 otherwise.
  long initial_N() const {
    validate();
    if (kind == Kind::Practical71)
      return std::max(1L, static_cast<long>(std::ceil(static_cast<double>(k) * std::log(1.0 / epsilon))));
    return 1;
  }
};

inline std::string_view to_string(SampleSizePolicy::Kind kind) {
  switch (kind) {
    case SampleSizePolicy::Kind::TheoreticalC1: return "theoretical";
    case SampleSizePolicy::Kind::Practical71: return "practical";
    case SampleSizePolicy::Kind::Custom: return "custom";
  }
  return "unknown";
}

inline SampleSizePolicy::Kind policy_kind_from_string(std::string_view name) {
  if (name == "theoretical") return SampleSizePolicy::Kind::TheoreticalC1;
  if (name == "practical") return SampleSizePolicy::Kind::Practical71;
  throw InvalidInput("unknown sample-size policy '" + std::string(name) + "'");
}

namespace detail {

inline long ceil_samples(double value) {
  detail::require(std::isfinite(value) && value > 0.0, "sample size formula produced a non-positive value");
  return std::max(1L, static_cast<long>(std::ceil(value)));
}

inline double log_binomial(double n, double r) {
  return std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0);
}

/// log sum_{i=0}^{floor(log2 N)} binom(T, 2^i), terms with 2^i > T being zero.
inline double log_binomial_doubling_sum(long T, long N) {
  std::vector<double> logs;
  for (long p = 1; p <= N; p *= 2) {
    if (p > T) break;
    logs.push_back(log_binomial(static_cast<double>(T), static_cast<double>(p)));
  }
  double top = logs.front();
  for (double v : logs) top = std::max(top, v);
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace detail

/// Log covering number of the head class at scale s.
inline double log_capacity_heads(long k, double scale) { return 2.0 * static_cast<double>(k) * std::log(2.0 * std::numbers::e / scale); }

/// Log covering number of the representation class at scale s.
inline double log_capacity_representations(long d, long k, double scale) {
  return 2.0 * static_cast<double>(d * k) * std::log(2.0 * std::numbers::e / scale);
}

/// Few-shot property-test sample size.
inline long m_tilde(const SampleSizePolicy& policy) {
  policy.validate();
  const double eps = policy.epsilon;
  switch (policy.kind) {
    case SampleSizePolicy::Kind::Practical71:
      return detail::ceil_samples(static_cast<double>(policy.k) / (eps * eps) * std::log(1.0 / eps));
    case SampleSizePolicy::Kind::TheoreticalC1: {
      const double bracket = log_capacity_heads(policy.k, eps / 128.0) + std::log(8.0 * policy.T / policy.delta);
      return detail::ceil_samples(1024.0 / (eps * eps) * bracket + 256.0 / (eps * eps));
    }
    case SampleSizePolicy::Kind::Custom: return detail::ceil_samples(policy.custom_m_tilde());
  }
  return 1;
}

/// Multi-task ERM sample size per task at eluder estimate N.
///
/// In the theoretical formula the factor log T is floored at 1 so that T = 1
/// stays well defined.
inline long m_N(const SampleSizePolicy& policy, long N) {
  policy.validate();
  detail::require(N >= 1, "m_N: N must be >= 1");
  const double eps = policy.epsilon;
  const double n = static_cast<double>(N);
  switch (policy.kind) {
    case SampleSizePolicy::Kind::Practical71:
      return detail::ceil_samples(static_cast<double>(policy.d * policy.k + policy.k * N) * std::log(1.0 / eps) / (eps * eps));
    case SampleSizePolicy::Kind::TheoreticalC1: {
      const double scale = eps / (64.0 * n);
      const double log_t = std::max(std::log(static_cast<double>(policy.T)), 1.0);
      const double confidence = std::log(16.0 * log_t) + detail::log_binomial_doubling_sum(policy.T, N) - std::log(policy.delta);
      const double bracket = log_capacity_representations(policy.d, policy.k, scale) + n * log_capacity_heads(policy.k, scale) + confidence;
      return detail::ceil_samples(256.0 * n / (eps * eps) * bracket + 64.0 / (eps * eps));
    }
    case SampleSizePolicy::Kind::Custom: return detail::ceil_samples(policy.custom_m_N(N));
  }
  return 1;
}

/// Per-task sample size of the independent single-task baseline: m_N at N = 1,
/// i.e. (dk + k) log(1/eps) / eps^2 under the practical policy.
inline long independent_sample_size(const SampleSizePolicy& policy) { return m_N(policy, 1); }

}  // namespace lrl
