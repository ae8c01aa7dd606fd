#pragma once

// Domain types, losses and risk functionals shared by every module.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "lrl/errors.hpp"
#include "lrl/random.hpp"

namespace lrl {

enum class LossKind { ScaledSquared, BinaryCrossEntropy, ZeroOne };

inline std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ScaledSquared: return "scaled_squared";
    case LossKind::BinaryCrossEntropy: return "bce";
    case LossKind::ZeroOne: return "zero_one";
  }
  return "unknown";
}

inline LossKind loss_kind_from_string(std::string_view name) {
  if (name == "scaled_squared" || name == "squared") return LossKind::ScaledSquared;
  if (name == "bce" || name == "logistic") return LossKind::BinaryCrossEntropy;
  if (name == "zero_one") return LossKind::ZeroOne;
  throw InvalidInput("unknown loss kind '" + std::string(name) + "'");
}

/// Tolerance on ||B^T B - I||_F accepted by SemiOrthogonalMatrix.
inline constexpr double kStiefelTolerance = 1e-8;

/// Probability clamp applied before evaluating binary cross-entropy.
inline constexpr double kProbabilityClamp = 1e-12;

inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

inline double stiefel_defect(const Eigen::MatrixXd& b) {
  return (b.transpose() * b - Eigen::MatrixXd::Identity(b.cols(), b.cols())).norm();
}

/// A d x k matrix with orthonormal columns; represents h(x) = B^T x.
class SemiOrthogonalMatrix {
 public:
  explicit SemiOrthogonalMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    detail::require(entries_.cols() >= 1 && entries_.rows() >= entries_.cols(),
                    "semi-orthogonal matrix needs 1 <= k <= d");
    detail::require(entries_.allFinite(), "semi-orthogonal matrix has non-finite entries");
    const double defect = stiefel_defect(entries_);
    if (defect > kStiefelTolerance)
      throw InvalidInput("matrix is not semi-orthogonal: ||B^T B - I||_F = " + std::to_string(defect));
  }

  const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
  Eigen::Index ambient_dim() const noexcept { return entries_.rows(); }
  Eigen::Index rep_dim() const noexcept { return entries_.cols(); }

  Eigen::VectorXd represent(const Eigen::VectorXd& x) const { return entries_.transpose() * x; }

 private:
  Eigen::MatrixXd entries_;
};

/// Linear prediction head w with ||w|| <= norm_bound.
struct PredictionHead {
  Eigen::VectorXd w;
  double norm_bound = std::numeric_limits<double>::infinity();

  PredictionHead() = default;
  PredictionHead(Eigen::VectorXd weights, double bound) : w(std::move(weights)), norm_bound(bound) {
    detail::require(norm_bound > 0.0, "head norm bound must be positive");
    project();
  }

  static PredictionHead zeros(Eigen::Index k, double bound) { return {Eigen::VectorXd::Zero(k), bound}; }

  void project() {
    const double n = w.norm();
    if (n > norm_bound) w *= norm_bound / n;
  }
};

/// Score s = w^T B^T x mapped through the loss' link.
struct Predictor {
  SemiOrthogonalMatrix representation;
  PredictionHead head;
  LossKind loss = LossKind::ScaledSquared;

  Eigen::VectorXd direction() const { return representation.matrix() * head.w; }

  double score(const Eigen::VectorXd& x) const { return head.w.dot(representation.represent(x)); }

  double predict(const Eigen::VectorXd& x) const {
    const double s = score(x);
    switch (loss) {
      case LossKind::ScaledSquared: return s;
      case LossKind::BinaryCrossEntropy: return sigmoid(s);
      case LossKind::ZeroOne: return s >= 0.0 ? 1.0 : -1.0;
    }
    return s;
  }
};

/// m labelled examples stored row-wise: inputs is m x d, targets has length m.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  int task_id = 0;

  Eigen::Index size() const noexcept { return targets.size(); }
  Eigen::Index dim() const noexcept { return inputs.cols(); }

  void validate() const {
    detail::require(targets.size() >= 1, "dataset is empty");
    detail::require(inputs.rows() == targets.size(), "dataset inputs/targets length mismatch");
  }
};

inline double loss_value(LossKind kind, double prediction, double target) {
  if (!std::isfinite(prediction) || !std::isfinite(target))
    throw InvalidInput("loss_value: non-finite argument");
  switch (kind) {
    case LossKind::ScaledSquared: {
      const double r = prediction - target;
      return 0.25 * r * r;
    }
    case LossKind::BinaryCrossEntropy: {
      const double p = std::clamp(prediction, kProbabilityClamp, 1.0 - kProbabilityClamp);
      return -target * std::log(p) - (1.0 - target) * std::log1p(-p);
    }
    case LossKind::ZeroOne: return (prediction > 0.0) != (target > 0.0) ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace detail {

/// Largest |logit| reachable once probabilities are clamped.
inline double logit_clamp() {
  static const double value = std::log((1.0 - kProbabilityClamp) / kProbabilityClamp);
  return value;
}

/// Loss as a function of the raw score s = w^T B^T x.
inline double loss_from_score(LossKind kind, double s, double y) {
  switch (kind) {
    case LossKind::ScaledSquared: return 0.25 * (s - y) * (s - y);
    case LossKind::BinaryCrossEntropy: {
      const double c = std::clamp(s, -logit_clamp(), logit_clamp());
      // softplus(c) - y c, written to avoid overflow.
      return std::max(c, 0.0) + std::log1p(std::exp(-std::abs(c))) - y * c;
    }
    case LossKind::ZeroOne: return (s >= 0.0) != (y > 0.0) ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace detail

/// Mean loss of the predictor over the dataset.
inline double empirical_risk(const Predictor& predictor, const Dataset& data) {
  data.validate();
  detail::require(data.dim() == predictor.representation.ambient_dim(), "empirical_risk: dimension mismatch");
  const Eigen::VectorXd scores = data.inputs * predictor.direction();
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    total += detail::loss_from_score(predictor.loss, scores[i], data.targets[i]);
  return total / static_cast<double>(data.size());
}

/// Anything that can produce a fresh i.i.d. sample given a seed.
template <class T>
concept SampleSource = requires(const T& task, Eigen::Index m, std::uint64_t seed) {
  { task.sample(m, seed) } -> std::same_as<Dataset>;
};

struct RiskEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of L_P(f o h) with its standard error.
///
/// The sample is drawn in chunks of at most 2^16 examples, chunk c seeded by
/// derive_seed(seed, {c}), so memory stays bounded for 10^6-sample estimates.
template <SampleSource Task>
RiskEstimate population_risk_estimate(const Predictor& predictor, const Task& task, Eigen::Index n_samples,
                                      std::uint64_t seed) {
  detail::require(n_samples >= 1, "population_risk_mc: n_samples must be >= 1");
  constexpr Eigen::Index kChunk = Eigen::Index{1} << 16;
  double sum = 0.0;
  double sum_sq = 0.0;
  const Eigen::VectorXd theta = predictor.direction();
  std::uint64_t chunk = 0;
  for (Eigen::Index done = 0; done < n_samples; done += kChunk, ++chunk) {
    const Eigen::Index m = std::min(kChunk, n_samples - done);
    const Dataset data = task.sample(m, derive_seed(seed, {chunk}));
    detail::require(data.dim() == theta.size(), "population_risk_mc: dimension mismatch");
    const Eigen::VectorXd scores = data.inputs * theta;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double l = detail::loss_from_score(predictor.loss, scores[i], data.targets[i]);
      sum += l;
      sum_sq += l * l;
    }
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

/// Monte-Carlo estimate of the population risk L_P(f o h); deterministic given seed.
template <SampleSource Task>
double population_risk_mc(const Predictor& predictor, const Task& task, Eigen::Index n_samples, std::uint64_t seed) {
  return population_risk_estimate(predictor, task, n_samples, seed).mean;
}

}  // namespace lrl
