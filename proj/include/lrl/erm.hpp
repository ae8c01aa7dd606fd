#pragma once

// Single-task, multi-task and frozen-representation ERM by full-batch
// first-order optimisation. The representation is retracted onto the Stiefel
// manifold after every step and heads are projected onto their norm ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lrl/core.hpp"
#include "lrl/errors.hpp"
#include "lrl/linalg.hpp"

namespace lrl {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  int max_epochs = 10000;
  int early_stop_patience = 20;
  /// Adam-style first/second moment step adaptation; plain gradient descent when false.
  bool adaptive_moments = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double moment_epsilon = 1e-8;
  /// An epoch counts as an improvement only if it lowers the best objective by more than this.
  double tolerance = 1e-9;
  /// Norm bound applied to every prediction head.
  double head_norm_bound = std::numeric_limits<double>::infinity();

  void validate() const {
    detail::require(learning_rate > 0.0, "optimizer: learning_rate must be positive");
    detail::require(max_epochs >= 1, "optimizer: max_epochs must be >= 1");
    detail::require(early_stop_patience >= 1, "optimizer: early_stop_patience must be >= 1");
    detail::require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "optimizer: decay rates must lie in [0, 1)");
    detail::require(tolerance >= 0.0, "optimizer: tolerance must be non-negative");
    detail::require(head_norm_bound > 0.0, "optimizer: head_norm_bound must be positive");
  }
};

struct MultiTaskSolution {
  SemiOrthogonalMatrix representation;
  std::vector<PredictionHead> heads;
  double final_objective = 0.0;
  int epochs = 0;
  /// Best objective seen after each epoch (non-increasing).
  std::vector<double> best_trace;
};

/// Starting point for multi_task_erm; heads may be shorter than the dataset
/// list, in which case the remaining heads start at zero.
struct MultiTaskInit {
  SemiOrthogonalMatrix representation;
  std::vector<Eigen::VectorXd> heads;
};

struct ObjectiveGradient {
  double objective = 0.0;
  Eigen::MatrixXd grad_representation;
  std::vector<Eigen::VectorXd> grad_heads;
};

namespace detail {

inline void check_trainable(LossKind loss) {
  if (loss == LossKind::ZeroOne)
    throw InvalidInput("zero-one loss is not differentiable; train with a surrogate such as binary cross-entropy");
}

/// Mean loss over `data` at score vector s, and dLoss/ds for each example (unnormalised).
inline double loss_and_residual(LossKind loss, const Eigen::VectorXd& s, const Eigen::Ref<const Eigen::VectorXd>& y,
                                Eigen::VectorXd& r) {
  const double m = static_cast<double>(s.size());
  if (loss == LossKind::ScaledSquared) {
    r = 0.5 * (s - y);
    return r.squaredNorm() / m;  // (1/4)(s - y)^2 = r^2
  }
  const double cap = logit_clamp();
  const Eigen::ArrayXd c = s.array().max(-cap).min(cap);
  const Eigen::ArrayXd e = (-c.abs()).exp();
  const Eigen::ArrayXd losses = c.max(0.0) + e.log1p() - y.array() * c;
  const Eigen::ArrayXd sig = (c >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
  r = ((s.array().abs() > cap).select(Eigen::ArrayXd::Zero(s.size()), sig - y.array())).matrix();
  return losses.sum() / m;
}

class Moments {
 public:
  Moments(Eigen::Index rows, Eigen::Index cols) : m_(Eigen::MatrixXd::Zero(rows, cols)), v_(Eigen::MatrixXd::Zero(rows, cols)) {}

  template <class Derived>
  Eigen::MatrixXd step(const OptimizerConfig& cfg, const Eigen::MatrixBase<Derived>& grad, int t) {
    if (!cfg.adaptive_moments) return cfg.learning_rate * grad;
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    return (cfg.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg.moment_epsilon)).matrix();
  }

 private:
  Eigen::MatrixXd m_;
  Eigen::MatrixXd v_;
};

}  // namespace detail

/// Objective (1/n) sum_i L_{S_i}(f_i o h) and its Euclidean gradient in (B, w_1..w_n).
inline ObjectiveGradient multi_task_objective(const Eigen::MatrixXd& b, const std::vector<Eigen::VectorXd>& heads,
                                              std::span<const Dataset> datasets, LossKind loss) {
  detail::check_trainable(loss);
  detail::require(heads.size() == datasets.size(), "multi_task_objective: one head per dataset");
  const double n = static_cast<double>(datasets.size());
  ObjectiveGradient out{0.0, Eigen::MatrixXd::Zero(b.rows(), b.cols()), {}};
  out.grad_heads.reserve(heads.size());
  Eigen::VectorXd s;
  Eigen::VectorXd r;
  // Rows are processed in blocks so the second pass (X^T r) hits cache.
  constexpr Eigen::Index kBlock = 4096;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const Dataset& data = datasets[i];
    const Eigen::VectorXd theta = b * heads[i];
    const Eigen::Index m = data.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(b.rows());
    double total = 0.0;
    for (Eigen::Index start = 0; start < m; start += kBlock) {
      const Eigen::Index len = std::min(kBlock, m - start);
      const auto rows = data.inputs.middleRows(start, len);
      s.noalias() = rows * theta;
      total += detail::loss_and_residual(loss, s, data.targets.segment(start, len), r) * static_cast<double>(len);
      g.noalias() += rows.transpose() * r;
    }
    const double scale = 1.0 / (static_cast<double>(m) * n);
    out.objective += total * scale;
    g *= scale;
    out.grad_representation.noalias() += g * heads[i].transpose();
    out.grad_heads.emplace_back(b.transpose() * g);
  }
  return out;
}

/// Jointly fits a shared representation and one head per dataset.
///
/// Heads start at zero and B at random_semi_orthogonal(d, k, seed) unless an
/// initial point is given. Returns the best iterate seen; this is a local
/// solution of a non-convex problem.
inline MultiTaskSolution multi_task_erm(std::span<const Dataset> datasets, Eigen::Index d, Eigen::Index k, LossKind loss,
                                        const OptimizerConfig& cfg, std::uint64_t seed,
                                        const std::optional<MultiTaskInit>& init = std::nullopt) {
  detail::check_trainable(loss);
  cfg.validate();
  detail::require(!datasets.empty(), "multi_task_erm: no datasets");
  detail::require(k >= 1 && k <= d, "multi_task_erm: need 1 <= k <= d");
  for (const auto& data : datasets) {
    data.validate();
    detail::require(data.dim() == d, "multi_task_erm: dataset dimension does not match d");
  }

  Eigen::MatrixXd b = init ? init->representation.matrix() : random_semi_orthogonal(d, k, seed).matrix();
  detail::require(b.rows() == d && b.cols() == k, "multi_task_erm: initial representation has wrong shape");
  std::vector<Eigen::VectorXd> heads(datasets.size(), Eigen::VectorXd::Zero(k));
  if (init) {
    detail::require(init->heads.size() <= datasets.size(), "multi_task_erm: too many initial heads");
    for (std::size_t i = 0; i < init->heads.size(); ++i) {
      detail::require(init->heads[i].size() == k, "multi_task_erm: initial head has wrong size");
      heads[i] = PredictionHead(init->heads[i], cfg.head_norm_bound).w;
    }
  }

  detail::Moments b_moments(d, k);
  std::vector<detail::Moments> head_moments(datasets.size(), detail::Moments(k, 1));

  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_b = b;
  std::vector<Eigen::VectorXd> best_heads = heads;
  std::vector<double> trace;
  int since_improvement = 0;
  int epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    const ObjectiveGradient og = multi_task_objective(b, heads, datasets, loss);
    if (!std::isfinite(og.objective)) break;
    const bool improved = og.objective < best - cfg.tolerance;
    if (og.objective < best) {
      best = og.objective;
      best_b = b;
      best_heads = heads;
    }
    trace.push_back(best);
    if (improved) {
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      ++epoch;
      break;
    }
    const int t = epoch + 1;
    b -= b_moments.step(cfg, og.grad_representation, t);
    b = retract_to_stiefel(b).matrix();
    for (std::size_t i = 0; i < heads.size(); ++i) {
      heads[i] -= head_moments[i].step(cfg, og.grad_heads[i], t);
      const double norm = heads[i].norm();
      if (norm > cfg.head_norm_bound) heads[i] *= cfg.head_norm_bound / norm;
    }
  }

  MultiTaskSolution sol{SemiOrthogonalMatrix(std::move(best_b)), {}, best, epoch, std::move(trace)};
  sol.heads.reserve(best_heads.size());
  for (auto& w : best_heads) sol.heads.emplace_back(std::move(w), cfg.head_norm_bound);
  return sol;
}

/// Multi-task ERM with a single dataset.
inline std::pair<SemiOrthogonalMatrix, PredictionHead> single_task_erm(const Dataset& data, Eigen::Index d, Eigen::Index k,
                                                                       LossKind loss, const OptimizerConfig& cfg,
                                                                       std::uint64_t seed) {
  MultiTaskSolution sol = multi_task_erm(std::span<const Dataset>(&data, 1), d, k, loss, cfg, seed);
  return {std::move(sol.representation), std::move(sol.heads.front())};
}

struct HeadFit {
  PredictionHead head;
  double objective = 0.0;
  int epochs = 0;
};

/// Trains only the head on features B^T x with B frozen (a convex problem for
/// both trainable losses). Starts from zero unless `init` is given.
inline HeadFit frozen_rep_erm_detailed(const Dataset& data, const SemiOrthogonalMatrix& representation, LossKind loss,
                                       const OptimizerConfig& cfg, std::uint64_t /*seed*/,
                                       const std::optional<Eigen::VectorXd>& init = std::nullopt) {
  detail::check_trainable(loss);
  cfg.validate();
  data.validate();
  detail::require(data.dim() == representation.ambient_dim(), "frozen_rep_erm: dimension mismatch");
  const Eigen::Index k = representation.rep_dim();
  const Eigen::MatrixXd features = data.inputs * representation.matrix();
  const double m = static_cast<double>(data.size());

  Eigen::VectorXd w = init ? PredictionHead(*init, cfg.head_norm_bound).w : Eigen::VectorXd::Zero(k);
  detail::require(w.size() == k, "frozen_rep_erm: initial head has wrong size");
  detail::Moments moments(k, 1);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w = w;
  int since_improvement = 0;
  int epoch = 0;
  Eigen::VectorXd s;
  Eigen::VectorXd r;
  for (; epoch < cfg.max_epochs; ++epoch) {
    s.noalias() = features * w;
    const double objective = detail::loss_and_residual(loss, s, data.targets, r);
    if (!std::isfinite(objective)) break;
    const bool improved = objective < best - cfg.tolerance;
    if (objective < best) {
      best = objective;
      best_w = w;
    }
    if (improved) {
      since_improvement = 0;
    } else if (++since_improvement >= cfg.early_stop_patience) {
      ++epoch;
      break;
    }
    const Eigen::VectorXd grad = features.transpose() * r / m;
    w -= moments.step(cfg, grad, epoch + 1);
    const double norm = w.norm();
    if (norm > cfg.head_norm_bound) w *= cfg.head_norm_bound / norm;
  }
  return {PredictionHead(std::move(best_w), cfg.head_norm_bound), best, epoch};
}

inline PredictionHead frozen_rep_erm(const Dataset& data, const SemiOrthogonalMatrix& representation, LossKind loss,
                                     const OptimizerConfig& cfg, std::uint64_t seed) {
  return frozen_rep_erm_detailed(data, representation, loss, cfg, seed).head;
}

}  // namespace lrl
