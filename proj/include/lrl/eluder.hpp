#pragma once

// Task-eluder dimension for finite (representation, head) classes.
//
// For a center h and heads f_1..f_n, (h, f_n) is eps-independent of its
// predecessors when some witness h' satisfies
//   sum_{i<n} min_{f'} excess(h, f_i; h', f') <= eps   and
//   min_{f'} excess(h, f_n; h', f') > eps / 2.
// The sum decouples over i, so each predecessor picks its own best head.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lrl/errors.hpp"

namespace lrl {

/// Finite classes plus an exact excess-risk functional
///   excess(h, f, h', f') = E_{P_{f o h}}[l(f' o h') - l(f o h)].
template <class Rep, class Head>
struct FiniteClassPair {
  std::vector<Rep> reps;
  std::vector<Head> heads;
  std::function<double(const Rep&, const Head&, const Rep&, const Head&)> excess;

  double operator()(std::size_t rep, std::size_t head, std::size_t rep2, std::size_t head2) const {
    return excess(reps[rep], heads[head], reps[rep2], heads[head2]);
  }

  void validate() const {
    detail::require(!reps.empty() && !heads.empty(), "class pair: both classes must be non-empty");
    detail::require(static_cast<bool>(excess), "class pair: missing excess-risk oracle");
  }
};

using LinearClassPair = FiniteClassPair<Eigen::MatrixXd, Eigen::VectorXd>;

/// Linear classes under scaled squared loss with input second moment sigma:
/// excess = (B'w' - Bw)^T sigma (B'w' - Bw) / 4.
inline LinearClassPair scaled_squared_class_pair(std::vector<Eigen::MatrixXd> reps, std::vector<Eigen::VectorXd> heads,
                                                 Eigen::MatrixXd sigma) {
  detail::require(sigma.rows() == sigma.cols(), "class pair: second moment must be square");
  for (const auto& b : reps) {
    detail::require(b.rows() == sigma.rows(), "class pair: representation dimension mismatch");
    for (const auto& w : heads) detail::require(w.size() == b.cols(), "class pair: head dimension mismatch");
  }
  LinearClassPair pair;
  pair.reps = std::move(reps);
  pair.heads = std::move(heads);
  pair.excess = [sigma = std::move(sigma)](const Eigen::MatrixXd& b, const Eigen::VectorXd& w, const Eigen::MatrixXd& b2,
                                           const Eigen::VectorXd& w2) {
    const Eigen::VectorXd diff = b2 * w2 - b * w;
    return 0.25 * diff.dot(sigma * diff);
  };
  return pair;
}

struct EluderWitness {
  std::size_t rep = 0;                   ///< witness representation h'
  std::vector<std::size_t> prior_heads;  ///< f'_i minimising each predecessor term
  double prior_excess = 0.0;             ///< sum over predecessors (<= eps)
  double escape_excess = 0.0;            ///< min over f' on the new task (> eps/2)
};

struct IndependenceResult {
  bool independent = false;
  std::optional<EluderWitness> witness;
};

/// Checks eps-independence of (center, new_head) from (center, predecessors).
/// Witnesses are tried in index order; the first valid one is returned.
template <class Rep, class Head>
IndependenceResult is_eps_independent(std::size_t center, std::size_t new_head, const std::vector<std::size_t>& predecessors,
                                      const FiniteClassPair<Rep, Head>& pair, double epsilon) {
  pair.validate();
  detail::require(epsilon >= 0.0, "eps-independence: epsilon must be non-negative");
  detail::require(center < pair.reps.size() && new_head < pair.heads.size(), "eps-independence: index out of range");
  for (std::size_t p : predecessors) detail::require(p < pair.heads.size(), "eps-independence: index out of range");

  auto best_head = [&](std::size_t head, std::size_t rep2) {
    std::pair<double, std::size_t> best{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t f2 = 0; f2 < pair.heads.size(); ++f2) {
      const double e = pair(center, head, rep2, f2);
      if (e < best.first) best = {e, f2};
    }
    return best;
  };

  for (std::size_t rep2 = 0; rep2 < pair.reps.size(); ++rep2) {
    EluderWitness w{rep2, {}, 0.0, 0.0};
    for (std::size_t p : predecessors) {
      const auto [e, f2] = best_head(p, rep2);
      w.prior_excess += e;
      w.prior_heads.push_back(f2);
    }
    if (!(w.prior_excess <= epsilon)) continue;
    w.escape_excess = best_head(new_head, rep2).first;
    if (w.escape_excess > epsilon / 2.0) return {true, std::move(w)};
  }
  return {false, std::nullopt};
}

struct EluderCertificate {
  double epsilon = 0.0;
  std::size_t center = 0;
  std::vector<std::size_t> heads;        ///< f_1, f_2, ... in order
  std::vector<EluderWitness> witnesses;  ///< one per step
  std::size_t length() const noexcept { return heads.size(); }
};

enum class EluderSearch { Exhaustive, Greedy };

struct EluderOptions {
  EluderSearch mode = EluderSearch::Exhaustive;
  /// Greedy only: the center representation.
  std::size_t center = 0;
  /// Exhaustive only: abort once this many search nodes have been expanded.
  std::uint64_t node_budget = 1'000'000;
};

namespace detail {

/// table[c][f][r] = min_{f'} excess(c, f; r, f').
template <class Rep, class Head>
std::vector<std::vector<std::vector<double>>> min_excess_table(const FiniteClassPair<Rep, Head>& pair) {
  const std::size_t nr = pair.reps.size();
  const std::size_t nh = pair.heads.size();
  std::vector<std::vector<std::vector<double>>> table(nr, std::vector<std::vector<double>>(nh, std::vector<double>(nr)));
  for (std::size_t c = 0; c < nr; ++c)
    for (std::size_t f = 0; f < nh; ++f)
      for (std::size_t r = 0; r < nr; ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t f2 = 0; f2 < nh; ++f2) best = std::min(best, pair(c, f, r, f2));
        table[c][f][r] = best;
      }
  return table;
}

inline bool extends(const std::vector<double>& sums, const std::vector<double>& escape, double epsilon) {
  for (std::size_t r = 0; r < sums.size(); ++r)
    if (sums[r] <= epsilon && escape[r] > epsilon / 2.0) return true;
  return false;
}

}  // namespace detail

/// Builds a certificate (with witnesses) for a head sequence known to be valid.
template <class Rep, class Head>
EluderCertificate make_certificate(std::size_t center, const std::vector<std::size_t>& heads, const FiniteClassPair<Rep, Head>& pair,
                                   double epsilon) {
  EluderCertificate cert{epsilon, center, {}, {}};
  for (std::size_t head : heads) {
    IndependenceResult res = is_eps_independent(center, head, cert.heads, pair, epsilon);
    if (!res.independent) throw std::logic_error("eluder search produced a step without a witness");
    cert.heads.push_back(head);
    cert.witnesses.push_back(std::move(*res.witness));
  }
  return cert;
}

/// Longest sequence of eps-independent tasks. Exhaustive mode maximises over
/// every center and head sequence (repeats allowed) and returns the
/// lexicographically first maximum; Greedy extends from options.center with the
/// first independent head until none remains.
template <class Rep, class Head>
EluderCertificate longest_eluding_sequence(const FiniteClassPair<Rep, Head>& pair, double epsilon, const EluderOptions& options = {}) {
  pair.validate();
  detail::require(epsilon >= 0.0, "eluder search: epsilon must be non-negative");
  const auto table = detail::min_excess_table(pair);
  const std::size_t nr = pair.reps.size();
  const std::size_t nh = pair.heads.size();

  if (options.mode == EluderSearch::Greedy) {
    detail::require(options.center < nr, "eluder search: center out of range");
    const auto& t = table[options.center];
    std::vector<double> sums(nr, 0.0);
    std::vector<std::size_t> seq;
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t f = 0; f < nh; ++f) {
        if (!detail::extends(sums, t[f], epsilon)) continue;
        seq.push_back(f);
        for (std::size_t r = 0; r < nr; ++r) sums[r] += t[f][r];
        grew = true;
        break;
      }
    }
    return make_certificate(options.center, seq, pair, epsilon);
  }

  std::uint64_t nodes = 0;
  std::size_t best_center = 0;
  std::vector<std::size_t> best;
  std::vector<std::size_t> seq;
  for (std::size_t c = 0; c < nr; ++c) {
    const auto& t = table[c];
    // Sums are copied per level so they match is_eps_independent bit for bit.
    std::function<void(const std::vector<double>&)> dfs = [&](const std::vector<double>& sums) {
      if (++nodes > options.node_budget)
        throw ResourceError("exhaustive eluder search exceeded its node budget of " + std::to_string(options.node_budget) +
                            "; use greedy mode for large classes");
      if (seq.size() > best.size()) {
        best = seq;
        best_center = c;
      }
      for (std::size_t f = 0; f < nh; ++f) {
        if (!detail::extends(sums, t[f], epsilon)) continue;
        std::vector<double> next = sums;
        for (std::size_t r = 0; r < nr; ++r) next[r] += t[f][r];
        seq.push_back(f);
        dfs(next);
        seq.pop_back();
      }
    };
    dfs(std::vector<double>(nr, 0.0));
  }
  return make_certificate(best_center, best, pair, epsilon);
}

/// Re-checks every step of a certificate, including the stored witness values.
template <class Rep, class Head>
bool validate_certificate(const EluderCertificate& cert, const FiniteClassPair<Rep, Head>& pair) {
  if (cert.witnesses.size() != cert.heads.size() || cert.center >= pair.reps.size()) return false;
  std::vector<std::size_t> prefix;
  for (std::size_t step = 0; step < cert.heads.size(); ++step) {
    const EluderWitness& w = cert.witnesses[step];
    if (w.rep >= pair.reps.size() || w.prior_heads.size() != prefix.size()) return false;
    double sum = 0.0;
    for (std::size_t i = 0; i < prefix.size(); ++i) sum += pair(cert.center, prefix[i], w.rep, w.prior_heads[i]);
    if (!(sum <= cert.epsilon)) return false;
    for (std::size_t f2 = 0; f2 < pair.heads.size(); ++f2)
      if (!(pair(cert.center, cert.heads[step], w.rep, f2) > cert.epsilon / 2.0)) return false;
    if (!is_eps_independent(cert.center, cert.heads[step], prefix, pair, cert.epsilon).independent) return false;
    prefix.push_back(cert.heads[step]);
  }
  return true;
}

inline std::string certificate_report(const EluderCertificate& cert) {
  std::ostringstream os;
  os << "eps = " << cert.epsilon << ", center = " << cert.center << ", length = " << cert.length() << '\n';
  for (std::size_t i = 0; i < cert.heads.size(); ++i) {
    const EluderWitness& w = cert.witnesses[i];
    os << "step " << i + 1 << ": head " << cert.heads[i] << ", witness rep " << w.rep << ", prior heads [";
    for (std::size_t j = 0; j < w.prior_heads.size(); ++j) os << (j ? " " : "") << w.prior_heads[j];
    os << "], prior excess " << w.prior_excess << ", escape excess " << w.escape_excess << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Pointwise independence: an infinite sequence for noiseless linear
// classification under Gaussian inputs, where disagreement = angle / pi.

inline double vector_angle(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  detail::require(nu > 0.0 && nv > 0.0, "angle: zero vector");
  return std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
}

/// Pr_{x ~ N(0, I)}[sign(u^T x) != sign(v^T x)] = theta(u, v) / pi.
inline double disagreement_probability(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return vector_angle(u, v) / std::numbers::pi;
}

/// Angle between u and the column span of the orthonormal matrix q.
inline double subspace_angle(const Eigen::VectorXd& u, const Eigen::MatrixXd& q) {
  const double nu = u.norm();
  detail::require(nu > 0.0, "angle: zero vector");
  return std::acos(std::clamp((q.transpose() * u).norm() / nu, 0.0, 1.0));
}

struct PointwiseStep {
  int step = 0;
  double lambda = 0.0;
  double prior_excess = 0.0;   ///< max over predecessors of the witness excess
  double escape_excess = 0.0;  ///< lower bound on the new task's excess under any head
  bool prior_ok = false;
  bool escape_ok = false;
};

/// B = [e_1..e_k], every task uses head e_1; the witness swaps e_1, e_2 for
/// s = e_1 cos(lambda) + e_2 sin(lambda) with lambda = lambda_fraction * pi * eps.
/// lambda_fraction must lie in (1/2, 1].
inline std::vector<PointwiseStep> pointwise_counterexample(Eigen::Index d, Eigen::Index k, double epsilon, int n_steps,
                                                           double lambda_fraction = 0.75) {
  detail::require(k >= 1 && d > k, "pointwise counterexample: need d > k >= 1");
  detail::require(epsilon > 0.0 && epsilon < 1.0, "pointwise counterexample: epsilon must lie in (0, 1)");
  detail::require(n_steps >= 1, "pointwise counterexample: n_steps must be >= 1");
  detail::require(lambda_fraction > 0.5 && lambda_fraction <= 1.0, "pointwise counterexample: lambda fraction must lie in (1/2, 1]");
  const double lambda = lambda_fraction * std::numbers::pi * epsilon;

  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(d, k);
  Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(d, k);
  b2(0, 0) = std::cos(lambda);
  b2(1, 0) = std::sin(lambda);
  for (Eigen::Index j = 1; j < k; ++j) b2(j + 1, j) = 1.0;  // e_3, ..., e_{k+1}
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  v[0] = 1.0;

  const Eigen::VectorXd target = b * v;
  const double prior = disagreement_probability(target, b2 * v);
  const double escape = subspace_angle(target, b2) / std::numbers::pi;

  std::vector<PointwiseStep> steps;
  steps.reserve(static_cast<std::size_t>(n_steps));
  for (int n = 1; n <= n_steps; ++n) {
    PointwiseStep s{n, lambda, n > 1 ? prior : 0.0, escape, false, false};
    s.prior_ok = n == 1 || prior <= epsilon;
    s.escape_ok = escape > epsilon / 2.0;
    steps.push_back(s);
  }
  return steps;
}

}  // namespace lrl
