#pragma once

// Stiefel-manifold helpers and numerical checks of the ridge and
// constrained-subspace identities used by the sample-complexity analysis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "lrl/core.hpp"
#include "lrl/errors.hpp"
#include "lrl/random.hpp"

namespace lrl {

/// Relative threshold on |R_jj| below which a matrix is treated as rank deficient.
inline constexpr double kRankTolerance = 1e-12;

/// Q factor of the thin QR of M, with columns signed so that diag(R) > 0.
inline SemiOrthogonalMatrix retract_to_stiefel(const Eigen::MatrixXd& m) {
  detail::require(m.cols() >= 1 && m.rows() >= m.cols(), "retract_to_stiefel: need 1 <= k <= d");
  detail::require(m.allFinite(), "retract_to_stiefel: non-finite input");
  const Eigen::Index d = m.rows();
  const Eigen::Index k = m.cols();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const double scale = std::max(m.norm(), 1.0);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double rjj = r(j, j);
    if (!(std::abs(rjj) > kRankTolerance * scale))
      throw DegenerateInput("retract_to_stiefel: matrix is rank deficient");
    if (rjj < 0.0) q.col(j) = -q.col(j);
  }
  return SemiOrthogonalMatrix(std::move(q));
}

/// Q factor of a d x k standard-normal matrix; deterministic in seed.
inline SemiOrthogonalMatrix random_semi_orthogonal(Eigen::Index d, Eigen::Index k, std::uint64_t seed) {
  detail::require(k >= 1 && k <= d, "random_semi_orthogonal: need 1 <= k <= d");
  Rng rng(seed);
  for (;;) {
    try {
      return retract_to_stiefel(rng.normal_matrix(d, k));
    } catch (const DegenerateInput&) {
      // probability zero; draw again
    }
  }
}

/// P_B = B B^T and its complement I - B B^T.
struct ProjectorPair {
  Eigen::MatrixXd onto;
  Eigen::MatrixXd complement;

  explicit ProjectorPair(const SemiOrthogonalMatrix& b)
      : onto(b.matrix() * b.matrix().transpose()),
        complement(Eigen::MatrixXd::Identity(b.ambient_dim(), b.ambient_dim()) - onto) {}
};

/// Principal angles (radians, ascending) between span(a) and span(b).
inline Eigen::VectorXd principal_angles(const SemiOrthogonalMatrix& a, const SemiOrthogonalMatrix& b) {
  detail::require(a.ambient_dim() == b.ambient_dim(), "principal_angles: ambient dimension mismatch");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.matrix().transpose() * b.matrix());
  Eigen::VectorXd s = svd.singularValues();
  Eigen::VectorXd angles(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) angles[i] = std::acos(std::clamp(s[i], -1.0, 1.0));
  std::sort(angles.begin(), angles.end());
  return angles;
}

/// Both sides of x^T (U U^T + lambda I)^{-1} x = min_z (1/lambda)||x - U z||^2 + ||z||^2.
struct RidgeIdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline RidgeIdentitySides ridge_identity_sides(const Eigen::VectorXd& x, const Eigen::MatrixXd& u, double lambda) {
  detail::require(lambda > 0.0, "ridge identity: lambda must be positive");
  detail::require(u.rows() == x.size(), "ridge identity: dimension mismatch");
  const Eigen::Index d = x.size();
  const Eigen::Index n = u.cols();
  const Eigen::MatrixXd outer = u * u.transpose() + lambda * Eigen::MatrixXd::Identity(d, d);
  const double lhs = x.dot(outer.ldlt().solve(x));
  const Eigen::MatrixXd gram = u.transpose() * u + lambda * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd z = gram.ldlt().solve(u.transpose() * x);
  const double rhs = (x - u * z).squaredNorm() / lambda + z.squaredNorm();
  return {lhs, rhs};
}

/// |LHS - RHS| of the ridge / Woodbury identity, LHS by direct solve, RHS via the ridge minimiser.
inline double ridge_identity_residual(const Eigen::VectorXd& x, const Eigen::MatrixXd& u, double lambda) {
  const auto [lhs, rhs] = ridge_identity_sides(x, u, lambda);
  return std::abs(lhs - rhs);
}

struct SubspaceDistance {
  double min_dist = 0.0;  ///< min over lower <= ||w|| <= upper of ||B w - u||
  double bound = 0.0;     ///< 2 ||P_B^perp u||
};

/// Closed-form distance from u to {B w : ||w|| in [lower, upper]}.
///
/// With z = B^T u we have ||B w - u||^2 = ||w - z||^2 + ||P_B^perp u||^2, so the
/// minimiser is z itself when ||z|| >= lower, and otherwise z rescaled to norm
/// `lower` (any vector of that norm when z = 0). ||z|| <= ||u|| <= upper rules
/// out the outer boundary.
inline SubspaceDistance constrained_subspace_distance(const SemiOrthogonalMatrix& b, const Eigen::VectorXd& u,
                                                      double lower, double upper) {
  constexpr double slack = 1e-12;
  detail::require(u.size() == b.ambient_dim(), "constrained_subspace_distance: dimension mismatch");
  detail::require(0.0 <= lower && lower <= upper && upper <= 1.0,
                  "constrained_subspace_distance: need 0 <= lower <= upper <= 1");
  const double u_norm = u.norm();
  detail::require(u_norm >= lower - slack && u_norm <= upper + slack,
                  "constrained_subspace_distance: need lower <= ||u|| <= upper");
  const Eigen::VectorXd z = b.matrix().transpose() * u;
  const double perp = (u - b.matrix() * z).norm();
  const double z_norm = z.norm();
  const double gap = z_norm >= lower ? 0.0 : lower - z_norm;
  return {std::sqrt(gap * gap + perp * perp), 2.0 * perp};
}

}  // namespace lrl
