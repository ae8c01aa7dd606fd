#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "lrl/eluder.hpp"
#include "lrl/linalg.hpp"
#include "lrl/random.hpp"

namespace {

using lrl::LinearClassPair;

LinearClassPair random_pair(std::uint64_t seed, int n_reps, int n_heads, Eigen::Index d, Eigen::Index k, double head_scale = 1.0) {
  lrl::Rng rng(seed);
  std::vector<Eigen::MatrixXd> reps;
  for (int i = 0; i < n_reps; ++i) reps.push_back(lrl::random_semi_orthogonal(d, k, rng()).matrix());
  std::vector<Eigen::VectorXd> heads;
  for (int i = 0; i < n_heads; ++i) heads.push_back(head_scale * rng.in_unit_ball(k));
  return lrl::scaled_squared_class_pair(std::move(reps), std::move(heads), Eigen::MatrixXd::Identity(d, d));
}

/// Definition checked over every joint witness tuple (h', f'_1..f'_{n-1}),
/// without decoupling the sum.
bool brute_independent(std::size_t center, std::size_t new_head, const std::vector<std::size_t>& preds, const LinearClassPair& pair,
                       double eps) {
  const std::size_t nh = pair.heads.size();
  for (std::size_t r = 0; r < pair.reps.size(); ++r) {
    bool escapes = true;
    for (std::size_t f = 0; f < nh; ++f) escapes = escapes && pair(center, new_head, r, f) > eps / 2.0;
    if (!escapes) continue;
    std::vector<std::size_t> tuple(preds.size(), 0);
    for (;;) {
      double sum = 0.0;
      for (std::size_t i = 0; i < preds.size(); ++i) sum += pair(center, preds[i], r, tuple[i]);
      if (sum <= eps) return true;
      std::size_t j = 0;
      while (j < tuple.size() && ++tuple[j] == nh) tuple[j++] = 0;
      if (j == tuple.size()) break;
    }
  }
  return false;
}

/// Longest eps-independent sequence by enumerating all head sequences up to max_len.
std::size_t brute_longest(const LinearClassPair& pair, double eps, std::size_t max_len) {
  std::size_t best = 0;
  for (std::size_t c = 0; c < pair.reps.size(); ++c) {
    std::function<void(std::vector<std::size_t>&)> grow = [&](std::vector<std::size_t>& seq) {
      best = std::max(best, seq.size());
      if (seq.size() == max_len) return;
      for (std::size_t f = 0; f < pair.heads.size(); ++f) {
        if (!brute_independent(c, f, seq, pair, eps)) continue;
        seq.push_back(f);
        grow(seq);
        seq.pop_back();
      }
    };
    std::vector<std::size_t> seq;
    grow(seq);
  }
  return best;
}

TEST(EpsIndependence, MatchesBruteForceTupleEnumeration) {
  int checked = 0, independent = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearClassPair pair = seed % 2 ? random_pair(seed, 2, 3, 2, 1) : random_pair(seed, 2, 3, 3, 2);
    const double eps = 0.1;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t len = 0; len <= 2; ++len) {
          std::vector<std::size_t> preds(len, 0);
          for (;;) {
            const auto res = lrl::is_eps_independent(c, n, preds, pair, eps);
            EXPECT_EQ(res.independent, brute_independent(c, n, preds, pair, eps));
            ++checked;
            independent += res.independent;
            if (res.independent) {
              EXPECT_LE(res.witness->prior_excess, eps);
              EXPECT_GT(res.witness->escape_excess, eps / 2.0);
              EXPECT_NE(res.witness->rep, c);
            }
            std::size_t j = 0;
            while (j < len && ++preds[j] == 3) preds[j++] = 0;
            if (j == len) break;
          }
        }
  }
  EXPECT_GT(checked, 1000);
  EXPECT_GT(independent, 0);  // the cross-check must exercise both answers
  EXPECT_LT(independent, checked);
}

TEST(EpsIndependence, CenterIsNeverItsOwnWitness) {
  const LinearClassPair pair = random_pair(3, 1, 4, 3, 2);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_FALSE(lrl::is_eps_independent(0, f, {}, pair, 0.01).independent);
}

TEST(EpsIndependence, EmptyPredecessorsOnlyNeedEscape) {
  // Two one-dimensional reps along e1 and e2; heads {1}: the only head of the
  // other rep is at squared distance 2, excess 0.5.
  std::vector<Eigen::MatrixXd> reps{Eigen::MatrixXd::Identity(2, 1), Eigen::MatrixXd::Identity(2, 2).col(1)};
  std::vector<Eigen::VectorXd> heads{Eigen::VectorXd::Ones(1)};
  const LinearClassPair pair = lrl::scaled_squared_class_pair(reps, heads, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(pair(0, 0, 1, 0), 0.5, 1e-15);
  EXPECT_TRUE(lrl::is_eps_independent(0, 0, {}, pair, 0.9).independent);
  EXPECT_FALSE(lrl::is_eps_independent(0, 0, {}, pair, 1.0).independent);  // 0.5 > 0.5 is false
}

TEST(LongestSequence, ExhaustiveMatchesBruteForce) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const int nr = 1 + static_cast<int>(seed % 3);
    const int nh = 1 + static_cast<int>((seed / 3) % 3);
    const LinearClassPair pair = random_pair(seed, nr, nh, 3, 2);
    const auto cert = lrl::longest_eluding_sequence(pair, 0.1);
    EXPECT_EQ(cert.length(), brute_longest(pair, 0.1, 7)) << "seed " << seed;
    EXPECT_TRUE(lrl::validate_certificate(cert, pair));
  }
}

TEST(LongestSequence, FiniteBoundOnRandomPairs) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    lrl::Rng rng(seed + 7);
    const int nr = 1 + static_cast<int>(rng() % 4);
    const int nh = 1 + static_cast<int>(rng() % 4);
    const LinearClassPair pair = random_pair(rng(), nr, nh, 3, 2);
    const auto cert = lrl::longest_eluding_sequence(pair, 0.1);
    EXPECT_LE(cert.length(), static_cast<std::size_t>(2 * std::min(nr, nh)));
    EXPECT_TRUE(lrl::validate_certificate(cert, pair));
  }
}

TEST(LongestSequence, SingletonRepresentationClass) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LinearClassPair pair = random_pair(seed, 1, 4, 3, 2);
    const auto cert = lrl::longest_eluding_sequence(pair, 0.05);
    EXPECT_LE(cert.length(), 2u);
    EXPECT_EQ(cert.length(), brute_longest(pair, 0.05, 4));
  }
}

TEST(LongestSequence, LargeEpsilonAllowsAtMostOneStep) {
  // Excess never exceeds (2 * max ||Bw||)^2 / 4 <= 1 for unit-ball heads, so eps = 2 kills the escape clause.
  const LinearClassPair pair = random_pair(5, 3, 3, 3, 2);
  EXPECT_LE(lrl::longest_eluding_sequence(pair, 2.0).length(), 1u);
}

TEST(LongestSequence, GreedyIsValidLowerBound) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearClassPair pair = random_pair(seed + 50, 3, 3, 3, 2);
    const auto exact = lrl::longest_eluding_sequence(pair, 0.1);
    for (std::size_t c = 0; c < 3; ++c) {
      lrl::EluderOptions opt;
      opt.mode = lrl::EluderSearch::Greedy;
      opt.center = c;
      const auto greedy = lrl::longest_eluding_sequence(pair, 0.1, opt);
      EXPECT_TRUE(lrl::validate_certificate(greedy, pair));
      EXPECT_LE(greedy.length(), exact.length());
    }
  }
}

TEST(LongestSequence, NodeBudgetRaisesResourceError) {
  const LinearClassPair pair = random_pair(9, 4, 4, 3, 2);
  lrl::EluderOptions opt;
  opt.node_budget = 1;
  EXPECT_THROW(lrl::longest_eluding_sequence(pair, 0.1, opt), lrl::ResourceError);
}

TEST(Certificate, TamperedWitnessFailsValidation) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const LinearClassPair pair = random_pair(seed + 200, 3, 3, 3, 2);
    auto cert = lrl::longest_eluding_sequence(pair, 0.1);
    if (cert.length() < 2) continue;
    EXPECT_TRUE(lrl::validate_certificate(cert, pair));
    cert.witnesses[1].rep = cert.center;  // the center can never witness independence
    EXPECT_FALSE(lrl::validate_certificate(cert, pair));
    EXPECT_NE(lrl::certificate_report(cert).find("step 2"), std::string::npos);
    return;
  }
  GTEST_SKIP() << "no certificate of length >= 2 in the sampled pairs";
}

TEST(Certificate, RejectsMissingOracle) {
  LinearClassPair pair;
  pair.reps.push_back(Eigen::MatrixXd::Identity(2, 1));
  pair.heads.push_back(Eigen::VectorXd::Ones(1));
  EXPECT_THROW(lrl::longest_eluding_sequence(pair, 0.1), lrl::InvalidInput);
}

TEST(Angles, DisagreementProbability) {
  const Eigen::Vector3d u(1.0, 2.0, -1.0);
  EXPECT_NEAR(lrl::disagreement_probability(u, 3.0 * u), 0.0, 1e-8);
  EXPECT_NEAR(lrl::disagreement_probability(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 2)), 0.5, 1e-15);
  EXPECT_NEAR(lrl::disagreement_probability(u, -u), 1.0, 1e-15);
  EXPECT_THROW(lrl::disagreement_probability(u, Eigen::Vector3d::Zero()), lrl::InvalidInput);
}

TEST(Angles, DisagreementMatchesMonteCarlo) {
  const Eigen::Vector3d u(1.0, 0.3, -0.2), v(0.2, 1.0, 0.5);
  lrl::Rng rng(4);
  const int m = 200000;
  int disagree = 0;
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd x = rng.normal_vector(3);
    disagree += (u.dot(x) >= 0.0) != (v.dot(x) >= 0.0);
  }
  const double p = lrl::disagreement_probability(u, v);
  EXPECT_NEAR(static_cast<double>(disagree) / m, p, 5.0 * std::sqrt(p * (1 - p) / m));
}

/// Definition 8.1-style check recomputed from raw vectors: per-predecessor
/// disagreement of the witness, and distance of the target from every head
/// direction the witness can express.
void check_counterexample(Eigen::Index d, Eigen::Index k, double eps, int steps) {
  const auto rows = lrl::pointwise_counterexample(d, k, eps, steps);
  ASSERT_EQ(rows.size(), static_cast<std::size_t>(steps));
  const double lambda = 0.75 * std::numbers::pi * eps;
  Eigen::VectorXd target = Eigen::VectorXd::Zero(d);
  target[0] = 1.0;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
  s[0] = std::cos(lambda);
  s[1] = std::sin(lambda);
  const double oracle = std::acos(target.dot(s)) / std::numbers::pi;
  for (const auto& r : rows) {
    EXPECT_TRUE(r.prior_ok) << "step " << r.step;
    EXPECT_TRUE(r.escape_ok) << "step " << r.step;
    EXPECT_NEAR(r.lambda, lambda, 1e-15);
    EXPECT_NEAR(r.escape_excess, oracle, 1e-12);
    if (r.step > 1) {
      EXPECT_NEAR(r.prior_excess, oracle, 1e-12);
      EXPECT_GT(r.prior_excess, eps / 2.0);
      EXPECT_LE(r.prior_excess, eps);
    }
  }
}

TEST(PointwiseCounterexample, SmallConfiguration) { check_counterexample(4, 2, 0.2, 100); }

TEST(PointwiseCounterexample, TableConfiguration) { check_counterexample(10, 3, 0.05, 100); }

TEST(PointwiseCounterexample, RejectsBadArguments) {
  EXPECT_THROW(lrl::pointwise_counterexample(3, 3, 0.1, 5), lrl::InvalidInput);
  EXPECT_THROW(lrl::pointwise_counterexample(4, 2, 1.0, 5), lrl::InvalidInput);
  EXPECT_THROW(lrl::pointwise_counterexample(4, 2, 0.1, 0), lrl::InvalidInput);
  EXPECT_THROW(lrl::pointwise_counterexample(4, 2, 0.1, 5, 0.5), lrl::InvalidInput);
}

}  // namespace
