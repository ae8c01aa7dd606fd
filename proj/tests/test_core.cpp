#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "lrl/core.hpp"
#include "lrl/datagen.hpp"

namespace {

using lrl::Dataset;
using lrl::LossKind;
using lrl::PredictionHead;
using lrl::Predictor;
using lrl::SemiOrthogonalMatrix;

SemiOrthogonalMatrix first_axes(Eigen::Index d, Eigen::Index k) { return SemiOrthogonalMatrix(Eigen::MatrixXd::Identity(d, k)); }

TEST(Loss, ScaledSquaredValues) {
  EXPECT_DOUBLE_EQ(lrl::loss_value(LossKind::ScaledSquared, 1.0, -1.0), 1.0);
  EXPECT_DOUBLE_EQ(lrl::loss_value(LossKind::ScaledSquared, 0.5, 0.5), 0.0);
}

TEST(Loss, BinaryCrossEntropyAtHalf) {
  EXPECT_NEAR(lrl::loss_value(LossKind::BinaryCrossEntropy, 0.5, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(lrl::loss_value(LossKind::BinaryCrossEntropy, 0.5, 0.0), std::log(2.0), 1e-15);
}

TEST(Loss, BinaryCrossEntropyClampKeepsValueFinite) {
  const double worst = lrl::loss_value(LossKind::BinaryCrossEntropy, 0.0, 1.0);
  EXPECT_TRUE(std::isfinite(worst));
  EXPECT_NEAR(worst, -std::log(1e-12), 1e-9);
}

TEST(Loss, ZeroOne) {
  EXPECT_EQ(lrl::loss_value(LossKind::ZeroOne, 1.0, 1.0), 0.0);
  EXPECT_EQ(lrl::loss_value(LossKind::ZeroOne, -1.0, 1.0), 1.0);
  EXPECT_EQ(lrl::loss_value(LossKind::ZeroOne, -1.0, -1.0), 0.0);
}

TEST(Loss, NonNegativeAndMinimalOnDiagonal) {
  for (double y : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    EXPECT_EQ(lrl::loss_value(LossKind::ScaledSquared, y, y), 0.0);
    EXPECT_EQ(lrl::loss_value(LossKind::ZeroOne, y, y), 0.0);
    for (double p : {-1.0, 0.2, 4.0}) EXPECT_GE(lrl::loss_value(LossKind::ScaledSquared, p, y), 0.0);
  }
  for (double p : {0.01, 0.3, 0.9}) {
    EXPECT_GE(lrl::loss_value(LossKind::BinaryCrossEntropy, p, 1.0), 0.0);
    EXPECT_GE(lrl::loss_value(LossKind::BinaryCrossEntropy, p, 0.0), 0.0);
  }
}

TEST(Loss, NonFiniteRejected) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(lrl::loss_value(LossKind::ScaledSquared, nan, 0.0), lrl::InvalidInput);
  EXPECT_THROW(lrl::loss_value(LossKind::BinaryCrossEntropy, 0.5, inf), lrl::InvalidInput);
}

TEST(Loss, ScoreFormMatchesPredictionForm) {
  for (double s : {-8.0, -2.0, -0.1, 0.0, 0.4, 5.0})
    for (double y : {0.0, 1.0})
      EXPECT_NEAR(lrl::detail::loss_from_score(LossKind::BinaryCrossEntropy, s, y),
                  lrl::loss_value(LossKind::BinaryCrossEntropy, lrl::sigmoid(s), y), 1e-9);
  // Saturated scores: both forms stop near -ln(1e-12); 1 - (1 - 1e-12) is not exact in doubles.
  for (double s : {-30.0, 40.0}) {
    const double y = s > 0 ? 0.0 : 1.0;
    EXPECT_NEAR(lrl::detail::loss_from_score(LossKind::BinaryCrossEntropy, s, y), -std::log(1e-12), 1e-3);
    EXPECT_NEAR(lrl::loss_value(LossKind::BinaryCrossEntropy, lrl::sigmoid(s), y), -std::log(1e-12), 1e-3);
  }
}

TEST(EmpiricalRisk, ResidualsZeroOneTwo) {
  // x = e1, predictor score = x_1; targets chosen so residuals are 0, 1, 2.
  Dataset data{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd(3), 0};
  data.inputs.col(0) << 1.0, 2.0, 3.0;
  data.targets << 1.0, 1.0, 1.0;
  const Predictor p{first_axes(2, 1), PredictionHead(Eigen::VectorXd::Ones(1), 10.0), LossKind::ScaledSquared};
  EXPECT_NEAR(lrl::empirical_risk(p, data), 5.0 / 12.0, 1e-15);
}

TEST(EmpiricalRisk, PerfectFitIsZero) {
  Dataset data{Eigen::MatrixXd::Random(20, 4), Eigen::VectorXd(20), 0};
  Eigen::VectorXd w(2);
  w << 0.3, -1.2;
  data.targets = data.inputs.leftCols(2) * w;
  const Predictor p{first_axes(4, 2), PredictionHead(w, 10.0), LossKind::ScaledSquared};
  EXPECT_NEAR(lrl::empirical_risk(p, data), 0.0, 1e-28);
}

TEST(EmpiricalRisk, ZeroHeadBceIsLogTwo) {
  Dataset data{Eigen::MatrixXd::Random(15, 3), Eigen::VectorXd(15), 0};
  for (int i = 0; i < 15; ++i) data.targets[i] = i % 3 == 0 ? 1.0 : 0.0;
  const Predictor p{first_axes(3, 2), PredictionHead::zeros(2, 1.0), LossKind::BinaryCrossEntropy};
  EXPECT_NEAR(lrl::empirical_risk(p, data), std::log(2.0), 1e-15);
}

TEST(EmpiricalRisk, PermutationInvariant) {
  Dataset data{Eigen::MatrixXd::Random(9, 3), Eigen::VectorXd::Random(9), 0};
  const Predictor p{first_axes(3, 2), PredictionHead(Eigen::Vector2d(0.5, -0.25), 10.0), LossKind::ScaledSquared};
  Dataset shuffled = data;
  const int order[9] = {4, 2, 8, 0, 7, 1, 6, 3, 5};
  for (int i = 0; i < 9; ++i) {
    shuffled.inputs.row(i) = data.inputs.row(order[i]);
    shuffled.targets[i] = data.targets[order[i]];
  }
  EXPECT_NEAR(lrl::empirical_risk(p, data), lrl::empirical_risk(p, shuffled), 1e-15);
}

TEST(EmpiricalRisk, EmptyDatasetRejected) {
  const Dataset empty{Eigen::MatrixXd(0, 3), Eigen::VectorXd(0), 0};
  const Predictor p{first_axes(3, 1), PredictionHead::zeros(1, 1.0), LossKind::ScaledSquared};
  EXPECT_THROW(lrl::empirical_risk(p, empty), lrl::InvalidInput);
}

TEST(SemiOrthogonal, RejectsNonOrthonormal) {
  EXPECT_THROW(SemiOrthogonalMatrix(2.0 * Eigen::MatrixXd::Identity(3, 2)), lrl::InvalidInput);
  EXPECT_THROW(SemiOrthogonalMatrix(Eigen::MatrixXd::Identity(2, 3)), lrl::InvalidInput);
}

TEST(PredictionHead, ProjectsOntoBall) {
  const PredictionHead h(Eigen::Vector2d(3.0, 4.0), 1.0);
  EXPECT_NEAR(h.w.norm(), 1.0, 1e-15);
  EXPECT_NEAR(h.w[0], 0.6, 1e-15);
}

TEST(PopulationRisk, NoiselessBayesPredictorIsZero) {
  const lrl::TaskDistribution task(lrl::random_semi_orthogonal(6, 2, 3), Eigen::Vector2d(0.4, -0.2), lrl::NoiseSpec::noiseless(),
                                   lrl::InputLaw::UnitBallUniform, LossKind::ScaledSquared);
  EXPECT_EQ(lrl::population_risk_mc(task.bayes_predictor(), task, 5000, 1), 0.0);
}

TEST(PopulationRisk, ScaledSquaredNoiseQuarterVariance) {
  const double var = 0.05;
  const lrl::TaskDistribution task(lrl::random_semi_orthogonal(6, 2, 4), Eigen::Vector2d(0.4, 0.1), lrl::NoiseSpec::additive(var),
                                   lrl::InputLaw::UnitBallUniform, LossKind::ScaledSquared);
  const lrl::RiskEstimate est = lrl::population_risk_estimate(task.bayes_predictor(), task, 1'000'000, 11);
  EXPECT_LE(std::abs(est.mean - var / 4.0), 5.0 * est.standard_error);
}

TEST(PopulationRisk, FairCoinLabelsGiveLogTwo) {
  const lrl::TaskDistribution task(lrl::random_semi_orthogonal(5, 2, 5), Eigen::Vector2d::Zero(), lrl::NoiseSpec::logistic(),
                                   lrl::InputLaw::StandardGaussian, LossKind::BinaryCrossEntropy);
  // The Bayes predictor has w = 0, so every loss is exactly ln 2.
  EXPECT_NEAR(lrl::population_risk_mc(task.bayes_predictor(), task, 20000, 2), std::log(2.0), 1e-12);
}

TEST(PopulationRisk, DeterministicGivenSeed) {
  const lrl::TaskDistribution task(lrl::random_semi_orthogonal(5, 2, 6), Eigen::Vector2d(1.0, -2.0), lrl::NoiseSpec::logistic(),
                                   lrl::InputLaw::StandardGaussian, LossKind::BinaryCrossEntropy);
  const Predictor p{lrl::random_semi_orthogonal(5, 2, 7), PredictionHead(Eigen::Vector2d(0.3, 0.3), 5.0), LossKind::BinaryCrossEntropy};
  const double a = lrl::population_risk_mc(p, task, 70000, 9);
  const double b = lrl::population_risk_mc(p, task, 70000, 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, lrl::population_risk_mc(p, task, 70000, 10));
}

TEST(PopulationRisk, RejectsZeroSamples) {
  const lrl::TaskDistribution task(lrl::random_semi_orthogonal(5, 2, 6), Eigen::Vector2d(1.0, -2.0), lrl::NoiseSpec::logistic(),
                                   lrl::InputLaw::StandardGaussian, LossKind::BinaryCrossEntropy);
  EXPECT_THROW(lrl::population_risk_mc(task.bayes_predictor(), task, 0, 1), lrl::InvalidInput);
}

}  // namespace
