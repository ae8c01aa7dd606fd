#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lrl/baselines.hpp"

namespace {

using lrl::BaselineKind;
using lrl::LossKind;

lrl::OptimizerConfig quick() {
  lrl::OptimizerConfig c;
  c.learning_rate = 0.05;
  c.max_epochs = 3000;
  c.tolerance = 1e-7;
  return c;
}

lrl::SampleSizePolicy policy(long d, long k, int T) {
  lrl::SampleSizePolicy p;
  p.d = d;
  p.k = k;
  p.T = T;
  p.epsilon = 0.1;
  return p;
}

lrl::TaskStream stream(std::uint64_t seed) {
  return lrl::make_task_stream(6, 2, 10, 4.0, lrl::NoiseSpec::logistic(), lrl::InputLaw::StandardGaussian,
                               LossKind::BinaryCrossEntropy, seed);
}

TEST(Baselines, OracleDrawsMTildePerTask) {
  lrl::TaskStream s = stream(1);
  const auto p = policy(6, 2, 10);
  const lrl::RunRecord r = lrl::run_baseline(BaselineKind::OracleKnownRep, s, p, quick(), 2);
  EXPECT_EQ(r.total_samples, 10 * lrl::m_tilde(p));
  EXPECT_EQ(r.multi_task_calls, 0);
  EXPECT_EQ(r.outputs.size(), 10u);
  for (const auto& o : r.outputs) EXPECT_EQ(o.representation.matrix(), s.b_star().matrix());
}

TEST(Baselines, IndependentOverOracleRatioIsDPlusOne) {
  const auto p = policy(6, 2, 10);
  lrl::TaskStream a = stream(3);
  lrl::TaskStream b = stream(3);
  const lrl::RunRecord ind = lrl::run_baseline(BaselineKind::IndependentErm, a, p, quick(), 4);
  const lrl::RunRecord orc = lrl::run_baseline(BaselineKind::OracleKnownRep, b, p, quick(), 4);
  EXPECT_EQ(ind.total_samples, 10 * lrl::independent_sample_size(p));
  EXPECT_EQ(ind.multi_task_calls, 10);
  const double ratio = static_cast<double>(ind.total_samples) / static_cast<double>(orc.total_samples);
  // d + 1 up to the rounding of both sample sizes.
  EXPECT_NEAR(ratio, 6.0 + 1.0, 0.01);
}

TEST(Baselines, LifelongCostLiesBetween) {
  const auto p = policy(6, 2, 10);
  const std::vector<double> kappas(10, lrl::logistic_gaussian_bayes_risk(4.0));
  lrl::TaskStream a = stream(5), b = stream(5), c = stream(5);
  const long oracle = lrl::run_baseline(BaselineKind::OracleKnownRep, a, p, quick(), 6).total_samples;
  const long independent = lrl::run_baseline(BaselineKind::IndependentErm, b, p, quick(), 6).total_samples;
  const long lifelong = lrl::run_lifelong(c, kappas, p, quick(), {}, 6).total_samples;
  EXPECT_LT(oracle, lifelong);
  EXPECT_LT(lifelong, independent);
}

TEST(Baselines, OracleOutputsAreCertified) {
  const auto p = policy(6, 2, 10);
  lrl::TaskStream s = stream(7);
  const std::vector<double> kappas(10, lrl::logistic_gaussian_bayes_risk(4.0));
  const lrl::RunRecord r = lrl::run_baseline(BaselineKind::OracleKnownRep, s, p, quick(), 8);
  const auto certs = lrl::certify_outputs(r, s, p.epsilon, kappas, lrl::default_heldout_size(p.epsilon), 9);
  int within = 0;
  for (const auto& c : certs) within += c.within_epsilon;
  EXPECT_GE(within, 10);
}

TEST(Baselines, SampleAccountingIdentity) {
  lrl::TaskStream s = stream(10);
  const lrl::RunRecord r = lrl::run_baseline(BaselineKind::IndependentErm, s, policy(6, 2, 10), quick(), 11);
  long total = 0;
  for (const auto& e : r.events) {
    total += e.samples_drawn;
    EXPECT_EQ(e.cumulative_samples, total);
    EXPECT_EQ(e.outcome, lrl::TaskOutcome::BaselineFit);
  }
  EXPECT_EQ(total, r.total_samples);
}

TEST(Baselines, NamesRoundTrip) {
  for (auto k : {BaselineKind::IndependentErm, BaselineKind::OracleKnownRep})
    EXPECT_EQ(lrl::baseline_kind_from_string(lrl::to_string(k)), k);
  EXPECT_THROW(lrl::baseline_kind_from_string("magic"), lrl::InvalidInput);
}

}  // namespace
