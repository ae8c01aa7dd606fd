#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "lrl/harness/audits.hpp"
#include "lrl/harness/config.hpp"
#include "lrl/harness/experiments.hpp"
#include "lrl/harness/hardness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lrl::harness;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lrl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, DefaultsMatchTableSetup) {
  const ExperimentConfig c = load_config(Experiment::Table1, std::nullopt, {});
  EXPECT_EQ(c.d, 10);
  EXPECT_EQ(c.T, 50);
  EXPECT_EQ(c.k_list, (std::vector<long>{3, 5, 8}));
  EXPECT_EQ(c.beta_list, (std::vector<double>{1, 4, 8}));
  EXPECT_DOUBLE_EQ(c.epsilon, 0.05);
  EXPECT_DOUBLE_EQ(c.optimizer.learning_rate, 1e-3);
  EXPECT_EQ(c.optimizer.max_epochs, 10000);
  EXPECT_EQ(c.optimizer.early_stop_patience, 20);
  EXPECT_EQ(c.output, "results/table1");
}

TEST(Config, FileThenOverrides) {
  const fs::path dir = temp_dir("cfg");
  const fs::path f = write_file(dir, "a.ini", "[run]\nseed = 7\ntrials = 2\n[stream]\nk = 3,5\nbeta = 8\n[optimizer]\nlearning_rate = 0.05\n");
  const ExperimentConfig c = load_config(Experiment::Table1, f, {parse_override("run.trials=4"), parse_override("learner.known_dim = 6")});
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.trials, 4);
  EXPECT_EQ(c.k_list, (std::vector<long>{3, 5}));
  EXPECT_EQ(c.beta_list, (std::vector<double>{8}));
  EXPECT_DOUBLE_EQ(c.optimizer.learning_rate, 0.05);
  ASSERT_TRUE(c.known_dim.has_value());
  EXPECT_EQ(*c.known_dim, 6);
}

TEST(Config, ShippedProfilesParse) {
  for (const char* name : {"table1.ini", "desk.ini"}) {
    const fs::path p = fs::path(LRL_TEST_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_config(Experiment::Table1, p, {})) << name;
  }
}

TEST(Config, UnknownKeyRejected) {
  const fs::path dir = temp_dir("cfg_unknown");
  EXPECT_THROW(load_config(Experiment::Table1, write_file(dir, "b.ini", "[run]\nseeed = 3\n"), {}), lrl::ConfigError);
  EXPECT_THROW(load_config(Experiment::Table1, std::nullopt, {parse_override("stream.dd=3")}), lrl::ConfigError);
  EXPECT_THROW(load_config(Experiment::Table1, write_file(dir, "c.ini", "seed = 3\n"), {}), lrl::ConfigError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(load_config(Experiment::Table1, std::nullopt, {parse_override("run.trials=abc")}), lrl::ConfigError);
  EXPECT_THROW(load_config(Experiment::Table1, std::nullopt, {parse_override("learner.epsilon=1.5")}), lrl::ConfigError);
  EXPECT_THROW(load_config(Experiment::Table1, std::nullopt, {parse_override("stream.k=11")}), lrl::ConfigError);
  EXPECT_THROW(load_config(Experiment::Table1, std::nullopt, {parse_override("learner.policy=fancy")}), lrl::ConfigError);
  EXPECT_THROW(parse_override("no_equals_sign"), lrl::ConfigError);
}

TEST(Config, ParseErrorReportsLine) {
  const fs::path dir = temp_dir("cfg_parse");
  try {
    load_config(Experiment::Table1, write_file(dir, "d.ini", "[run]\nseed = 1\n[broken\n"), {});
    FAIL() << "expected ConfigError";
  } catch (const lrl::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, HashIgnoresOutputButNotParameters) {
  ExperimentConfig a = load_config(Experiment::Table1, std::nullopt, {});
  ExperimentConfig b = a;
  b.output = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, OutputRootFromEnvironment) {
  ExperimentConfig c;
  c.output = "results/x";
  ::setenv("LRL_OUTPUT_ROOT", "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir(c), fs::path("/tmp/root/results/x"));
  c.output = "/abs/y";
  EXPECT_EQ(resolve_output_dir(c), fs::path("/abs/y"));
  ::unsetenv("LRL_OUTPUT_ROOT");
  c.output = "results/x";
  EXPECT_EQ(resolve_output_dir(c), fs::path("results/x"));
}

TEST(Output, PopulationStd) {
  const MeanStd m = mean_std({5, 5, 5, 6, 6, 6, 5, 5, 6, 4});
  EXPECT_DOUBLE_EQ(m.mean, 5.3);
  EXPECT_NEAR(m.std, std::sqrt(0.41), 1e-12);
  const MeanStd z = mean_std({3, 3, 3});
  EXPECT_EQ(z.std, 0.0);
}

TEST(Hardness, ThresholdCalibration) {
  EXPECT_EQ(calibrate_threshold({0.0, 0.0}, {0.0, 0.0}), -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(calibrate_threshold({0.1, 0.2}, {0.5, 0.7}), 0.2);
  // Overlapping: 0.3 misclassifies one point, every other cut at least one.
  EXPECT_DOUBLE_EQ(calibrate_threshold({0.1, 0.4, 0.3}, {0.35, 0.6, 0.9}), 0.3);
}

TEST(Hardness, StatisticMatchesQrOracle) {
  const lrl::HardnessInstance inst = lrl::make_hardness_instance(lrl::Hypothesis::PlantedSignal, 30, 15, 80, 3);
  const lrl::Dataset data = lrl::make_hardness_sample(inst, 4);
  auto rss = [&](long cols) {
    const Eigen::MatrixXd x = data.inputs.leftCols(cols);
    return (data.targets - x * x.colPivHouseholderQr().solve(data.targets)).squaredNorm();
  };
  const double oracle = (rss(15) - rss(30)) / data.targets.squaredNorm();
  EXPECT_NEAR(hardness_statistic(data, 15), oracle, 1e-9);
}

TEST(Hardness, InterpolatingRegimeIsUninformative) {
  const lrl::HardnessInstance inst = lrl::make_hardness_instance(lrl::Hypothesis::PlantedSignal, 40, 20, 10, 5);
  EXPECT_EQ(hardness_statistic(lrl::make_hardness_sample(inst, 6), 20), 0.0);
  const auto rows = hardness_demo({40}, 20, {0, 10}, 20, 7);
  for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
}

TEST(Hardness, WellPoweredRegimeSeparates) {
  const auto rows = hardness_demo({40}, 20, {400}, 40, 8);
  EXPECT_GE(rows[0].accuracy, 0.95);
}

TEST(Audits, GridOracleAgreesWithClosedForm) {
  lrl::Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index k = 1 + i % 3;
    const lrl::SemiOrthogonalMatrix b = lrl::random_semi_orthogonal(6, k, rng());
    const Eigen::VectorXd u = rng.normal_vector(6).normalized() * (0.3 + 0.5 * rng.uniform());
    const double closed = lrl::constrained_subspace_distance(b, u, 0.3, 0.8).min_dist;
    EXPECT_NEAR(grid_search_subspace_distance(b.matrix(), u, 0.3, 0.8), closed, 1e-3);
  }
}

TEST(Audits, LemmaChecksPass) {
  for (const auto& c : lemma_checks(1)) EXPECT_TRUE(c.passed()) << c.name << " max_error=" << c.max_error;
}

TEST(Experiments, SmallTableRunIsByteIdentical) {
  ExperimentConfig c = load_config(Experiment::Table1, std::nullopt,
                                   {parse_override("run.trials=1"), parse_override("stream.d=6"), parse_override("stream.T=6"),
                                    parse_override("stream.k=2"), parse_override("stream.beta=4"),
                                    parse_override("learner.epsilon=0.1"), parse_override("optimizer.learning_rate=0.05"),
                                    parse_override("optimizer.max_epochs=500")});
  const fs::path root = temp_dir("exp");
  c.output = (root / "a").string();
  std::vector<CellSummary> cells;
  const ExperimentReport ra = table1_experiment(c, &cells);
  c.output = (root / "b").string();
  const ExperimentReport rb = table1_experiment(c);
  ASSERT_TRUE(ra.ok());
  ASSERT_EQ(ra.files, rb.files);
  for (const auto& f : ra.files) {
    if (fs::path(f).extension() == ".csv") {
      EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
    }
  }
  ASSERT_EQ(cells.size(), 1u);
  const std::string table = slurp(root / "a" / "table1.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), std::string(kTable1CsvHeader));
  const std::vector<int> ups = cells[0].trials[0].cumulative_updates();
  for (std::size_t t = 1; t < ups.size(); ++t) {
    EXPECT_GE(ups[t], ups[t - 1]);
    EXPECT_LE(ups[t], std::min<long>(static_cast<long>(t) + 1, 2 * cells[0].trials[0].record.final_N));
  }
}

TEST(Experiments, StreamsArePairedAcrossBeta) {
  const ExperimentConfig c;
  const lrl::TaskStream a = make_cell_stream(c, 3, 1.0, 2);
  const lrl::TaskStream b = make_cell_stream(c, 3, 8.0, 2);
  EXPECT_EQ(a.b_star().matrix(), b.b_star().matrix());
  EXPECT_LE((a.task(5).w_star * 8.0 - b.task(5).w_star).norm(), 1e-12);
  EXPECT_NE(make_cell_stream(c, 3, 1.0, 3).b_star().matrix(), a.b_star().matrix());
}

TEST(Experiments, NamesRoundTrip) {
  for (auto e : {Experiment::Table1, Experiment::Curves, Experiment::EluderAudit, Experiment::Hardness, Experiment::LemmaChecks,
                 Experiment::Certify})
    EXPECT_EQ(experiment_from_string(to_string(e)), e);
  EXPECT_THROW(experiment_from_string("figure9"), lrl::ConfigError);
}

}  // namespace
