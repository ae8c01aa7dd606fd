#pragma once

// Planted-signal detection at desk scale. One fixed statistic, so this only
// illustrates the hard regime; it says nothing about other tests.
//
// Statistic: G = (RSS_U - RSS_full) / ||y||^2, the share of energy that a
// least-squares fit on all d coordinates explains beyond a fit restricted to
// the first r coordinates. Under H0 y is independent of x; under H1 the signal
// lives in U^perp and only the full fit can capture it. With n <= r both fits
// interpolate and G = 0 for either hypothesis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrl/datagen.hpp"
#include "lrl/harness/config.hpp"
#include "lrl/harness/output.hpp"

namespace lrl::harness {

namespace detail {

/// y^T y - b^T G^{-1} b for the leading `dim` coordinates, 0 when n <= dim.
inline double residual_sum_of_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yy, Eigen::Index n,
                                      Eigen::Index dim) {
  if (dim == 0) return yy;
  if (n <= dim) return 0.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram.topLeftCorner(dim, dim));
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::VectorXd b = xty.head(dim);
  return std::max(0.0, yy - b.dot(llt.solve(b)));
}

}  // namespace detail

inline double hardness_statistic(const Dataset& data, Eigen::Index r) {
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  if (n == 0) return 0.0;
  const double yy = data.targets.squaredNorm();
  if (yy == 0.0) return 0.0;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(data.inputs.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Eigen::VectorXd xty = data.inputs.transpose() * data.targets;
  const double full = detail::residual_sum_of_squares(gram, xty, yy, n, d);
  const double restricted = detail::residual_sum_of_squares(gram, xty, yy, n, r);
  return (restricted - full) / yy;
}

/// Threshold maximising calibration accuracy of "decide H1 iff G > threshold";
/// the smallest maximiser wins, starting from -infinity.
inline double calibrate_threshold(const std::vector<double>& null_stats, const std::vector<double>& planted_stats) {
  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  candidates.insert(candidates.end(), null_stats.begin(), null_stats.end());
  candidates.insert(candidates.end(), planted_stats.begin(), planted_stats.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_threshold = candidates.front();
  long best_correct = -1;
  for (double thr : candidates) {
    long correct = 0;
    for (double g : null_stats) correct += g <= thr;
    for (double g : planted_stats) correct += g > thr;
    if (correct > best_correct) {
      best_correct = correct;
      best_threshold = thr;
    }
  }
  return best_threshold;
}

struct HardnessRow {
  long d = 0;
  long n = 0;
  int trials = 0;  ///< instances per hypothesis
  double accuracy = 0.0;
  double std_error = 0.0;
  double threshold = 0.0;
};

/// Statistics for `trials` fresh instances of one hypothesis; `phase` separates
/// calibration (0) from evaluation (1) draws.
inline std::vector<double> hardness_statistics(Hypothesis h, long d, long r, long n, int trials, int phase, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(trials));
  const auto hyp = static_cast<std::uint64_t>(h == Hypothesis::PlantedSignal);
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(n),
                                               static_cast<std::uint64_t>(phase), hyp, static_cast<std::uint64_t>(i)});
    const HardnessInstance inst = make_hardness_instance(h, d, r, n, s);
    out.push_back(hardness_statistic(make_hardness_sample(inst, derive_seed(s, {1})), r));
  }
  return out;
}

inline std::vector<HardnessRow> hardness_demo(const std::vector<long>& d_list, long r, const std::vector<long>& n_grid, int trials,
                                              std::uint64_t seed) {
  lrl::detail::require(trials >= 1, "hardness demo: trials must be >= 1");
  std::vector<HardnessRow> rows;
  for (long d : d_list) {
    lrl::detail::require(r >= 0 && 2 * r <= d, "hardness demo: need r <= d/2");
    for (long n : n_grid) {
      lrl::detail::require(n >= 0, "hardness demo: n must be >= 0");
      const double thr = calibrate_threshold(hardness_statistics(Hypothesis::PureNoise, d, r, n, trials, 0, seed),
                                             hardness_statistics(Hypothesis::PlantedSignal, d, r, n, trials, 0, seed));
      long correct = 0;
      for (double g : hardness_statistics(Hypothesis::PureNoise, d, r, n, trials, 1, seed)) correct += g <= thr;
      for (double g : hardness_statistics(Hypothesis::PlantedSignal, d, r, n, trials, 1, seed)) correct += g > thr;
      const double total = 2.0 * trials;
      const double acc = static_cast<double>(correct) / total;
      rows.push_back({d, n, trials, acc, std::sqrt(acc * (1.0 - acc) / total), thr});
      std::cerr << "[hardness] d=" << d << " n=" << n << " accuracy=" << acc << '\n';
    }
  }
  return rows;
}

inline std::string hardness_csv(const std::vector<HardnessRow>& rows) {
  std::ostringstream os;
  os << "d,n,trials_per_hypothesis,accuracy,std_error,threshold,kind\n";
  for (const auto& row : rows)
    os << row.d << ',' << row.n << ',' << row.trials << ',' << fmt(row.accuracy) << ',' << fmt(row.std_error) << ','
       << (std::isinf(row.threshold) ? std::string("-inf") : fmt(row.threshold)) << ",illustration\n";
  return os.str();
}

inline ExperimentReport hardness_experiment(const ExperimentConfig& c, std::vector<HardnessRow>* rows_out = nullptr) {
  ExperimentReport report;
  const OutputDir dir(resolve_output_dir(c));
  std::vector<HardnessRow> rows = hardness_demo(c.hardness.d_list, c.hardness.r, c.hardness.n_grid, c.hardness.trials, c.seed);
  const std::string csv = hardness_csv(rows);
  dir.write("hardness.csv", csv, report);
  report.summary.push_back("illustration only: one fixed residual-gap statistic, not a bound over all tests");
  std::istringstream lines(csv);
  for (std::string line; std::getline(lines, line);) report.summary.push_back(line);
  write_manifest(dir, c, {c.seed}, report);
  if (rows_out) *rows_out = std::move(rows);
  return report;
}

}  // namespace lrl::harness
