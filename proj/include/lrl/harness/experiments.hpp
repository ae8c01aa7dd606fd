#pragma once

// Logistic-stream experiments: update counts per (k, beta) cell, cumulative
// sample/update curves for the learner and both baselines, and held-out
// certification of every output predictor.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lrl/baselines.hpp"
#include "lrl/datagen.hpp"
#include "lrl/harness/config.hpp"
#include "lrl/harness/output.hpp"
#include "lrl/lifelong.hpp"

namespace lrl::harness {

enum class Algorithm { Lifelong, Independent, Oracle };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Lifelong: return "lifelong";
    case Algorithm::Independent: return "independent_erm";
    case Algorithm::Oracle: return "oracle";
  }
  return "unknown";
}

struct TrialResult {
  Algorithm algorithm = Algorithm::Lifelong;
  long k = 0;
  double beta = 0.0;
  int trial = 0;
  std::uint64_t stream_seed = 0;
  RunRecord record;
  std::vector<Certification> certs;

  int within() const {
    return static_cast<int>(std::count_if(certs.begin(), certs.end(), [](const Certification& c) { return c.within_epsilon; }));
  }
  double worst_excess() const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& c : certs) w = std::max(w, c.excess_risk);
    return w;
  }
  /// Cumulative representation updates after each task.
  std::vector<int> cumulative_updates() const {
    std::vector<int> out;
    int acc = 0;
    for (const auto& e : record.events) out.push_back(acc += e.representation_updated ? 1 : 0);
    return out;
  }
};

/// The stream depends on (trial, k) only, so cells that differ in beta share
/// B*, head directions and input tapes (paired comparisons across beta).
inline std::uint64_t cell_stream_seed(const ExperimentConfig& c, long k, int trial) {
  return derive_seed(c.trial_seed(trial), {static_cast<std::uint64_t>(k)});
}

inline TaskStream make_cell_stream(const ExperimentConfig& c, long k, double beta, int trial) {
  TaskStream::Config sc;
  sc.d = c.d;
  sc.k = k;
  sc.T = c.T;
  sc.beta = beta;
  sc.noise = NoiseSpec::logistic();
  sc.input_law = InputLaw::StandardGaussian;
  sc.loss = LossKind::BinaryCrossEntropy;
  sc.seed = cell_stream_seed(c, k, trial);
  return make_task_stream(sc);
}

inline TrialResult run_trial(const ExperimentConfig& c, Algorithm algorithm, long k, double beta, int trial) {
  TaskStream stream = make_cell_stream(c, k, beta, trial);
  const std::vector<double> kappas(static_cast<std::size_t>(c.T), logistic_gaussian_bayes_risk(beta));
  const SampleSizePolicy policy = c.policy_for(k);
  const std::uint64_t seed = stream.config().seed;

  TrialResult out{algorithm, k, beta, trial, seed, {}, {}};
  if (algorithm == Algorithm::Lifelong) {
    LifelongOptions options;
    options.known_dim = c.known_dim;
    options.initial_N = c.initial_N;
    options.warm_start = c.warm_start;
    out.record = run_lifelong(stream, kappas, policy, c.optimizer, options, derive_seed(seed, {0x1EA2}));
  } else {
    const BaselineKind kind = algorithm == Algorithm::Independent ? BaselineKind::IndependentErm : BaselineKind::OracleKnownRep;
    out.record = run_baseline(kind, stream, policy, c.optimizer, derive_seed(seed, {0xBA5E}));
  }
  const long heldout = c.heldout > 0 ? c.heldout : default_heldout_size(c.epsilon);
  out.certs = certify_outputs(out.record, stream, c.epsilon, kappas, heldout, derive_seed(seed, {0xCE27}));
  attach_certification(out.record, out.certs);
  return out;
}

namespace detail {

inline std::string cell_tag(long k, double beta) { return "k" + std::to_string(k) + "_beta" + fmt(beta); }

inline std::string trial_file(const TrialResult& r) {
  return "runs/" + std::string(to_string(r.algorithm)) + "_" + cell_tag(r.k, r.beta) + "_trial" + std::to_string(r.trial) + ".csv";
}

/// Per task index: mean/std over trials of cumulative samples and updates.
inline std::string curve_csv(const std::vector<TrialResult>& trials) {
  std::ostringstream os;
  os << "task,cum_samples_mean,cum_samples_std,cum_updates_mean,cum_updates_std\n";
  if (trials.empty()) return os.str();
  const std::size_t T = trials.front().record.events.size();
  std::vector<std::vector<int>> updates;
  for (const auto& t : trials) updates.push_back(t.cumulative_updates());
  for (std::size_t i = 0; i < T; ++i) {
    std::vector<double> samples, ups;
    for (std::size_t j = 0; j < trials.size(); ++j) {
      samples.push_back(static_cast<double>(trials[j].record.events[i].cumulative_samples));
      ups.push_back(updates[j][i]);
    }
    const MeanStd s = mean_std(samples);
    const MeanStd u = mean_std(ups);
    os << i + 1 << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << fmt(u.mean) << ',' << fmt(u.std) << '\n';
  }
  return os.str();
}

inline void log_trial(const TrialResult& r, int trials) {
  std::cerr << "[" << to_string(r.algorithm) << "] k=" << r.k << " beta=" << fmt(r.beta) << " trial " << r.trial + 1 << "/"
            << trials << ": updates=" << r.record.representation_updates << " samples=" << r.record.total_samples
            << " within=" << r.within() << "/" << r.certs.size() << '\n';
}

}  // namespace detail

struct CellSummary {
  long k = 0;
  double beta = 0.0;
  std::vector<TrialResult> trials;
};

/// Runs `algorithms` over every (k, beta, trial); failed trials are reported
/// and skipped, completed ones are kept.
inline std::vector<CellSummary> run_cells(const ExperimentConfig& c, const std::vector<Algorithm>& algorithms,
                                          ExperimentReport& report, std::vector<std::vector<CellSummary>>* per_algorithm = nullptr) {
  std::vector<CellSummary> primary;
  if (per_algorithm) per_algorithm->assign(algorithms.size(), {});
  for (long k : c.k_list)
    for (double beta : c.beta_list)
      for (std::size_t a = 0; a < algorithms.size(); ++a) {
        CellSummary cell{k, beta, {}};
        for (int trial = 0; trial < c.trials; ++trial) {
          try {
            cell.trials.push_back(run_trial(c, algorithms[a], k, beta, trial));
            detail::log_trial(cell.trials.back(), c.trials);
          } catch (const std::exception& e) {
            report.failures.push_back(std::string(to_string(algorithms[a])) + " " + detail::cell_tag(k, beta) + " trial " +
                                      std::to_string(trial) + ": " + e.what());
          }
        }
        if (per_algorithm) (*per_algorithm)[a].push_back(cell);
        if (a == 0) primary.push_back(std::move(cell));
      }
  return primary;
}

inline constexpr std::string_view kTable1CsvHeader =
    "k,beta,trials,updates_mean,updates_std,updates_min,updates_max,within_eps_fraction,worst_excess,"
    "total_samples_mean,final_N_max,multi_task_calls_max";

inline std::string table1_csv(const std::vector<CellSummary>& cells) {
  std::ostringstream os;
  os << kTable1CsvHeader << '\n';
  for (const auto& cell : cells) {
    std::vector<double> updates, samples;
    long within = 0, tasks = 0, final_n = 0;
    int calls = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& t : cell.trials) {
      updates.push_back(t.record.representation_updates);
      samples.push_back(static_cast<double>(t.record.total_samples));
      within += t.within();
      tasks += static_cast<long>(t.certs.size());
      worst = std::max(worst, t.worst_excess());
      final_n = std::max(final_n, t.record.final_N);
      calls = std::max(calls, t.record.multi_task_calls);
    }
    const MeanStd u = mean_std(updates);
    const auto [lo, hi] = updates.empty() ? std::pair<double, double>{0, 0}
                                          : std::pair{*std::min_element(updates.begin(), updates.end()),
                                                      *std::max_element(updates.begin(), updates.end())};
    os << cell.k << ',' << fmt(cell.beta) << ',' << cell.trials.size() << ',' << fmt(u.mean) << ',' << fmt(u.std) << ','
       << fmt(lo) << ',' << fmt(hi) << ',' << fmt(tasks ? static_cast<double>(within) / static_cast<double>(tasks) : 0.0) << ','
       << fmt(worst) << ',' << fmt(mean_std(samples).mean) << ',' << final_n << ',' << calls << '\n';
  }
  return os.str();
}

/// Update counts per (k, beta) cell, lifelong curves and per-trial records.
inline ExperimentReport table1_experiment(const ExperimentConfig& c, std::vector<CellSummary>* cells_out = nullptr) {
  ExperimentReport report;
  const OutputDir dir(resolve_output_dir(c));
  std::vector<CellSummary> cells = run_cells(c, {Algorithm::Lifelong}, report);
  for (const auto& cell : cells) {
    for (const auto& t : cell.trials) dir.write(detail::trial_file(t), run_record_csv(t.record), report);
    dir.write("curves/lifelong_" + detail::cell_tag(cell.k, cell.beta) + ".csv", detail::curve_csv(cell.trials), report);
  }
  const std::string table = table1_csv(cells);
  dir.write("table1.csv", table, report);
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) report.summary.push_back(line);
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < c.trials; ++t) seeds.push_back(c.trial_seed(t));
  write_manifest(dir, c, seeds, report);
  if (cells_out) *cells_out = std::move(cells);
  return report;
}

/// Cumulative samples and updates per task for the learner and both baselines.
inline ExperimentReport curves_experiment(const ExperimentConfig& c,
                                          std::vector<std::vector<CellSummary>>* per_algorithm_out = nullptr) {
  ExperimentReport report;
  const OutputDir dir(resolve_output_dir(c));
  const std::vector<Algorithm> algorithms{Algorithm::Lifelong, Algorithm::Independent, Algorithm::Oracle};
  std::vector<std::vector<CellSummary>> per_algorithm;
  run_cells(c, algorithms, report, &per_algorithm);
  std::ostringstream totals;
  totals << "algorithm,k,beta,trials,total_samples_mean,total_samples_std\n";
  for (std::size_t a = 0; a < algorithms.size(); ++a)
    for (const auto& cell : per_algorithm[a]) {
      const std::string name(to_string(algorithms[a]));
      dir.write("curves/" + name + "_" + detail::cell_tag(cell.k, cell.beta) + ".csv", detail::curve_csv(cell.trials), report);
      std::vector<double> samples;
      for (const auto& t : cell.trials) samples.push_back(static_cast<double>(t.record.total_samples));
      const MeanStd s = mean_std(samples);
      totals << name << ',' << cell.k << ',' << fmt(cell.beta) << ',' << cell.trials.size() << ',' << fmt(s.mean) << ','
             << fmt(s.std) << '\n';
    }
  dir.write("totals.csv", totals.str(), report);
  std::istringstream lines(totals.str());
  for (std::string line; std::getline(lines, line);) report.summary.push_back(line);
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < c.trials; ++t) seeds.push_back(c.trial_seed(t));
  write_manifest(dir, c, seeds, report);
  if (per_algorithm_out) *per_algorithm_out = std::move(per_algorithm);
  return report;
}

/// Held-out excess risk of every output predictor of all three algorithms.
inline ExperimentReport certify_experiment(const ExperimentConfig& c) {
  ExperimentReport report;
  const OutputDir dir(resolve_output_dir(c));
  const std::vector<Algorithm> algorithms{Algorithm::Lifelong, Algorithm::Independent, Algorithm::Oracle};
  std::vector<std::vector<CellSummary>> per_algorithm;
  run_cells(c, algorithms, report, &per_algorithm);
  std::ostringstream tasks, summary;
  tasks << "algorithm,k,beta,trial,task_id,excess_risk,within_epsilon\n";
  summary << "algorithm,k,beta,tasks,within_epsilon,fraction,worst_excess\n";
  for (std::size_t a = 0; a < algorithms.size(); ++a)
    for (const auto& cell : per_algorithm[a]) {
      const std::string name(to_string(algorithms[a]));
      long within = 0, total = 0;
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& t : cell.trials) {
        for (const auto& cert : t.certs)
          tasks << name << ',' << cell.k << ',' << fmt(cell.beta) << ',' << t.trial << ',' << cert.task_id << ','
                << fmt(cert.excess_risk) << ',' << (cert.within_epsilon ? 1 : 0) << '\n';
        within += t.within();
        total += static_cast<long>(t.certs.size());
        worst = std::max(worst, t.worst_excess());
      }
      summary << name << ',' << cell.k << ',' << fmt(cell.beta) << ',' << total << ',' << within << ','
              << fmt(total ? static_cast<double>(within) / static_cast<double>(total) : 0.0) << ',' << fmt(worst) << '\n';
    }
  dir.write("certification_tasks.csv", tasks.str(), report);
  dir.write("certification.csv", summary.str(), report);
  std::istringstream lines(summary.str());
  for (std::string line; std::getline(lines, line);) report.summary.push_back(line);
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < c.trials; ++t) seeds.push_back(c.trial_seed(t));
  write_manifest(dir, c, seeds, report);
  return report;
}

}  // namespace lrl::harness
