#pragma once

// Lifelong representation learning with multi-task ERM as a subroutine.
//
// Task 1 is fitted by single-task ERM and stored. Every later task first runs a
// few-shot property test: a head is trained on the frozen representation and
// its empirical risk compared with kappa_t + 3/4 eps. On failure the task's
// data joins the memory buffer and multi-task ERM over the buffer refreshes the
// representation. The buffer holds at most N tasks; when it is full, N doubles
// and the buffer is cleared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lrl/core.hpp"
#include "lrl/datagen.hpp"
#include "lrl/erm.hpp"
#include "lrl/errors.hpp"
#include "lrl/sample_size.hpp"

namespace lrl {

enum class TaskOutcome { InitialErm, TestPassed, TestFailedUpdated, TestFailedDoubled, BaselineFit };

inline std::string_view to_string(TaskOutcome outcome) {
  switch (outcome) {
    case TaskOutcome::InitialErm: return "initial_erm";
    case TaskOutcome::TestPassed: return "test_passed";
    case TaskOutcome::TestFailedUpdated: return "test_failed_updated";
    case TaskOutcome::TestFailedDoubled: return "test_failed_doubled";
    case TaskOutcome::BaselineFit: return "baseline_fit";
  }
  return "unknown";
}

struct TaskEvent {
  int task_id = 0;
  double test_risk = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  TaskOutcome outcome = TaskOutcome::InitialErm;
  long samples_drawn = 0;
  long cumulative_samples = 0;
  long n = 0;
  long N = 0;
  int memory_tasks = 0;
  long memory_samples = 0;
  bool representation_updated = false;
  double erm_objective = std::numeric_limits<double>::quiet_NaN();
  int erm_epochs = 0;
  std::optional<double> heldout_excess_risk;
};

struct RunRecord {
  std::string algorithm;
  std::vector<TaskEvent> events;
  std::vector<Predictor> outputs;
  long total_samples = 0;
  int representation_updates = 0;  ///< includes the initial fit on task 1
  int multi_task_calls = 0;        ///< every ERM call that fits the representation
  long initial_N = 0;
  long final_N = 0;
  int peak_memory_tasks = 0;
  long peak_memory_samples = 0;
};

/// Datasets of task 1 and of tasks whose property test failed since the last reset.
class MemoryBuffer {
 public:
  void add(Dataset data) {
    samples_ += data.size();
    entries_.push_back(std::move(data));
    peak_tasks_ = std::max(peak_tasks_, static_cast<int>(entries_.size()));
    peak_samples_ = std::max(peak_samples_, samples_);
  }

  void clear() {
    entries_.clear();
    samples_ = 0;
  }

  std::span<const Dataset> datasets() const noexcept { return entries_; }
  int tasks() const noexcept { return static_cast<int>(entries_.size()); }
  long samples() const noexcept { return samples_; }
  int peak_tasks() const noexcept { return peak_tasks_; }
  long peak_samples() const noexcept { return peak_samples_; }

  std::vector<int> task_ids() const {
    std::vector<int> ids;
    for (const auto& e : entries_) ids.push_back(e.task_id);
    return ids;
  }

 private:
  std::vector<Dataset> entries_;
  long samples_ = 0;
  int peak_tasks_ = 0;
  long peak_samples_ = 0;
};

struct LearnerState {
  std::optional<SemiOrthogonalMatrix> rep_hat;
  MemoryBuffer memory;
  std::vector<Eigen::VectorXd> memory_heads;  ///< heads from the last multi-task fit, aligned with memory
  long n = 0;
  long N = 1;
};

struct PropertyTestResult {
  bool passed = false;
  PredictionHead f_tilde;
  double test_risk = 0.0;
  double threshold = 0.0;
  long samples = 0;
};

/// Draws m~ examples, fits a head on the frozen representation and accepts iff
/// the empirical risk on that same sample is at most kappa_t + 3/4 eps.
inline PropertyTestResult property_test(TaskStream& stream, int task_id, const SemiOrthogonalMatrix& rep_hat, double kappa_t,
                                        const SampleSizePolicy& policy, const OptimizerConfig& cfg, std::uint64_t seed) {
  detail::require(kappa_t >= 0.0, "property_test: kappa_t must be non-negative");
  const long m = m_tilde(policy);
  const Dataset sample = stream.draw(task_id, m);
  HeadFit fit = frozen_rep_erm_detailed(sample, rep_hat, stream.loss(), cfg, seed);
  const double risk = empirical_risk(Predictor{rep_hat, fit.head, stream.loss()}, sample);
  const double threshold = kappa_t + 0.75 * policy.epsilon;
  return {risk <= threshold, std::move(fit.head), risk, threshold, m};
}

struct LifelongOptions {
  /// Known task-eluder dimension: N is fixed to it and the doubling branch is disabled.
  std::optional<long> known_dim;
  /// Override of the policy's starting N (ignored when known_dim is set).
  std::optional<long> initial_N;
  /// Start each multi-task fit from the current representation, the previous
  /// fit's heads and the new task's property-test head.
  bool warm_start = true;
};

namespace detail {

inline void push_event(RunRecord& record, TaskEvent event, const LearnerState& state) {
  record.total_samples += event.samples_drawn;
  event.cumulative_samples = record.total_samples;
  event.n = state.n;
  event.N = state.N;
  event.memory_tasks = state.memory.tasks();
  event.memory_samples = state.memory.samples();
  record.events.push_back(std::move(event));
}

}  // namespace detail

/// Runs the lifelong learner over every task of the stream, in order.
inline RunRecord run_lifelong(TaskStream& stream, const std::vector<double>& kappas, const SampleSizePolicy& policy,
                              const OptimizerConfig& cfg, const LifelongOptions& options, std::uint64_t seed) {
  policy.validate();
  cfg.validate();
  const int T = stream.num_tasks();
  if (static_cast<int>(kappas.size()) != T)
    throw InvalidInput("run_lifelong: expected " + std::to_string(T) + " noise levels, got " + std::to_string(kappas.size()));
  for (double kappa : kappas) detail::require(std::isfinite(kappa) && kappa >= 0.0, "run_lifelong: noise levels must be >= 0");
  if (options.known_dim) detail::require(*options.known_dim >= 1, "run_lifelong: known dimension must be >= 1");

  const Eigen::Index d = stream.dim();
  const Eigen::Index k = stream.rep_dim();
  const LossKind loss = stream.loss();

  RunRecord record;
  record.algorithm = options.known_dim ? "lifelong_known_dim" : "lifelong";
  LearnerState state;
  state.N = options.known_dim ? *options.known_dim : options.initial_N.value_or(policy.initial_N());
  detail::require(state.N >= 1, "run_lifelong: initial N must be >= 1");
  record.initial_N = state.N;

  auto refit = [&](int task_id, std::optional<MultiTaskInit> init) {
    const MultiTaskSolution sol = multi_task_erm(state.memory.datasets(), d, k, loss, cfg,
                                                 derive_seed(seed, {static_cast<std::uint64_t>(task_id), 2}), init);
    state.rep_hat = sol.representation;
    state.memory_heads.clear();
    for (const auto& h : sol.heads) state.memory_heads.push_back(h.w);
    ++record.multi_task_calls;
    ++record.representation_updates;
    return sol;
  };

  // Task 1: single-task ERM on m_N samples.
  {
    const long m = m_N(policy, state.N);
    state.memory.add(stream.draw(1, m));
    state.n = 1;
    const MultiTaskSolution sol = refit(1, std::nullopt);
    record.outputs.push_back(Predictor{*state.rep_hat, sol.heads.back(), loss});
    TaskEvent event;
    event.task_id = 1;
    event.outcome = TaskOutcome::InitialErm;
    event.samples_drawn = m;
    event.representation_updated = true;
    event.erm_objective = sol.final_objective;
    event.erm_epochs = sol.epochs;
    detail::push_event(record, std::move(event), state);
  }

  for (int t = 2; t <= T; ++t) {
    const auto tt = static_cast<std::uint64_t>(t);
    PropertyTestResult test = property_test(stream, t, *state.rep_hat, kappas[static_cast<std::size_t>(t - 1)], policy, cfg,
                                            derive_seed(seed, {tt, 1}));
    TaskEvent event;
    event.task_id = t;
    event.test_risk = test.test_risk;
    event.threshold = test.threshold;
    event.samples_drawn = test.samples;

    if (test.passed) {
      event.outcome = TaskOutcome::TestPassed;
      record.outputs.push_back(Predictor{*state.rep_hat, std::move(test.f_tilde), loss});
      detail::push_event(record, std::move(event), state);
      continue;
    }

    event.outcome = TaskOutcome::TestFailedUpdated;
    if (options.known_dim) {
      ++state.n;
    } else if (state.n == state.N) {
      state.n = 1;
      state.N *= 2;
      state.memory.clear();
      state.memory_heads.clear();
      event.outcome = TaskOutcome::TestFailedDoubled;
    } else {
      ++state.n;
    }

    // m_N uses N after any doubling above.
    const long m = m_N(policy, state.N);
    state.memory.add(stream.draw(t, m));
    event.samples_drawn += m;

    std::optional<MultiTaskInit> init;
    if (options.warm_start) {
      std::vector<Eigen::VectorXd> heads = state.memory_heads;
      heads.push_back(test.f_tilde.w);
      init = MultiTaskInit{*state.rep_hat, std::move(heads)};
    }
    const MultiTaskSolution sol = refit(t, std::move(init));
    record.outputs.push_back(Predictor{*state.rep_hat, sol.heads.back(), loss});
    event.representation_updated = true;
    event.erm_objective = sol.final_objective;
    event.erm_epochs = sol.epochs;
    detail::push_event(record, std::move(event), state);
  }

  record.final_N = state.N;
  record.peak_memory_tasks = state.memory.peak_tasks();
  record.peak_memory_samples = state.memory.peak_samples();
  return record;
}

struct Certification {
  int task_id = 0;
  double excess_risk = 0.0;
  bool within_epsilon = false;
};

/// Default held-out size ceil(32 / eps^2).
inline long default_heldout_size(double epsilon) {
  detail::require(epsilon > 0.0, "heldout size: epsilon must be positive");
  return static_cast<long>(std::ceil(32.0 / (epsilon * epsilon) - 1e-9));
}

/// Held-out risk of every output predictor minus its task's Bayes risk. The
/// held-out samples are drawn independently of the tapes the learner used.
inline std::vector<Certification> certify_outputs(const RunRecord& record, const TaskStream& stream, double epsilon,
                                                  const std::vector<double>& kappas, long heldout_size, std::uint64_t seed) {
  detail::require(heldout_size >= 1, "certify_outputs: heldout_size must be >= 1");
  detail::require(record.outputs.size() == record.events.size(), "certify_outputs: record has no outputs");
  detail::require(kappas.size() == static_cast<std::size_t>(stream.num_tasks()), "certify_outputs: noise level count mismatch");
  std::vector<Certification> out;
  out.reserve(record.outputs.size());
  for (std::size_t i = 0; i < record.outputs.size(); ++i) {
    const int t = record.events[i].task_id;
    const TaskDistribution& task = stream.task(t);
    const Dataset heldout = task.sample(heldout_size, derive_seed(seed, {0xCE57, static_cast<std::uint64_t>(t)}));
    const double excess = empirical_risk(record.outputs[i], heldout) - kappas[static_cast<std::size_t>(t - 1)];
    out.push_back({t, excess, excess <= epsilon});
  }
  return out;
}

inline void attach_certification(RunRecord& record, const std::vector<Certification>& certs) {
  for (const auto& c : certs)
    for (auto& e : record.events)
      if (e.task_id == c.task_id) e.heldout_excess_risk = c.excess_risk;
}

// ---------------------------------------------------------------------------
// Serialisation.

namespace detail {

inline std::string format_real(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace detail

inline constexpr std::string_view kRunRecordCsvHeader =
    "task_id,outcome,test_risk,threshold,n,N,samples_drawn,cumulative_samples,memory_tasks,heldout_excess_risk";

/// One row per task.
inline std::string run_record_csv(const RunRecord& record) {
  std::ostringstream os;
  os << kRunRecordCsvHeader << '\n';
  for (const auto& e : record.events) {
    os << e.task_id << ',' << to_string(e.outcome) << ',' << detail::format_real(e.test_risk) << ','
       << detail::format_real(e.threshold) << ',' << e.n << ',' << e.N << ',' << e.samples_drawn << ','
       << e.cumulative_samples << ',' << e.memory_tasks << ','
       << (e.heldout_excess_risk ? detail::format_real(*e.heldout_excess_risk) : std::string()) << '\n';
  }
  return os.str();
}

inline nlohmann::ordered_json run_record_summary(const RunRecord& record) {
  nlohmann::ordered_json j;
  j["algorithm"] = record.algorithm;
  j["tasks"] = record.events.size();
  j["total_samples"] = record.total_samples;
  j["representation_updates"] = record.representation_updates;
  j["multi_task_calls"] = record.multi_task_calls;
  j["initial_N"] = record.initial_N;
  j["final_N"] = record.final_N;
  j["peak_memory_tasks"] = record.peak_memory_tasks;
  j["peak_memory_samples"] = record.peak_memory_samples;
  return j;
}

}  // namespace lrl
