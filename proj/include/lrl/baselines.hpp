#pragma once

// Comparison algorithms with the same sample accounting as the lifelong
// learner: independent single-task ERM (ignores shared structure) and an
// oracle that is handed the true representation.

#include <cstdint>
#include <string>
#include <string_view>

#include "lrl/core.hpp"
#include "lrl/datagen.hpp"
#include "lrl/erm.hpp"
#include "lrl/errors.hpp"
#include "lrl/lifelong.hpp"
#include "lrl/sample_size.hpp"

namespace lrl {

enum class BaselineKind { IndependentErm, OracleKnownRep };

inline std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::IndependentErm: return "independent_erm";
    case BaselineKind::OracleKnownRep: return "oracle";
  }
  return "unknown";
}

inline BaselineKind baseline_kind_from_string(std::string_view name) {
  if (name == "independent_erm" || name == "independent") return BaselineKind::IndependentErm;
  if (name == "oracle") return BaselineKind::OracleKnownRep;
  throw InvalidInput("unknown baseline '" + std::string(name) + "'");
}

/// IndependentErm draws independent_sample_size(policy) examples per task and
/// fits representation and head from scratch; OracleKnownRep draws m~ and fits
/// only a head on B*.
inline RunRecord run_baseline(BaselineKind kind, TaskStream& stream, const SampleSizePolicy& policy, const OptimizerConfig& cfg,
                              std::uint64_t seed) {
  policy.validate();
  cfg.validate();
  const LossKind loss = stream.loss();
  const long m = kind == BaselineKind::IndependentErm ? independent_sample_size(policy) : m_tilde(policy);
  const SemiOrthogonalMatrix& b_star = stream.b_star();

  RunRecord record;
  record.algorithm = std::string(to_string(kind));
  for (int t = 1; t <= stream.num_tasks(); ++t) {
    const Dataset data = stream.draw(t, m);
    const std::uint64_t fit_seed = derive_seed(seed, {static_cast<std::uint64_t>(t), 3});
    TaskEvent event;
    event.task_id = t;
    event.outcome = TaskOutcome::BaselineFit;
    event.samples_drawn = m;
    if (kind == BaselineKind::IndependentErm) {
      MultiTaskSolution sol = multi_task_erm(std::span<const Dataset>(&data, 1), stream.dim(), stream.rep_dim(), loss, cfg, fit_seed);
      record.outputs.push_back(Predictor{sol.representation, sol.heads.front(), loss});
      event.representation_updated = true;
      event.erm_objective = sol.final_objective;
      event.erm_epochs = sol.epochs;
      ++record.representation_updates;
      ++record.multi_task_calls;
    } else {
      HeadFit fit = frozen_rep_erm_detailed(data, b_star, loss, cfg, fit_seed);
      record.outputs.push_back(Predictor{b_star, fit.head, loss});
      event.erm_objective = fit.objective;
      event.erm_epochs = fit.epochs;
    }
    record.total_samples += m;
    event.cumulative_samples = record.total_samples;
    record.events.push_back(event);
  }
  return record;
}

}  // namespace lrl
