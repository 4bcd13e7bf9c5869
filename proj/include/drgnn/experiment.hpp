#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "drgnn/config.hpp"
#include "drgnn/data.hpp"
#include "drgnn/eval.hpp"
#include "drgnn/trainer.hpp"

namespace drgnn {

struct ExperimentResult {
  FitResult fit;
  MetricsReport test;
  std::optional<MetricsReport> validation;
  /// Mean KL(P*_u || P_u) at the final layer-0 embeddings (0 without DRO).
  double worst_case_kl = 0.0;
  TrainerState final_state;
};

/// Trains on bundle.train with `config` and evaluates the best (or last)
/// final embeddings on the validation and test sets.
ExperimentResult train_and_evaluate(const SplitBundle& bundle, const RunConfig& config,
                                    const std::function<void(const EpochRecord&)>& on_epoch = {});

/// One train+evaluate run per alpha with everything else fixed. Rows are
/// sorted by alpha ascending (infinity last); failed runs leave ndcg empty.
struct SweepRow {
  double alpha = 0.0;
  std::optional<double> ndcg;
  std::optional<double> worst_case_kl;
  std::string error;
};
std::vector<SweepRow> sweep_alpha(const SplitBundle& bundle, const RunConfig& base,
                                  std::vector<double> alphas);

}  // namespace drgnn
