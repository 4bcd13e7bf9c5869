#include "drgnn/experiment.hpp"

#include <algorithm>
#include <exception>

namespace drgnn {

ExperimentResult train_and_evaluate(const SplitBundle& bundle, const RunConfig& config,
                                    const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  Trainer trainer(bundle.train_graph(), config.train, config.dro, config.gea);
  const auto validation = pairs_of(bundle.validation);
  ExperimentResult out;
  out.fit = fit(trainer, validation, on_epoch);
  const auto& final = out.fit.best_final_embeddings;
  const auto test = pairs_of(bundle.test);
  out.test = evaluate(final, trainer.graph(), test, config.train.eval_k);
  if (!validation.empty()) out.validation = evaluate(final, trainer.graph(), validation, config.train.eval_k);
  if (config.dro.enabled()) {
    const NormalizedAdjacency base = apply_overlay(normalize(trainer.graph()), trainer.overlay());
    out.worst_case_kl = mean_worst_case_kl(base, trainer.embeddings(), config.dro.alpha, config.dro.l2_normalize);
  }
  out.final_state = trainer.state();
  return out;
}

std::vector<SweepRow> sweep_alpha(const SplitBundle& bundle, const RunConfig& base,
                                  std::vector<double> alphas) {
  std::sort(alphas.begin(), alphas.end());
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    SweepRow row;
    row.alpha = alpha;
    try {
      RunConfig cfg = base;
      cfg.dro.alpha = alpha;
      const ExperimentResult r = train_and_evaluate(bundle, cfg);
      row.ndcg = r.test.ndcg;
      row.worst_case_kl = r.worst_case_kl;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace drgnn
