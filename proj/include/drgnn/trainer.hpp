#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drgnn/dro.hpp"
#include "drgnn/eval.hpp"
#include "drgnn/gea.hpp"
#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"
#include "drgnn/model.hpp"

namespace drgnn {

enum class OptimizerKind { sgd, adam };
OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

struct TrainConfig {
  double learning_rate = 0.01;
  double l2_lambda = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch_size = 2048;
  std::size_t layers = 3;
  std::size_t dim = 32;
  std::uint64_t seed = 2024;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double init_std = 0.1;
  LayerCombine combine = LayerCombine::mean;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 20;
  std::size_t eval_k = 20;

  void validate() const;
};

/// (user, observed item, unobserved item) in per-side indices.
struct TrainingTriple {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
};

/// -ln sigmoid(pos - neg), evaluated as softplus(neg - pos).
double bpr_loss(double score_pos, double score_neg);

/// One uniform draw from the items user u has not interacted with, per
/// entry of `users`. Rejection sampling falls back to enumerating the
/// complement after a fixed number of misses, so the draw stays uniform.
/// Users who interacted with every item get nullopt.
std::vector<std::optional<std::uint32_t>> sample_negatives(const InteractionGraph& graph,
                                                           std::span<const std::uint32_t> users,
                                                           std::mt19937_64& rng);

struct BatchGradient {
  double loss = 0.0;
  Matrix grad;
};

/// Everything needed to resume training bit-exactly.
struct TrainerState {
  std::size_t epoch = 0;
  Matrix embeddings;
  Matrix adam_m;
  Matrix adam_v;
  std::uint64_t adam_step = 0;
  std::string rng_state;
  /// Layer-0 embeddings the current robust weights were computed from.
  Matrix refresh_source;
  std::vector<std::int64_t> overlay;  // -1 where no node was added
  bool has_snapshot = false;
};

/// BPR trainer over a propagation snapshot. In robust mode the snapshot is
/// rebuilt at refresh boundaries: edge overlay first, then reweighting of the
/// mixed neighbor distributions from the layer-0 embeddings. The baseline
/// mode keeps the symmetric normalized adjacency for the whole run.
class Trainer {
 public:
  Trainer(InteractionGraph graph, TrainConfig train, DroConfig dro, GeaConfig gea);

  /// Plain LightGCN: fixed symmetric adjacency, no refresh machinery.
  static Trainer lightgcn(InteractionGraph graph, TrainConfig train);

  /// One pass over all training edges; returns the mean batch objective.
  /// Throws NumericError if the loss becomes non-finite.
  double train_epoch();

  /// Rebuilds the overlay and robust weights from the current embeddings.
  void refresh();

  /// Mean BPR loss over `batch` plus l2_lambda * |E0|^2, and its gradient
  /// with respect to E0, using the current snapshot.
  BatchGradient batch_gradient(std::span<const TrainingTriple> batch) const;
  /// Same objective evaluated at arbitrary layer-0 embeddings.
  double batch_objective(std::span<const TrainingTriple> batch, const Matrix& embeddings) const;

  void apply_gradient(const Matrix& grad);

  /// Samples one negative per training edge and shuffles, advancing the RNG.
  std::vector<TrainingTriple> sample_epoch_triples();

  Matrix final_embeddings() const;
  const Matrix& embeddings() const { return embeddings_; }
  void set_embeddings(Matrix embeddings);

  const InteractionGraph& graph() const { return graph_; }
  const AdjacencySnapshot& snapshot() const { return *snapshot_; }
  const EdgeOverlay& overlay() const { return overlay_; }
  const TrainConfig& train_config() const { return train_; }
  const DroConfig& dro_config() const { return dro_; }
  const GeaConfig& gea_config() const { return gea_; }
  bool robust_mode() const { return robust_; }
  std::size_t epoch() const { return epoch_; }

  TrainerState state() const;
  void restore(const TrainerState& state);

 private:
  Trainer(InteractionGraph graph, TrainConfig train, DroConfig dro, GeaConfig gea, bool robust);
  void rebuild_snapshot(const Matrix& source);
  bool dro_due() const;
  bool gea_due() const;

  InteractionGraph graph_;
  TrainConfig train_;
  DroConfig dro_;
  GeaConfig gea_;
  bool robust_ = true;

  NormalizedAdjacency base_adjacency_;
  std::shared_ptr<const AdjacencySnapshot> snapshot_;
  EdgeOverlay overlay_;
  Matrix refresh_source_;
  bool has_refreshed_ = false;

  Matrix embeddings_;
  Matrix adam_m_;
  Matrix adam_v_;
  std::uint64_t adam_step_ = 0;
  std::mt19937_64 rng_;
  std::size_t epoch_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> val_ndcg;
};

struct FitResult {
  std::vector<EpochRecord> history;
  Matrix best_final_embeddings;
  std::size_t best_epoch = 0;
  double best_val_ndcg = 0.0;
  bool stopped_early = false;
};

/// Trains for up to `train_config().epochs` more epochs. With a non-empty
/// validation set, evaluates NDCG@eval_k after every epoch, keeps the best
/// final embeddings and stops after `patience` epochs without improvement.
FitResult fit(Trainer& trainer, std::span<const UserItem> validation,
              const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace drgnn
