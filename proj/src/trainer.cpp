#include "drgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "drgnn/error.hpp"

namespace drgnn {

namespace {

constexpr int kRejectionTries = 64;

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1));
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
  return z ^ (z >> 33);
}

double softplus(double x) {
  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw UsageError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("train.learning_rate must be > 0");
  if (!(l2_lambda >= 0.0)) throw UsageError("train.l2_lambda must be >= 0");
  if (batch_size == 0) throw UsageError("train.batch_size must be >= 1");
  if (dim == 0) throw UsageError("model.dim must be >= 1");
  if (!(init_std > 0.0)) throw UsageError("model.init_std must be > 0");
  if (eval_k == 0) throw UsageError("eval.k must be >= 1");
}

double bpr_loss(double score_pos, double score_neg) { return softplus(score_neg - score_pos); }

std::vector<std::optional<std::uint32_t>> sample_negatives(const InteractionGraph& graph,
                                                           std::span<const std::uint32_t> users,
                                                           std::mt19937_64& rng) {
  const std::size_t num_items = graph.num_items();
  std::vector<std::optional<std::uint32_t>> out;
  out.reserve(users.size());
  std::uniform_int_distribution<std::uint32_t> any_item(0, static_cast<std::uint32_t>(num_items - 1));
  for (std::uint32_t user : users) {
    const NodeId u = graph.user_node(user);
    const std::size_t free = num_items - graph.degree(u);
    if (free == 0) {
      out.emplace_back(std::nullopt);
      continue;
    }
    std::optional<std::uint32_t> pick;
    for (int attempt = 0; attempt < kRejectionTries && !pick; ++attempt) {
      const std::uint32_t item = any_item(rng);
      if (!graph.has_edge(u, graph.item_node(item))) pick = item;
    }
    if (!pick) {
      // r-th item of the complement, skipping the sorted neighbor list
      std::uniform_int_distribution<std::size_t> nth(0, free - 1);
      std::size_t r = nth(rng);
      std::uint32_t item = 0;
      auto nbrs = graph.neighbors(u);
      auto it = nbrs.begin();
      for (;; ++item) {
        if (it != nbrs.end() && *it == graph.item_node(item)) {
          ++it;
          continue;
        }
        if (r == 0) break;
        --r;
      }
      pick = item;
    }
    out.push_back(pick);
  }
  return out;
}

Trainer::Trainer(InteractionGraph graph, TrainConfig train, DroConfig dro, GeaConfig gea)
    : Trainer(std::move(graph), train, dro, gea, true) {}

Trainer Trainer::lightgcn(InteractionGraph graph, TrainConfig train) {
  return Trainer(std::move(graph), train, DroConfig{}, GeaConfig{}, false);
}

Trainer::Trainer(InteractionGraph graph, TrainConfig train, DroConfig dro, GeaConfig gea,
                 bool robust)
    : graph_(std::move(graph)), train_(train), dro_(dro), gea_(gea), robust_(robust) {
  train_.validate();
  dro_.validate();
  gea_.validate();
  base_adjacency_ = normalize(graph_);
  snapshot_ = std::make_shared<const AdjacencySnapshot>(base_adjacency_);
  overlay_.gamma = gea_.gamma;
  overlay_.added.assign(graph_.num_nodes(), std::nullopt);
  embeddings_ = init_embeddings(graph_.num_nodes(), train_.dim, train_.init_std, train_.seed);
  adam_m_ = Matrix(graph_.num_nodes(), train_.dim);
  adam_v_ = Matrix(graph_.num_nodes(), train_.dim);
  rng_.seed(train_.seed + 1);
}

bool Trainer::dro_due() const {
  return robust_ && epoch_ % static_cast<std::size_t>(dro_.refresh_period) == 0;
}

bool Trainer::gea_due() const {
  if (!robust_ || !gea_.active()) return false;
  const int period = gea_.refresh_period > 0 ? gea_.refresh_period : dro_.refresh_period;
  return epoch_ % static_cast<std::size_t>(period) == 0;
}

void Trainer::refresh() {
  if (!robust_) return;
  if (gea_.active()) {
    overlay_ = select_overlay(graph_, embeddings_, gea_, epoch_seed(train_.seed, epoch_),
                              dro_.l2_normalize);
  }
  refresh_source_ = embeddings_;
  has_refreshed_ = true;
  rebuild_snapshot(refresh_source_);
}

void Trainer::rebuild_snapshot(const Matrix& source) {
  NormalizedAdjacency adjacency = apply_overlay(base_adjacency_, overlay_);
  if (dro_.enabled()) adjacency = reweight_adjacency(adjacency, source, dro_.alpha, dro_.l2_normalize);
  snapshot_ = std::make_shared<const AdjacencySnapshot>(std::move(adjacency));
}

std::vector<TrainingTriple> Trainer::sample_epoch_triples() {
  std::vector<std::uint32_t> users;
  std::vector<std::uint32_t> positives;
  users.reserve(graph_.num_edges());
  positives.reserve(graph_.num_edges());
  for (NodeId u = 0; u < graph_.num_users(); ++u) {
    for (NodeId v : graph_.neighbors(u)) {
      users.push_back(u);
      positives.push_back(graph_.item_index(v));
    }
  }
  const auto negatives = sample_negatives(graph_, users, rng_);
  std::vector<TrainingTriple> triples;
  triples.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (negatives[i]) triples.push_back({users[i], positives[i], *negatives[i]});
  }
  std::shuffle(triples.begin(), triples.end(), rng_);
  return triples;
}

namespace {

// Mean BPR loss over the batch and its gradient on the combined embeddings.
double bpr_batch(const InteractionGraph& graph, const Matrix& final,
                 std::span<const TrainingTriple> batch, Matrix* grad_final) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  const std::size_t dim = final.cols();
  for (const auto& t : batch) {
    const NodeId u = graph.user_node(t.user);
    const NodeId p = graph.item_node(t.positive);
    const NodeId n = graph.item_node(t.negative);
    const double pos = dot(final.row(u), final.row(p));
    const double neg = dot(final.row(u), final.row(n));
    loss += bpr_loss(pos, neg);
    if (grad_final) {
      // d softplus(neg - pos) / d(pos - neg) = -sigmoid(neg - pos)
      const double c = -sigmoid(neg - pos) * scale;
      auto fu = final.row(u);
      auto fp = final.row(p);
      auto fn = final.row(n);
      auto gu = grad_final->row(u);
      auto gp = grad_final->row(p);
      auto gn = grad_final->row(n);
      for (std::size_t k = 0; k < dim; ++k) {
        gu[k] += c * (fp[k] - fn[k]);
        gp[k] += c * fu[k];
        gn[k] -= c * fu[k];
      }
    }
  }
  return loss * scale;
}

}  // namespace

BatchGradient Trainer::batch_gradient(std::span<const TrainingTriple> batch) const {
  if (batch.empty()) throw NumericError("empty batch");
  const AdjacencySnapshot& snap = *snapshot_;
  const PropagationOutput forward = propagate(snap, embeddings_, train_.layers, train_.combine);
  Matrix grad_final(embeddings_.rows(), embeddings_.cols());
  BatchGradient out;
  out.loss = bpr_batch(graph_, forward.final, batch, &grad_final);
  out.grad = backpropagate(snap, forward, grad_final, train_.layers, train_.combine);
  if (train_.l2_lambda > 0.0) {
    auto e = embeddings_.values();
    auto g = out.grad.values();
    double reg = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      reg += e[i] * e[i];
      g[i] += 2.0 * train_.l2_lambda * e[i];
    }
    out.loss += train_.l2_lambda * reg;
  }
  return out;
}

double Trainer::batch_objective(std::span<const TrainingTriple> batch,
                                const Matrix& embeddings) const {
  const PropagationOutput forward = propagate(*snapshot_, embeddings, train_.layers, train_.combine);
  double loss = bpr_batch(graph_, forward.final, batch, nullptr);
  double reg = 0.0;
  for (double x : embeddings.values()) reg += x * x;
  return loss + train_.l2_lambda * reg;
}

void Trainer::apply_gradient(const Matrix& grad) {
  if (!grad.same_shape(embeddings_)) throw NumericError("gradient shape mismatch");
  auto e = embeddings_.values();
  auto g = grad.values();
  const double lr = train_.learning_rate;
  if (train_.optimizer == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= lr * g[i];
    return;
  }
  ++adam_step_;
  const double b1 = train_.adam_beta1;
  const double b2 = train_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step_));
  auto m = adam_m_.values();
  auto v = adam_v_.values();
  for (std::size_t i = 0; i < e.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    e[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + train_.adam_epsilon);
  }
}

double Trainer::train_epoch() {
  if (dro_due() || gea_due()) refresh();
  const auto triples = sample_epoch_triples();
  if (triples.empty()) throw DataError("no training triples (every user interacted with every item?)");
  double total = 0.0;
  std::size_t batches = 0;
  const std::span<const TrainingTriple> all(triples);
  for (std::size_t start = 0; start < all.size(); start += train_.batch_size) {
    const auto batch = all.subspan(start, std::min(train_.batch_size, all.size() - start));
    BatchGradient step = batch_gradient(batch);
    if (!std::isfinite(step.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch_ << ", batch " << batches;
      throw NumericError(msg.str());
    }
    apply_gradient(step.grad);
    total += step.loss;
    ++batches;
  }
  ++epoch_;
  return total / static_cast<double>(batches);
}

Matrix Trainer::final_embeddings() const {
  return propagate(*snapshot_, embeddings_, train_.layers, train_.combine).final;
}

void Trainer::set_embeddings(Matrix embeddings) {
  if (!embeddings.same_shape(embeddings_)) throw DataError("embedding table shape mismatch");
  embeddings_ = std::move(embeddings);
}

TrainerState Trainer::state() const {
  TrainerState s;
  s.epoch = epoch_;
  s.embeddings = embeddings_;
  s.adam_m = adam_m_;
  s.adam_v = adam_v_;
  s.adam_step = adam_step_;
  std::ostringstream rng;
  rng << rng_;
  s.rng_state = rng.str();
  s.has_snapshot = has_refreshed_;
  if (has_refreshed_) s.refresh_source = refresh_source_;
  s.overlay.reserve(overlay_.added.size());
  for (const auto& a : overlay_.added) s.overlay.push_back(a ? static_cast<std::int64_t>(*a) : -1);
  return s;
}

void Trainer::restore(const TrainerState& s) {
  if (!s.embeddings.same_shape(embeddings_)) throw DataError("checkpoint shape does not match the graph");
  epoch_ = s.epoch;
  embeddings_ = s.embeddings;
  adam_m_ = s.adam_m.same_shape(embeddings_) ? s.adam_m : Matrix(embeddings_.rows(), embeddings_.cols());
  adam_v_ = s.adam_v.same_shape(embeddings_) ? s.adam_v : Matrix(embeddings_.rows(), embeddings_.cols());
  adam_step_ = s.adam_step;
  if (!s.rng_state.empty()) {
    std::istringstream rng(s.rng_state);
    rng >> rng_;
    if (!rng) throw DataError("checkpoint: corrupt RNG state");
  }
  overlay_.gamma = gea_.gamma;
  overlay_.added.assign(graph_.num_nodes(), std::nullopt);
  if (!s.overlay.empty()) {
    if (s.overlay.size() != graph_.num_nodes()) throw DataError("checkpoint: overlay size mismatch");
    for (std::size_t v = 0; v < s.overlay.size(); ++v) {
      if (s.overlay[v] >= 0) overlay_.added[v] = static_cast<NodeId>(s.overlay[v]);
    }
  }
  has_refreshed_ = s.has_snapshot && robust_;
  if (has_refreshed_) {
    refresh_source_ = s.refresh_source;
    rebuild_snapshot(refresh_source_);
  } else {
    snapshot_ = std::make_shared<const AdjacencySnapshot>(base_adjacency_);
  }
}

FitResult fit(Trainer& trainer, std::span<const UserItem> validation,
              const std::function<void(const EpochRecord&)>& on_epoch) {
  FitResult result;
  const TrainConfig& cfg = trainer.train_config();
  std::size_t since_best = 0;
  bool have_best = false;
  while (trainer.epoch() < cfg.epochs) {
    EpochRecord rec;
    rec.loss = trainer.train_epoch();
    rec.epoch = trainer.epoch();
    if (!validation.empty()) {
      Matrix final = trainer.final_embeddings();
      const MetricsReport m = evaluate(final, trainer.graph(), validation, cfg.eval_k);
      rec.val_ndcg = m.ndcg;
      if (!have_best || m.ndcg > result.best_val_ndcg) {
        have_best = true;
        result.best_val_ndcg = m.ndcg;
        result.best_epoch = rec.epoch;
        result.best_final_embeddings = std::move(final);
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.patience > 0 && have_best && since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (!have_best) {
    result.best_final_embeddings = trainer.final_embeddings();
    result.best_epoch = trainer.epoch();
  }
  return result;
}

}  // namespace drgnn
