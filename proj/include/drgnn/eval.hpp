#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"

namespace drgnn {

struct RankMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct UserMetrics {
  std::uint32_t user = 0;
  RankMetrics metrics;
};

struct MetricsReport {
  std::size_t k = 20;
  double ndcg = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t num_evaluated_users = 0;
  std::vector<UserMetrics> per_user;

  /// {"k":..,"ndcg":..,"precision":..,"recall":..,"users":..}
  std::string to_json() const;
};

/// Item indices ordered by descending score, ties by ascending item id, with
/// `masked_items` removed. Only the first `limit` entries are produced
/// (all when limit is 0).
std::vector<std::uint32_t> rank_items(const Matrix& final_embeddings,
                                      const InteractionGraph& graph, std::uint32_t user,
                                      std::span<const std::uint32_t> masked_items,
                                      std::size_t limit = 0);

/// Binary-gain precision, recall and NDCG at k (log2(rank + 1) discount,
/// ideal DCG over min(|relevant|, k) slots). Returns nullopt when `relevant`
/// is empty. Throws UsageError for k == 0.
std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        std::span<const std::uint32_t> relevant, std::size_t k);

/// Full-ranking evaluation: every user with at least one held-out item is
/// ranked over the whole catalog with its training items masked, and the
/// metrics are averaged arithmetically. `graph` supplies the training mask.
MetricsReport evaluate(const Matrix& final_embeddings, const InteractionGraph& graph,
                       std::span<const UserItem> held_out, std::size_t k,
                       bool keep_per_user = false);

}  // namespace drgnn
