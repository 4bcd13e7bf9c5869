#include "drgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "drgnn/error.hpp"
#include "json.hpp"

namespace drgnn {

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = k;
  j["ndcg"] = ndcg;
  j["precision"] = precision;
  j["recall"] = recall;
  j["users"] = num_evaluated_users;
  return j.dump();
}

std::vector<std::uint32_t> rank_items(const Matrix& final_embeddings,
                                      const InteractionGraph& graph, std::uint32_t user,
                                      std::span<const std::uint32_t> masked_items,
                                      std::size_t limit) {
  const std::size_t num_items = graph.num_items();
  std::vector<double> scores(num_items);
  auto urow = final_embeddings.row(graph.user_node(user));
  for (std::uint32_t i = 0; i < num_items; ++i) {
    scores[i] = dot(urow, final_embeddings.row(graph.item_node(i)));
  }
  std::vector<char> masked(num_items, 0);
  for (std::uint32_t i : masked_items) {
    if (i < num_items) masked[i] = 1;
  }
  std::vector<std::uint32_t> order;
  order.reserve(num_items);
  for (std::uint32_t i = 0; i < num_items; ++i) {
    if (!masked[i]) order.push_back(i);
  }
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  if (limit == 0 || limit >= order.size()) {
    std::sort(order.begin(), order.end(), before);
  } else {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(limit),
                      order.end(), before);
    order.resize(limit);
  }
  return order;
}

std::optional<RankMetrics> metrics_at_k(std::span<const std::uint32_t> ranked,
                                        std::span<const std::uint32_t> relevant, std::size_t k) {
  if (k == 0) throw UsageError("k must be >= 1");
  if (relevant.empty()) return std::nullopt;
  std::vector<std::uint32_t> sorted(relevant.begin(), relevant.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::size_t hits = 0;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t pos = 0; pos < depth; ++pos) {
    if (std::binary_search(sorted.begin(), sorted.end(), ranked[pos])) {
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    }
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(sorted.size(), k);
  for (std::size_t pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);

  RankMetrics m;
  m.precision = static_cast<double>(hits) / static_cast<double>(k);
  m.recall = static_cast<double>(hits) / static_cast<double>(sorted.size());
  m.ndcg = dcg / idcg;
  return m;
}

MetricsReport evaluate(const Matrix& final_embeddings, const InteractionGraph& graph,
                       std::span<const UserItem> held_out, std::size_t k, bool keep_per_user) {
  if (k == 0) throw UsageError("k must be >= 1");
  std::map<std::uint32_t, std::vector<std::uint32_t>> by_user;
  for (const auto& p : held_out) {
    if (p.user >= graph.num_users() || p.item >= graph.num_items()) {
      throw DataError("held-out interaction outside the graph id space");
    }
    by_user[p.user].push_back(p.item);
  }

  MetricsReport report;
  report.k = k;
  std::vector<std::uint32_t> mask;
  for (const auto& [user, items] : by_user) {
    mask.clear();
    for (NodeId v : graph.neighbors(graph.user_node(user))) mask.push_back(graph.item_index(v));
    const auto ranked = rank_items(final_embeddings, graph, user, mask, k);
    const auto m = metrics_at_k(ranked, items, k);
    if (!m) continue;
    report.ndcg += m->ndcg;
    report.precision += m->precision;
    report.recall += m->recall;
    ++report.num_evaluated_users;
    if (keep_per_user) report.per_user.push_back({user, *m});
  }
  if (report.num_evaluated_users > 0) {
    const double n = static_cast<double>(report.num_evaluated_users);
    report.ndcg /= n;
    report.precision /= n;
    report.recall /= n;
  }
  return report;
}

}  // namespace drgnn
