#include "drgnn/gea.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_set>

#include "drgnn/dro.hpp"
#include "drgnn/error.hpp"

namespace drgnn {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t node) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (node + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void GeaConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("gea.gamma must lie in (0, 1]");
  if (candidate_size == 0) throw UsageError("gea.candidates must be >= 1");
  if (refresh_period < 0) throw UsageError("gea.refresh_period must be >= 0");
}

std::size_t EdgeOverlay::count() const {
  return static_cast<std::size_t>(
      std::count_if(added.begin(), added.end(), [](const auto& a) { return a.has_value(); }));
}

std::optional<NodeId> select_added_neighbor(NodeId node, const InteractionGraph& graph,
                                            const Matrix& embeddings, std::size_t candidate_size,
                                            std::uint64_t seed, bool l2_normalize) {
  const bool user = graph.is_user(node);
  const NodeId side_begin = user ? static_cast<NodeId>(graph.num_users()) : 0;
  const NodeId side_end =
      user ? static_cast<NodeId>(graph.num_nodes()) : static_cast<NodeId>(graph.num_users());

  // Pool: opposite-side nodes that are neither neighbors nor isolated.
  std::vector<NodeId> pool;
  auto nbrs = graph.neighbors(node);
  auto next_nbr = nbrs.begin();
  for (NodeId v = side_begin; v < side_end; ++v) {
    while (next_nbr != nbrs.end() && *next_nbr < v) ++next_nbr;
    if (next_nbr != nbrs.end() && *next_nbr == v) continue;
    if (graph.degree(v) == 0) continue;
    pool.push_back(v);
  }
  if (pool.empty()) return std::nullopt;

  std::vector<NodeId> candidates;
  if (candidate_size >= pool.size()) {
    candidates = pool;
  } else {
    // Floyd's algorithm: a uniform subset of size k without replacement.
    std::mt19937_64 rng(seed);
    std::unordered_set<std::size_t> chosen;
    const std::size_t n = pool.size();
    for (std::size_t j = n - candidate_size; j < n; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const std::size_t t = pick(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    candidates.reserve(candidate_size);
    for (std::size_t idx : chosen) candidates.push_back(pool[idx]);
    std::sort(candidates.begin(), candidates.end());
  }

  NodeId best = candidates.front();
  double best_g = std::numeric_limits<double>::infinity();
  const double su = std::sqrt(static_cast<double>(graph.degree(node)));
  for (NodeId v : candidates) {
    const double sv = std::sqrt(static_cast<double>(graph.degree(v)));
    double sim = dot(embeddings.row(node), embeddings.row(v));
    if (l2_normalize) {
      const double nu = std::sqrt(squared_norm(embeddings.row(node)));
      const double nv = std::sqrt(squared_norm(embeddings.row(v)));
      sim = (nu > 0.0 && nv > 0.0) ? sim / (nu * nv) : 0.0;
    }
    const double g = -sim / (su * sv);
    if (g < best_g) {  // candidates ascend, so strict < keeps the lowest id on ties
      best_g = g;
      best = v;
    }
  }
  return best;
}

EdgeOverlay select_overlay(const InteractionGraph& graph, const Matrix& embeddings,
                           const GeaConfig& config, std::uint64_t seed, bool l2_normalize) {
  EdgeOverlay overlay;
  overlay.gamma = config.gamma;
  overlay.added.assign(graph.num_nodes(), std::nullopt);
  if (!config.active()) return overlay;
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    if (graph.degree(u) == 0) continue;
    overlay.added[u] = select_added_neighbor(u, graph, embeddings, config.candidate_size,
                                             mix_seed(seed, u), l2_normalize);
  }
  return overlay;
}

NormalizedAdjacency apply_overlay(const NormalizedAdjacency& adjacency, const EdgeOverlay& overlay) {
  if (overlay.gamma >= 1.0 || overlay.count() == 0) return adjacency;
  if (overlay.added.size() != adjacency.num_nodes) {
    throw DataError("overlay size does not match adjacency");
  }
  const double gamma = overlay.gamma;
  NormalizedAdjacency out;
  out.num_nodes = adjacency.num_nodes;
  out.sqrt_degrees = adjacency.sqrt_degrees;
  out.row_offsets.assign(adjacency.num_nodes + 1, 0);
  out.columns.reserve(adjacency.num_entries() + overlay.count());
  out.values.reserve(adjacency.num_entries() + overlay.count());
  for (NodeId u = 0; u < adjacency.num_nodes; ++u) {
    auto cols = adjacency.row_columns(u);
    auto vals = adjacency.row_values(u);
    const auto& added = overlay.added[u];
    if (!added || cols.empty()) {
      out.columns.insert(out.columns.end(), cols.begin(), cols.end());
      out.values.insert(out.values.end(), vals.begin(), vals.end());
    } else {
      const NodeId extra = *added;
      auto pos = std::lower_bound(cols.begin(), cols.end(), extra);
      if (pos != cols.end() && *pos == extra) {
        std::ostringstream msg;
        msg << "overlay adds existing edge (" << u << ", " << extra << ")";
        throw DataError(msg.str());
      }
      if (extra == u || adjacency.sqrt_degrees[extra] <= 0.0) {
        throw DataError("overlay target must be a distinct node with nonzero degree");
      }
      const double extra_value =
          adjacency.sqrt_degrees[u] * (1.0 - gamma) / adjacency.sqrt_degrees[extra];
      const auto split = static_cast<std::size_t>(pos - cols.begin());
      for (std::size_t e = 0; e < cols.size(); ++e) {
        if (e == split) {
          out.columns.push_back(extra);
          out.values.push_back(extra_value);
        }
        out.columns.push_back(cols[e]);
        out.values.push_back(gamma * vals[e]);
      }
      if (split == cols.size()) {
        out.columns.push_back(extra);
        out.values.push_back(extra_value);
      }
    }
    out.row_offsets[u + 1] = out.columns.size();
  }
  return out;
}

std::vector<double> dro_over_new_distribution(std::span<const double> base,
                                              std::span<const double> affinities,
                                              std::optional<double> added_affinity, double gamma,
                                              double alpha) {
  if (!added_affinity || gamma >= 1.0) return worst_case_distribution(base, affinities, alpha);
  if (!(gamma > 0.0)) throw NumericError("gamma must lie in (0, 1]");
  std::vector<double> mixed(base.size() + 1);
  std::vector<double> g(affinities.begin(), affinities.end());
  for (std::size_t v = 0; v < base.size(); ++v) mixed[v] = gamma * base[v];
  mixed.back() = 1.0 - gamma;
  g.push_back(*added_affinity);
  return worst_case_distribution(mixed, g, alpha);
}

}  // namespace drgnn
