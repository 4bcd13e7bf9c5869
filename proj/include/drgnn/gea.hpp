#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"

namespace drgnn {

/// Edge-addition knobs. Each node's neighbor distribution becomes
/// gamma * P_u + (1 - gamma) * delta_{v*} where v* is the most similar
/// non-neighbor from a random candidate set.
struct GeaConfig {
  bool enabled = false;
  double gamma = 1.0;
  std::size_t candidate_size = 64;
  /// Epochs between re-selection; 0 follows the robust refresh period.
  int refresh_period = 0;

  /// Throws UsageError when gamma is outside (0,1] or candidate_size is 0.
  void validate() const;
  bool active() const { return enabled && gamma < 1.0; }
};

/// At most one added neighbor per node. The added node is on the opposite
/// side of the bipartition and never an existing neighbor. Degrees of the
/// observed graph are left untouched.
struct EdgeOverlay {
  double gamma = 1.0;
  std::vector<std::optional<NodeId>> added;

  std::size_t count() const;
};

/// Samples up to `candidate_size` opposite-side non-neighbors of `node`
/// without replacement (only nodes with nonzero degree qualify) and returns
/// the one minimizing g(node, v); ties go to the lower id. Returns nullopt
/// when no candidate exists. Deterministic in `seed`.
std::optional<NodeId> select_added_neighbor(NodeId node, const InteractionGraph& graph,
                                            const Matrix& embeddings, std::size_t candidate_size,
                                            std::uint64_t seed, bool l2_normalize = true);

/// Runs `select_added_neighbor` for every node with a per-node seed derived
/// from `seed`. Nodes of degree zero get no overlay.
EdgeOverlay select_overlay(const InteractionGraph& graph, const Matrix& embeddings,
                           const GeaConfig& config, std::uint64_t seed, bool l2_normalize = true);

/// Realizes gamma * P_u + (1 - gamma) * delta_{v*} in each overlaid row:
/// existing entries scale by gamma and v* gets sqrt(d_u) (1 - gamma) / sqrt(d_v*).
/// gamma == 1 returns the input. Throws DataError when an overlay targets an
/// existing entry.
NormalizedAdjacency apply_overlay(const NormalizedAdjacency& adjacency, const EdgeOverlay& overlay);

/// Worst-case distribution over the mixed base gamma * base + (1 - gamma) * delta.
/// The result has base.size() + 1 entries when `added_affinity` is given
/// (the last one belongs to the added node) and base.size() otherwise.
std::vector<double> dro_over_new_distribution(std::span<const double> base,
                                              std::span<const double> affinities,
                                              std::optional<double> added_affinity, double gamma,
                                              double alpha);

}  // namespace drgnn
