#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace drgnn {

/// Dense node index. Users occupy [0, num_users), items occupy
/// [num_users, num_users + num_items).
using NodeId = std::uint32_t;

/// One observed (user, item) interaction in dense per-side indices.
struct UserItem {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  friend bool operator==(const UserItem&, const UserItem&) = default;
  friend auto operator<=>(const UserItem&, const UserItem&) = default;
};

/// Immutable bipartite user-item graph in CSR form. Both edge directions are
/// stored and every neighbor list is sorted ascending without duplicates.
class InteractionGraph {
 public:
  InteractionGraph() = default;

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }
  /// Number of undirected edges (stored entries / 2).
  std::size_t num_edges() const { return neighbor_ids_.size() / 2; }

  bool is_user(NodeId v) const { return v < num_users_; }
  NodeId user_node(std::uint32_t user) const { return user; }
  NodeId item_node(std::uint32_t item) const {
    return static_cast<NodeId>(num_users_ + item);
  }
  std::uint32_t item_index(NodeId v) const {
    return static_cast<std::uint32_t>(v - num_users_);
  }

  std::size_t degree(NodeId v) const { return degrees_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbor_ids_.data() + row_offsets_[v], degrees_[v]};
  }
  bool has_edge(NodeId u, NodeId v) const;

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const NodeId> neighbor_ids() const { return neighbor_ids_; }
  std::span<const std::size_t> degrees() const { return degrees_; }

  /// Deduplicated interactions in (user, item) order.
  std::vector<UserItem> interactions() const;

  friend bool operator==(const InteractionGraph&, const InteractionGraph&) = default;

 private:
  friend InteractionGraph build_graph(std::span<const UserItem>, std::size_t, std::size_t);

  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<NodeId> neighbor_ids_;
  std::vector<std::size_t> degrees_;
};

/// Builds the graph; duplicate pairs collapse to one edge. Throws DataError
/// naming the first out-of-range pair.
InteractionGraph build_graph(std::span<const UserItem> interactions, std::size_t num_users,
                             std::size_t num_items);

/// Sparse propagation matrix in CSR form. Rows need not be symmetric (the
/// robust reweighting and edge overlay both break symmetry). `sqrt_degrees`
/// always holds the square-root degrees of the observed graph.
struct NormalizedAdjacency {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> row_offsets;
  std::vector<NodeId> columns;
  std::vector<double> values;
  std::vector<double> sqrt_degrees;

  std::size_t row_size(NodeId r) const { return row_offsets[r + 1] - row_offsets[r]; }
  std::span<const NodeId> row_columns(NodeId r) const {
    return {columns.data() + row_offsets[r], row_size(r)};
  }
  std::span<const double> row_values(NodeId r) const {
    return {values.data() + row_offsets[r], row_size(r)};
  }
  std::size_t num_entries() const { return columns.size(); }

  /// Entry (r, c), or 0 when not stored.
  double value(NodeId r, NodeId c) const;

  NormalizedAdjacency transpose() const;
  bool is_symmetric(double tolerance = 0.0) const;

  friend bool operator==(const NormalizedAdjacency&, const NormalizedAdjacency&) = default;
};

/// D^{-1/2} A D^{-1/2}. Zero-degree nodes have empty rows.
NormalizedAdjacency normalize(const InteractionGraph& graph);

}  // namespace drgnn
