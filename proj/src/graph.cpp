#include "drgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "drgnn/error.hpp"

namespace drgnn {

bool InteractionGraph::has_edge(NodeId u, NodeId v) const {
  if (u >= num_nodes() || v >= num_nodes()) return false;
  auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<UserItem> InteractionGraph::interactions() const {
  std::vector<UserItem> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_users_; ++u) {
    for (NodeId v : neighbors(u)) out.push_back({u, item_index(v)});
  }
  return out;
}

InteractionGraph build_graph(std::span<const UserItem> interactions, std::size_t num_users,
                             std::size_t num_items) {
  for (const auto& p : interactions) {
    if (p.user >= num_users || p.item >= num_items) {
      std::ostringstream msg;
      msg << "interaction (" << p.user << ", " << p.item << ") out of range for " << num_users
          << " users and " << num_items << " items";
      throw DataError(msg.str());
    }
  }

  std::vector<UserItem> pairs(interactions.begin(), interactions.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  InteractionGraph g;
  g.num_users_ = num_users;
  g.num_items_ = num_items;
  const std::size_t n = num_users + num_items;
  g.degrees_.assign(n, 0);
  for (const auto& p : pairs) {
    ++g.degrees_[p.user];
    ++g.degrees_[num_users + p.item];
  }
  g.row_offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) g.row_offsets_[v + 1] = g.row_offsets_[v] + g.degrees_[v];

  g.neighbor_ids_.resize(2 * pairs.size());
  std::vector<std::size_t> cursor(g.row_offsets_.begin(), g.row_offsets_.end() - 1);
  // pairs are sorted by (user, item): user rows fill ascending; item rows
  // receive users in ascending order as well.
  for (const auto& p : pairs) {
    const auto item = static_cast<NodeId>(num_users + p.item);
    g.neighbor_ids_[cursor[p.user]++] = item;
    g.neighbor_ids_[cursor[item]++] = p.user;
  }
  return g;
}

double NormalizedAdjacency::value(NodeId r, NodeId c) const {
  auto cols = row_columns(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values[row_offsets[r] + static_cast<std::size_t>(it - cols.begin())];
}

NormalizedAdjacency NormalizedAdjacency::transpose() const {
  NormalizedAdjacency t;
  t.num_nodes = num_nodes;
  t.sqrt_degrees = sqrt_degrees;
  t.row_offsets.assign(num_nodes + 1, 0);
  for (NodeId c : columns) ++t.row_offsets[c + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) t.row_offsets[i + 1] += t.row_offsets[i];
  t.columns.resize(columns.size());
  t.values.resize(values.size());
  std::vector<std::size_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
  // Rows visited in ascending order keep every transposed row sorted.
  for (NodeId r = 0; r < num_nodes; ++r) {
    for (std::size_t e = row_offsets[r]; e < row_offsets[r + 1]; ++e) {
      const std::size_t slot = cursor[columns[e]]++;
      t.columns[slot] = r;
      t.values[slot] = values[e];
    }
  }
  return t;
}

bool NormalizedAdjacency::is_symmetric(double tolerance) const {
  NormalizedAdjacency t = transpose();
  if (t.row_offsets != row_offsets || t.columns != columns) return false;
  for (std::size_t e = 0; e < values.size(); ++e) {
    if (std::abs(values[e] - t.values[e]) > tolerance) return false;
  }
  return true;
}

NormalizedAdjacency normalize(const InteractionGraph& graph) {
  NormalizedAdjacency adj;
  const std::size_t n = graph.num_nodes();
  adj.num_nodes = n;
  adj.sqrt_degrees.resize(n);
  for (NodeId v = 0; v < n; ++v) adj.sqrt_degrees[v] = std::sqrt(static_cast<double>(graph.degree(v)));
  adj.row_offsets.assign(graph.row_offsets().begin(), graph.row_offsets().end());
  adj.columns.assign(graph.neighbor_ids().begin(), graph.neighbor_ids().end());
  adj.values.resize(adj.columns.size());
  for (NodeId u = 0; u < n; ++u) {
    for (std::size_t e = adj.row_offsets[u]; e < adj.row_offsets[u + 1]; ++e) {
      adj.values[e] = 1.0 / (adj.sqrt_degrees[u] * adj.sqrt_degrees[adj.columns[e]]);
    }
  }
  return adj;
}

}  // namespace drgnn
