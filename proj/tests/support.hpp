#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"

namespace drgnn::testing {

// Random bipartite graph; every user gets at least one item so that most
// rows are non-trivial, but isolated items are allowed.
inline InteractionGraph random_graph(std::mt19937_64& rng, std::size_t max_users = 6,
                                     std::size_t max_items = 6, double density = 0.4) {
  std::uniform_int_distribution<std::size_t> nu_dist(1, max_users);
  std::uniform_int_distribution<std::size_t> ni_dist(1, max_items);
  const std::size_t nu = nu_dist(rng);
  const std::size_t ni = ni_dist(rng);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(ni - 1));
  std::vector<UserItem> pairs;
  for (std::uint32_t u = 0; u < nu; ++u) {
    pairs.push_back({u, pick(rng)});
    for (std::uint32_t i = 0; i < ni; ++i)
      if (keep(rng)) pairs.push_back({u, i});
  }
  return build_graph(pairs, nu, ni);
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = n(rng);
  return m;
}

// Dense copy of a sparse propagation matrix.
inline std::vector<std::vector<double>> dense(const NormalizedAdjacency& a) {
  std::vector<std::vector<double>> d(a.num_nodes, std::vector<double>(a.num_nodes, 0.0));
  for (NodeId r = 0; r < a.num_nodes; ++r) {
    auto cols = a.row_columns(r);
    auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) d[r][cols[k]] = vals[k];
  }
  return d;
}

inline Matrix dense_multiply(const std::vector<std::vector<double>>& a, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a.size(); ++c)
      if (a[r][c] != 0.0)
        for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) += a[r][c] * x(c, j);
  return out;
}

}  // namespace drgnn::testing
