#include "drgnn/dro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "drgnn/error.hpp"

namespace drgnn {

namespace {

void require_positive_alpha(double alpha) {
  if (!(alpha > 0.0)) {
    std::ostringstream msg;
    msg << "alpha must be positive, got " << alpha;
    throw NumericError(msg.str());
  }
}

void require_same_size(std::span<const double> base, std::span<const double> affinities) {
  if (base.size() != affinities.size()) throw NumericError("base and affinities differ in size");
  if (base.empty()) throw NumericError("empty neighbor distribution");
}

void require_rows(const Matrix& embeddings, std::size_t nodes) {
  if (embeddings.rows() != nodes) {
    std::ostringstream msg;
    msg << "embedding table has " << embeddings.rows() << " rows, graph has " << nodes << " nodes";
    throw NumericError(msg.str());
  }
}

}  // namespace

void DroConfig::validate() const {
  if (!(alpha > 0.0)) throw UsageError("dro.alpha must be > 0");
  if (refresh_period < 1) throw UsageError("dro.refresh_period must be >= 1");
}

double smoothness(const InteractionGraph& graph, const Matrix& embeddings) {
  require_rows(embeddings, graph.num_nodes());
  const std::size_t dim = embeddings.cols();
  double total = 0.0;
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    if (graph.degree(u) == 0) continue;
    const double su = std::sqrt(static_cast<double>(graph.degree(u)));
    auto eu = embeddings.row(u);
    for (NodeId v : graph.neighbors(u)) {
      const double sv = std::sqrt(static_cast<double>(graph.degree(v)));
      auto ev = embeddings.row(v);
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = eu[c] / su - ev[c] / sv;
        total += diff * diff;
      }
    }
  }
  return 0.5 * total;
}

double laplacian_quadratic_form(const NormalizedAdjacency& adjacency, const Matrix& embeddings) {
  require_rows(embeddings, adjacency.num_nodes);
  double total = 0.0;
  for (NodeId u = 0; u < adjacency.num_nodes; ++u) {
    if (adjacency.row_size(u) == 0) continue;
    auto eu = embeddings.row(u);
    total += squared_norm(eu);
    auto cols = adjacency.row_columns(u);
    auto vals = adjacency.row_values(u);
    for (std::size_t e = 0; e < cols.size(); ++e) total -= vals[e] * dot(eu, embeddings.row(cols[e]));
  }
  return total;
}

Matrix smoothness_gradient(const InteractionGraph& graph, const Matrix& embeddings) {
  require_rows(embeddings, graph.num_nodes());
  const std::size_t dim = embeddings.cols();
  Matrix grad(embeddings.rows(), dim);
  // Each undirected edge appears once from each endpoint; both terms
  // (u,v) and (v,u) contribute to the gradient at u.
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    if (graph.degree(u) == 0) continue;
    const double su = std::sqrt(static_cast<double>(graph.degree(u)));
    auto eu = embeddings.row(u);
    auto gu = grad.row(u);
    for (NodeId v : graph.neighbors(u)) {
      const double sv = std::sqrt(static_cast<double>(graph.degree(v)));
      auto ev = embeddings.row(v);
      for (std::size_t c = 0; c < dim; ++c) gu[c] += 2.0 * (eu[c] / su - ev[c] / sv) / su;
    }
  }
  return grad;
}

double aggregation_equivalence_check(const InteractionGraph& graph,
                                     const NormalizedAdjacency& adjacency,
                                     const Matrix& embeddings) {
  require_rows(embeddings, adjacency.num_nodes);
  const Matrix grad = smoothness_gradient(graph, embeddings);
  const std::size_t dim = embeddings.cols();
  double residual = 0.0;
  std::vector<double> aggregated(dim);
  for (NodeId u = 0; u < adjacency.num_nodes; ++u) {
    if (graph.degree(u) == 0) continue;
    std::fill(aggregated.begin(), aggregated.end(), 0.0);
    auto cols = adjacency.row_columns(u);
    auto vals = adjacency.row_values(u);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      auto ev = embeddings.row(cols[e]);
      for (std::size_t c = 0; c < dim; ++c) aggregated[c] += vals[e] * ev[c];
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const double stepped = embeddings(u, c) - 0.5 * grad(u, c);
      residual = std::max(residual, std::abs(stepped - aggregated[c]));
    }
  }
  return residual;
}

std::vector<double> worst_case_distribution(std::span<const double> base,
                                            std::span<const double> affinities, double alpha) {
  require_same_size(base, affinities);
  require_positive_alpha(alpha);
  const double mass = std::accumulate(base.begin(), base.end(), 0.0);
  if (std::abs(mass - 1.0) > 1e-9) throw NumericError("base distribution does not sum to 1");
  if (std::isinf(alpha)) return {base.begin(), base.end()};

  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < base.size(); ++v) {
    if (base[v] > 0.0) top = std::max(top, affinities[v] / alpha);
  }
  std::vector<double> tilted(base.size());
  double z = 0.0;
  for (std::size_t v = 0; v < base.size(); ++v) {
    tilted[v] = base[v] > 0.0 ? base[v] * std::exp(affinities[v] / alpha - top) : 0.0;
    z += tilted[v];
  }
  for (double& p : tilted) p /= z;
  return tilted;
}

double dro_smooth_loss(std::span<const double> base, std::span<const double> affinities,
                       double alpha) {
  require_same_size(base, affinities);
  require_positive_alpha(alpha);
  if (std::isinf(alpha)) {
    double mean = 0.0;
    for (std::size_t v = 0; v < base.size(); ++v) mean += base[v] * affinities[v];
    return mean;
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < base.size(); ++v) {
    if (base[v] > 0.0) top = std::max(top, affinities[v] / alpha);
  }
  double sum = 0.0;
  for (std::size_t v = 0; v < base.size(); ++v) {
    if (base[v] > 0.0) sum += base[v] * std::exp(affinities[v] / alpha - top);
  }
  return alpha * (top + std::log(sum));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw NumericError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

Matrix l2_normalized_rows(const Matrix& embeddings) {
  Matrix out = embeddings;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double norm = std::sqrt(squared_norm(row));
    if (norm > 0.0) {
      for (double& x : row) x /= norm;
    }
  }
  return out;
}

double affinity(const Matrix& embeddings, std::span<const double> sqrt_degrees, NodeId u,
                NodeId v, bool l2_normalize) {
  double sim = dot(embeddings.row(u), embeddings.row(v));
  if (l2_normalize) {
    const double nu = std::sqrt(squared_norm(embeddings.row(u)));
    const double nv = std::sqrt(squared_norm(embeddings.row(v)));
    sim = (nu > 0.0 && nv > 0.0) ? sim / (nu * nv) : 0.0;
  }
  return -sim / (sqrt_degrees[u] * sqrt_degrees[v]);
}

std::vector<double> row_distribution(const NormalizedAdjacency& adjacency, NodeId u) {
  auto cols = adjacency.row_columns(u);
  auto vals = adjacency.row_values(u);
  std::vector<double> p(cols.size());
  const double su = adjacency.sqrt_degrees[u];
  for (std::size_t e = 0; e < cols.size(); ++e) p[e] = vals[e] * adjacency.sqrt_degrees[cols[e]] / su;
  return p;
}

namespace {

// Affinities for row u, reading from an already-normalized table when
// l2_normalize is on so each row norm is computed once.
std::vector<double> row_affinities(const NormalizedAdjacency& adjacency, const Matrix& table,
                                   NodeId u) {
  auto cols = adjacency.row_columns(u);
  std::vector<double> g(cols.size());
  for (std::size_t e = 0; e < cols.size(); ++e) {
    g[e] = affinity(table, adjacency.sqrt_degrees, u, cols[e], false);
  }
  return g;
}

}  // namespace

NormalizedAdjacency reweight_adjacency(const NormalizedAdjacency& adjacency,
                                       const Matrix& embeddings, double alpha,
                                       bool l2_normalize) {
  require_positive_alpha(alpha);
  require_rows(embeddings, adjacency.num_nodes);
  if (std::isinf(alpha)) return adjacency;

  const Matrix table = l2_normalize ? l2_normalized_rows(embeddings) : embeddings;
  NormalizedAdjacency out = adjacency;
  for (NodeId u = 0; u < adjacency.num_nodes; ++u) {
    const std::size_t n = adjacency.row_size(u);
    if (n == 0) continue;
    const std::vector<double> g = row_affinities(adjacency, table, u);
    const std::vector<double> base = row_distribution(adjacency, u);
    // A'_uv / A_uv = P*(v) / P(v) = exp(g_v/alpha) / sum_w P(w) exp(g_w/alpha)
    const double top = *std::max_element(g.begin(), g.end()) / alpha;
    double z = 0.0;
    for (std::size_t e = 0; e < n; ++e) z += base[e] * std::exp(g[e] / alpha - top);
    const std::size_t offset = adjacency.row_offsets[u];
    for (std::size_t e = 0; e < n; ++e) {
      out.values[offset + e] = adjacency.values[offset + e] * std::exp(g[e] / alpha - top) / z;
    }
  }
  return out;
}

double mean_worst_case_kl(const NormalizedAdjacency& adjacency, const Matrix& embeddings,
                          double alpha, bool l2_normalize) {
  require_positive_alpha(alpha);
  require_rows(embeddings, adjacency.num_nodes);
  if (std::isinf(alpha)) return 0.0;
  const Matrix table = l2_normalize ? l2_normalized_rows(embeddings) : embeddings;
  double total = 0.0;
  std::size_t rows = 0;
  for (NodeId u = 0; u < adjacency.num_nodes; ++u) {
    if (adjacency.row_size(u) == 0) continue;
    const std::vector<double> base = row_distribution(adjacency, u);
    const std::vector<double> worst = worst_case_distribution(base, row_affinities(adjacency, table, u), alpha);
    total += kl_divergence(worst, base);
    ++rows;
  }
  return rows == 0 ? 0.0 : total / static_cast<double>(rows);
}

double bound_prefactor(double alpha, double degree) {
  const double root = std::sqrt(degree);
  // (d + sqrt d) e^x / (d - 1 + e^x) rewritten with e^{-x} to avoid overflow.
  const double shrink = std::exp(-2.0 * root / alpha);
  return (degree + root) / ((degree - 1.0) * shrink + 1.0);
}

double generalization_bound(const BoundInputs& in) {
  if (!(in.rho > 0.0 && in.rho < 1.0)) throw UsageError("rho must lie in (0, 1)");
  if (!(in.alpha > 0.0)) throw UsageError("alpha must be > 0");
  if (!(in.degree >= 1.0)) throw UsageError("degree must be >= 1");
  if (!(in.hypothesis_count >= 1.0)) throw UsageError("hypothesis count must be >= 1");
  const double log_term = std::log(in.hypothesis_count) - std::log(in.rho);
  return bound_prefactor(in.alpha, in.degree) * std::sqrt(0.5 * log_term);
}

}  // namespace drgnn
