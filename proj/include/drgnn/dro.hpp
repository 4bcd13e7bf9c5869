#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "drgnn/graph.hpp"
#include "drgnn/matrix.hpp"

namespace drgnn {

/// Robust reweighting knobs. `alpha` is the Lagrange multiplier of the KL
/// constraint; smaller alpha means a larger uncertainty set. An infinite
/// alpha disables reweighting.
struct DroConfig {
  double alpha = std::numeric_limits<double>::infinity();
  int refresh_period = 1;
  bool l2_normalize = true;

  bool enabled() const { return alpha < std::numeric_limits<double>::infinity(); }
  /// Throws UsageError on alpha <= 0 or refresh_period < 1.
  void validate() const;
};

// -- Smoothness regularizer ---------------------------------------------------

/// (1/2) sum_u sum_{v in N(u)} |E_u/sqrt(d_u) - E_v/sqrt(d_v)|^2.
double smoothness(const InteractionGraph& graph, const Matrix& embeddings);

/// tr(E^T L E) with L = I - A~, restricted to nodes of nonzero degree.
double laplacian_quadratic_form(const NormalizedAdjacency& adjacency, const Matrix& embeddings);

/// Gradient of `smoothness` computed edge by edge from the pairwise form.
Matrix smoothness_gradient(const InteractionGraph& graph, const Matrix& embeddings);

/// Max-norm of (E - grad/2) - A~E over nodes with nonzero degree: one gradient
/// step of size 1/2 on the smoothness term against one propagation layer.
double aggregation_equivalence_check(const InteractionGraph& graph,
                                     const NormalizedAdjacency& adjacency,
                                     const Matrix& embeddings);

// -- KL-ball worst case -------------------------------------------------------

/// Exponential tilt base(v) * exp(g(v)/alpha), renormalized. Computed with
/// max-subtraction. Throws NumericError for alpha <= 0 or a base that does not
/// sum to one.
std::vector<double> worst_case_distribution(std::span<const double> base,
                                            std::span<const double> affinities, double alpha);

/// alpha * log sum_v base(v) exp(g(v)/alpha). Infinite alpha returns the base
/// mean of g.
double dro_smooth_loss(std::span<const double> base, std::span<const double> affinities,
                       double alpha);

/// KL(p || q) in nats; terms with p(v) == 0 contribute zero.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// g(u,v) = -E_u.E_v / (sqrt(d_u) sqrt(d_v)), with E rows optionally
/// L2-normalized first. Degrees come from `sqrt_degrees`.
double affinity(const Matrix& embeddings, std::span<const double> sqrt_degrees, NodeId u,
                NodeId v, bool l2_normalize);

/// Copy of `embeddings` with every nonzero row scaled to unit L2 norm.
Matrix l2_normalized_rows(const Matrix& embeddings);

/// Per-node distribution implied by a row of the adjacency:
/// P(v) = A_uv * sqrt(d_v) / sqrt(d_u). For A~ this is uniform over N(u).
std::vector<double> row_distribution(const NormalizedAdjacency& adjacency, NodeId u);

/// Replaces every row's implied neighbor distribution by its worst case,
/// A'_uv = sqrt(d_u) P*_u(v) / sqrt(d_v). On A~ this is
/// A'_uv = d_u softmax_alpha(g(u,.))_v A~_uv. Weights use `embeddings` (layer 0).
/// Infinite alpha returns the input unchanged.
NormalizedAdjacency reweight_adjacency(const NormalizedAdjacency& adjacency,
                                       const Matrix& embeddings, double alpha,
                                       bool l2_normalize = true);

/// Mean KL(P*_u || P_u) over nodes with a nonempty row; a diagnostic of the
/// effective robust radius at the current embeddings.
double mean_worst_case_kl(const NormalizedAdjacency& adjacency, const Matrix& embeddings,
                          double alpha, bool l2_normalize = true);

// -- Generalization bound -----------------------------------------------------

struct BoundInputs {
  double alpha = 1.0;
  double degree = 1.0;
  double rho = 0.05;
  double hypothesis_count = 1.0;
};

/// ((d + sqrt d) e^{2 sqrt d / alpha}) / (d - 1 + e^{2 sqrt d / alpha})
///   * sqrt(0.5 ln(|Theta| / rho)).
/// Throws UsageError for rho outside (0,1), alpha <= 0, degree < 1 or
/// hypothesis_count < 1.
double generalization_bound(const BoundInputs& inputs);

/// The degree/alpha prefactor of the bound alone.
double bound_prefactor(double alpha, double degree);

}  // namespace drgnn
