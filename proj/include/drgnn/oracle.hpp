#pragma once

// Slow brute-force references used by the test suites to certify the
// closed-form results. Not linked into the library or the CLI.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "drgnn/matrix.hpp"

namespace drgnn::oracle {

inline constexpr std::size_t kMaxSupport = 8;

struct FeasibleSample {
  std::vector<double> distribution;
  double kl = 0.0;         // KL(distribution || base)
  double objective = 0.0;  // sum_v distribution(v) g(v)
};

/// Maximizes E_P[g] over {P : KL(P || base) <= eta} by direct search:
/// Dirichlet samples around base, then pairwise mass transfers pulled back
/// into the KL ball. Throws std::invalid_argument for support > 8 or eta < 0.
FeasibleSample brute_force_worst_case(std::span<const double> base, std::span<const double> g,
                                      double eta, std::size_t samples, std::mt19937_64& rng);

/// Bisection on alpha so that the exponential tilt of base by g/alpha sits at
/// KL = eta. Throws std::domain_error when eta is not in (0, max achievable).
double lagrange_alpha_for_eta(std::span<const double> base, std::span<const double> g, double eta);

/// KL of the tilt at a given alpha (computed independently of the library).
double tilt_kl(std::span<const double> base, std::span<const double> g, double alpha);

/// Central differences, one coordinate at a time.
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& loss,
                                  const Matrix& at, double step);

}  // namespace drgnn::oracle
