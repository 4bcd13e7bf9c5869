#include "drgnn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace drgnn::oracle {

namespace {

double kl(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(s, 0.0);
}

double expectation(std::span<const double> p, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * g[i];
  return s;
}

std::vector<double> tilt(std::span<const double> base, std::span<const double> g, double alpha) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : g) top = std::max(top, x / alpha);
  std::vector<double> p(base.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = base[i] * std::exp(g[i] / alpha - top);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

// Moves p toward base until KL(p || base) <= eta. KL is convex along the
// segment and zero at base, so bisection on the mixing weight is exact.
void pull_into_ball(std::vector<double>& p, std::span<const double> base, double eta) {
  if (kl(p, base) <= eta) return;
  double lo = 0.0;  // infeasible side
  double hi = 1.0;  // feasible side
  std::vector<double> trial(p.size());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < p.size(); ++i) trial[i] = (1.0 - mid) * p[i] + mid * base[i];
    if (kl(trial, base) <= eta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1.0 - hi) * p[i] + hi * base[i];
}

}  // namespace

double tilt_kl(std::span<const double> base, std::span<const double> g, double alpha) {
  const auto p = tilt(base, g, alpha);
  return kl(p, base);
}

FeasibleSample brute_force_worst_case(std::span<const double> base, std::span<const double> g,
                                      double eta, std::size_t samples, std::mt19937_64& rng) {
  if (base.size() != g.size() || base.empty()) throw std::invalid_argument("base/g size mismatch");
  if (base.size() > kMaxSupport) throw std::invalid_argument("oracle support capped at 8");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be >= 0");
  const std::size_t n = base.size();

  FeasibleSample best;
  best.distribution.assign(base.begin(), base.end());
  best.kl = 0.0;
  best.objective = expectation(base, g);
  if (eta == 0.0) return best;

  // Phase 1: Dirichlet(c * base) samples over a wide range of concentrations.
  std::uniform_real_distribution<double> log_c(std::log(0.3), std::log(3000.0));
  std::vector<double> p(n);
  for (std::size_t s = 0; s < samples; ++s) {
    const double c = std::exp(log_c(rng));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::gamma_distribution<double> gamma(c * base[i], 1.0);
      p[i] = gamma(rng);
      total += p[i];
    }
    if (!(total > 0.0)) continue;
    for (double& x : p) x /= total;
    if (std::any_of(p.begin(), p.end(), [](double x) { return x <= 0.0; })) continue;
    pull_into_ball(p, base, eta);
    const double obj = expectation(p, g);
    if (obj > best.objective) {
      best.distribution = p;
      best.objective = obj;
    }
  }

  // Phase 2: pairwise transfers j -> i, pulled back into the ball, with a
  // shrinking step. Sweeps per step size are capped: along the curved KL
  // boundary gains can get arbitrarily small without stopping.
  p = best.distribution;
  double step = 0.25;
  int sweeps = 0;
  while (step > 1e-14) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || p[j] <= 0.0) continue;
        std::vector<double> trial = p;
        const double moved = std::min(step, 0.999999 * trial[j]);
        trial[j] -= moved;
        trial[i] += moved;
        pull_into_ball(trial, base, eta);
        const double obj = expectation(trial, g);
        if (obj > best.objective + 1e-16) {
          p = trial;
          best.objective = obj;
          improved = true;
        }
      }
    }
    if (!improved || ++sweeps >= 50) {
      step *= 0.5;
      sweeps = 0;
    }
  }
  best.distribution = p;
  best.kl = kl(p, base);
  best.objective = expectation(p, g);
  return best;
}

double lagrange_alpha_for_eta(std::span<const double> base, std::span<const double> g, double eta) {
  if (base.size() != g.size() || base.empty()) throw std::invalid_argument("base/g size mismatch");
  // As alpha -> 0 the tilt concentrates on argmax g: KL -> -log base(argmax set).
  const double top = *std::max_element(g.begin(), g.end());
  double top_mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == top) top_mass += base[i];
  }
  const double max_kl = -std::log(top_mass);
  if (!(eta > 0.0) || !(eta < max_kl)) throw std::domain_error("eta outside (0, max achievable KL)");

  double lo = 1.0;  // KL(lo) > eta
  double hi = 1.0;  // KL(hi) < eta
  while (tilt_kl(base, g, lo) <= eta) {
    lo *= 0.5;
    if (lo < 1e-300) throw std::domain_error("eta not reachable");
  }
  while (tilt_kl(base, g, hi) >= eta) {
    hi *= 2.0;
    if (hi > 1e300) throw std::domain_error("eta not reachable");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (tilt_kl(base, g, mid) > eta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& loss,
                                  const Matrix& at, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  Matrix grad(at.rows(), at.cols());
  Matrix probe = at;
  auto probe_values = probe.values();
  auto grad_values = grad.values();
  for (std::size_t i = 0; i < probe_values.size(); ++i) {
    const double original = probe_values[i];
    probe_values[i] = original + step;
    const double up = loss(probe);
    probe_values[i] = original - step;
    const double down = loss(probe);
    probe_values[i] = original;
    grad_values[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace drgnn::oracle
