#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "doctest.h"
#include "drgnn/dro.hpp"
#include "drgnn/error.hpp"
#include "drgnn/oracle.hpp"
#include "support.hpp"

using namespace drgnn;

namespace {

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / n); }

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  for (double& x : p) x = e(rng) + 1e-3;
  double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= s;
  return p;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Straight pairwise sum with both edge directions, no shared code.
double pairwise_smoothness(const InteractionGraph& g, const Matrix& e) {
  double s = 0.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u)
    for (NodeId v : g.neighbors(u)) {
      double du = std::sqrt(double(g.degree(u))), dv = std::sqrt(double(g.degree(v)));
      for (std::size_t j = 0; j < e.cols(); ++j) {
        double d = e(u, j) / du - e(v, j) / dv;
        s += d * d;
      }
    }
  return 0.5 * s;
}

}  // namespace

TEST_CASE("smoothness examples") {
  std::vector<UserItem> one{{0, 0}};
  auto g = build_graph(one, 1, 1);
  Matrix e(2, 2);
  e(0, 0) = 1.0;
  e(1, 1) = 1.0;
  CHECK(smoothness(g, e) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(laplacian_quadratic_form(normalize(g), e) == doctest::Approx(2.0).epsilon(1e-15));

  // constant degree-normalized signal
  std::vector<UserItem> e3{{0, 0}, {0, 1}, {1, 1}};
  auto g3 = build_graph(e3, 2, 2);
  Matrix c(4, 3);
  for (NodeId v = 0; v < 4; ++v)
    for (std::size_t j = 0; j < 3; ++j) c(v, j) = std::sqrt(double(g3.degree(v))) * (j + 1.0);
  CHECK(std::abs(smoothness(g3, c)) < 1e-14);
}

TEST_CASE("property: smoothness agrees with the pairwise sum and tr(E^T L E)") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    auto g = testing::random_graph(rng, 8, 8, 0.4);
    auto e = testing::random_matrix(rng, g.num_nodes(), 3);
    double s = smoothness(g, e);
    REQUIRE(s == doctest::Approx(pairwise_smoothness(g, e)).epsilon(1e-12));
    REQUIRE(s == doctest::Approx(laplacian_quadratic_form(normalize(g), e)).epsilon(1e-10));
    Matrix scaled = e;
    scaled *= 3.0;
    REQUIRE(smoothness(g, scaled) == doctest::Approx(9.0 * s).epsilon(1e-12));
  }
}

TEST_CASE("smoothness gradient matches finite differences") {
  std::mt19937_64 rng(22);
  auto g = testing::random_graph(rng, 4, 4, 0.6);
  auto e = testing::random_matrix(rng, g.num_nodes(), 2);
  auto fd = oracle::finite_difference_gradient([&](const Matrix& x) { return smoothness(g, x); },
                                               e, 1e-5);
  CHECK(max_abs_diff(fd, smoothness_gradient(g, e)) < 1e-7);
}

TEST_CASE("aggregation equivalence") {
  std::vector<UserItem> e3{{0, 0}, {0, 1}, {1, 1}};
  auto g = build_graph(e3, 2, 2);
  auto a = normalize(g);
  CHECK(aggregation_equivalence_check(g, a, Matrix(4, 3)) == 0.0);

  Matrix e(4, 2);
  double vals[] = {0.3, -1.2, 0.7, 0.4, -0.5, 2.0, 1.1, 0.1};
  std::copy(std::begin(vals), std::end(vals), e.values().begin());
  CHECK(aggregation_equivalence_check(g, a, e) < 1e-10);

  // dense reference: E - grad/2 computed from an explicit Laplacian
  auto d = testing::dense(a);
  Matrix ref(4, 2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t j = 0; j < 2; ++j) ref(r, j) += d[r][c] * e(c, j);
  Matrix step = smoothness_gradient(g, e);
  step *= -0.5;
  step += e;
  CHECK(max_abs_diff(step, ref) < 1e-12);
}

TEST_CASE("worst case distribution examples") {
  auto base = uniform(3);
  std::vector<double> flat{0.4, 0.4, 0.4};
  auto p = worst_case_distribution(base, flat, 0.7);
  for (std::size_t v = 0; v < 3; ++v) CHECK(p[v] == base[v]);

  std::vector<double> g{0.0, 1.0, 2.0};
  auto big = worst_case_distribution(base, g, 1e9);
  double tv = 0.0;
  for (std::size_t v = 0; v < 3; ++v) tv += std::abs(big[v] - base[v]);
  CHECK(0.5 * tv < 1e-6);

  auto q = worst_case_distribution(base, g, 1.0);
  double z = 1.0 + std::exp(1.0) + std::exp(2.0);
  CHECK(q[0] == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(q[1] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(q[2] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-14));

  // independent certificate: nothing in the KL ball of the same radius does better
  double eta = kl_divergence(q, base);
  double closed = q[0] * g[0] + q[1] * g[1] + q[2] * g[2];
  std::mt19937_64 rng(5);
  auto best = oracle::brute_force_worst_case(base, g, eta, 20000, rng);
  CHECK(best.kl <= eta + 1e-12);
  CHECK(best.objective <= closed + 1e-8);
  CHECK(best.objective >= closed - 1e-4);

  CHECK(worst_case_distribution(base, g, std::numeric_limits<double>::infinity()) == base);
  CHECK_THROWS_AS(worst_case_distribution(base, g, 0.0), NumericError);
  std::vector<double> bad{0.5, 0.4, 0.2};
  CHECK_THROWS_AS(worst_case_distribution(bad, g, 1.0), NumericError);
}

TEST_CASE("property: worst case distribution") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 300; ++t) {
    std::size_t n = 1 + rng() % 8;
    auto base = random_simplex(rng, n);
    auto g = random_vector(rng, n, 2.0);
    double alpha = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    auto p = worst_case_distribution(base, g, alpha);
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    REQUIRE(std::abs(s - 1.0) <= 1e-12);
    for (double x : p) REQUIRE(x > 0.0);

    double nominal = 0.0;
    for (std::size_t v = 0; v < n; ++v) nominal += base[v] * g[v];
    REQUIRE(dro_smooth_loss(base, g, alpha) >= nominal - 1e-12);

    // KL(P*||base) never grows with alpha
    double prev = std::numeric_limits<double>::infinity();
    for (double a = 0.05; a < 100.0; a *= 1.7) {
      double kl = kl_divergence(worst_case_distribution(base, g, a), base);
      REQUIRE(kl <= prev + 1e-12);
      prev = kl;
    }
  }
}

TEST_CASE("dro smooth loss") {
  auto base = uniform(3);
  std::vector<double> flat{0.25, 0.25, 0.25};
  CHECK(dro_smooth_loss(base, flat, 0.3) == doctest::Approx(0.25).epsilon(1e-15));

  std::vector<double> g{0.0, 1.0, 2.0};
  double want = std::log((1.0 + std::exp(1.0) + std::exp(2.0)) / 3.0);
  CHECK(dro_smooth_loss(base, g, 1.0) == doctest::Approx(want).epsilon(1e-14));
  CHECK(dro_smooth_loss(base, g, 1e9) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dro_smooth_loss(base, g, std::numeric_limits<double>::infinity()) == doctest::Approx(1.0));

  // Lagrangian identity: alpha log E exp(g/alpha) = E_P*[g] - alpha KL(P*||base)
  std::mt19937_64 rng(24);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 2 + rng() % 5;
    auto b = random_simplex(rng, n);
    auto h = random_vector(rng, n);
    double alpha = 0.1 + (rng() % 100) / 25.0;
    auto p = worst_case_distribution(b, h, alpha);
    double ep = 0.0;
    for (std::size_t v = 0; v < n; ++v) ep += p[v] * h[v];
    REQUIRE(dro_smooth_loss(b, h, alpha) ==
            doctest::Approx(ep - alpha * kl_divergence(p, b)).epsilon(1e-10));
  }
}

TEST_CASE("reweight adjacency examples") {
  std::mt19937_64 rng(25);
  auto g = testing::random_graph(rng, 6, 6, 0.5);
  auto a = normalize(g);
  auto e = testing::random_matrix(rng, g.num_nodes(), 4);

  auto same = reweight_adjacency(a, e, 1e9);
  REQUIRE(same.values.size() == a.values.size());
  for (std::size_t k = 0; k < a.values.size(); ++k)
    CHECK(std::abs(same.values[k] - a.values[k]) < 1e-9);
  CHECK(reweight_adjacency(a, e, std::numeric_limits<double>::infinity()) == a);

  auto r = reweight_adjacency(a, e, 0.05);
  for (NodeId u = 0; u < a.num_nodes; ++u)
    if (a.row_size(u) == 1) CHECK(r.row_values(u)[0] == doctest::Approx(a.row_values(u)[0]));
}

TEST_CASE("reweight factors for a degree two node") {
  // u0 has two items of degree one; choose embeddings so g = (-0.5, +0.5).
  std::vector<UserItem> pairs{{0, 0}, {0, 1}};
  auto g = build_graph(pairs, 1, 2);
  auto a = normalize(g);
  Matrix e(3, 1);
  double root2 = std::sqrt(2.0);
  e(0, 0) = 1.0;
  e(1, 0) = 0.5 * root2;
  e(2, 0) = -0.5 * root2;
  CHECK(affinity(e, a.sqrt_degrees, 0, 1, false) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(affinity(e, a.sqrt_degrees, 0, 2, false) == doctest::Approx(0.5).epsilon(1e-15));

  auto r = reweight_adjacency(a, e, 1.0, false);
  double z = std::exp(-0.5) + std::exp(0.5);
  double f0 = 2.0 * std::exp(-0.5) / z, f1 = 2.0 * std::exp(0.5) / z;
  CHECK(f0 == doctest::Approx(0.5379).epsilon(1e-4));
  CHECK(f1 == doctest::Approx(1.4621).epsilon(1e-4));
  CHECK(r.value(0, 1) == doctest::Approx(f0 * a.value(0, 1)).epsilon(1e-14));
  CHECK(r.value(0, 2) == doctest::Approx(f1 * a.value(0, 2)).epsilon(1e-14));

  std::vector<double> gs{-0.5, 0.5};
  auto p = worst_case_distribution(uniform(2), gs, 1.0);
  CHECK(r.value(0, 1) == doctest::Approx(2.0 * p[0] * a.value(0, 1)).epsilon(1e-14));
}

TEST_CASE("property: reweighted aggregation equals the tilted neighbor mean") {
  std::mt19937_64 rng(26);
  for (int t = 0; t < 100; ++t) {
    auto g = testing::random_graph(rng, 8, 8, 0.4);
    auto a = normalize(g);
    auto e = testing::random_matrix(rng, g.num_nodes(), 3);
    double alpha = 0.02 + (rng() % 100) / 50.0;
    bool l2 = t % 2 == 0;
    auto r = reweight_adjacency(a, e, alpha, l2);
    auto out = testing::dense_multiply(testing::dense(r), e);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      auto nb = g.neighbors(u);
      if (nb.empty()) continue;
      std::vector<double> gs;
      for (NodeId v : nb) gs.push_back(affinity(e, a.sqrt_degrees, u, v, l2));
      auto p = worst_case_distribution(uniform(nb.size()), gs, alpha);
      for (std::size_t j = 0; j < 3; ++j) {
        double want = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k)
          want += p[k] * e(nb[k], j) / a.sqrt_degrees[nb[k]];
        want *= a.sqrt_degrees[u];
        REQUIRE(std::abs(out(u, j) - want) < 1e-10);
      }
    }
  }
}

TEST_CASE("row distribution of the normalized adjacency is uniform") {
  std::mt19937_64 rng(27);
  auto g = testing::random_graph(rng, 6, 6, 0.5);
  auto a = normalize(g);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    auto p = row_distribution(a, u);
    for (double x : p) CHECK(x == doctest::Approx(1.0 / g.degree(u)).epsilon(1e-14));
  }
}

TEST_CASE("mean worst case KL") {
  std::mt19937_64 rng(28);
  auto g = testing::random_graph(rng, 6, 6, 0.5);
  auto a = normalize(g);
  auto e = testing::random_matrix(rng, g.num_nodes(), 3);
  CHECK(mean_worst_case_kl(a, e, std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(mean_worst_case_kl(a, e, 0.05) > mean_worst_case_kl(a, e, 0.5));
}

TEST_CASE("bound examples") {
  CHECK(bound_prefactor(1e12, 9.0) == doctest::Approx(1.0 + 1.0 / 3.0).epsilon(1e-9));

  BoundInputs in{1.0, 4.0, 0.05, 2.0};
  double e4 = std::exp(4.0);
  CHECK(bound_prefactor(1.0, 4.0) == doctest::Approx(6.0 * e4 / (3.0 + e4)).epsilon(1e-14));
  CHECK(generalization_bound(in) ==
        doctest::Approx(6.0 * e4 / (3.0 + e4) * std::sqrt(0.5 * std::log(40.0))).epsilon(1e-14));

  // ln(|Theta|/rho) -> 0 only in the limit rho -> 1 with a single hypothesis
  double prev = std::numeric_limits<double>::infinity();
  for (double gap = 1e-1; gap > 1e-13; gap /= 10.0) {
    double b = generalization_bound({1.0, 4.0, 1.0 - gap, 1.0});
    CHECK(b < prev);
    prev = b;
  }
  CHECK(prev < 1e-5);

  CHECK_THROWS_AS(generalization_bound({1.0, 4.0, 0.0, 2.0}), UsageError);
  CHECK_THROWS_AS(generalization_bound({1.0, 4.0, 1.0, 2.0}), UsageError);
  CHECK_THROWS_AS(generalization_bound({0.0, 4.0, 0.5, 2.0}), UsageError);
  CHECK_THROWS_AS(generalization_bound({1.0, 0.5, 0.5, 2.0}), UsageError);
}

TEST_CASE("bound against a 50 digit evaluation") {
  using big = boost::multiprecision::cpp_dec_float_50;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    BoundInputs in{std::exp(-3.0 + 6.0 * u(rng)), 1.0 + std::floor(200.0 * u(rng)),
                   0.001 + 0.998 * u(rng), 1.0 + std::floor(1000.0 * u(rng))};
    big d(in.degree), root = sqrt(d), x = exp(big(2) * root / big(in.alpha));
    big ref = (d + root) * x / (d - 1 + x) * sqrt(big(0.5) * log(big(in.hypothesis_count) / big(in.rho)));
    double got = generalization_bound(in);
    REQUIRE(std::abs(got - ref.convert_to<double>()) <= 1e-12 * std::abs(ref.convert_to<double>()));
  }
}
