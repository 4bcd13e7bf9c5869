#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "doctest.h"
#include "drgnn/error.hpp"
#include "drgnn/io.hpp"
#include "drgnn/oracle.hpp"
#include "drgnn/trainer.hpp"
#include "support.hpp"

using namespace drgnn;

namespace {

InteractionGraph toy_graph() {
  std::vector<UserItem> pairs{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 2}, {3, 3}, {3, 1}};
  return build_graph(pairs, 4, 4);
}

TrainConfig small_config() {
  TrainConfig c;
  c.dim = 4;
  c.layers = 2;
  c.batch_size = 4;
  c.epochs = 5;
  c.seed = 17;
  c.l2_lambda = 1e-3;
  c.init_std = 0.5;
  return c;
}

double norm(const Matrix& m) { return std::sqrt(squared_norm(m.values())); }

void check_gradient(const Trainer& t) {
  std::vector<TrainingTriple> batch{{0, 0, 2}, {1, 2, 3}, {2, 3, 1}, {3, 1, 0}, {0, 1, 3}};
  auto analytic = t.batch_gradient(batch);
  CHECK(analytic.loss == doctest::Approx(t.batch_objective(batch, t.embeddings())).epsilon(1e-14));
  auto fd = oracle::finite_difference_gradient(
      [&](const Matrix& x) { return t.batch_objective(batch, x); }, t.embeddings(), 1e-5);
  double scale = std::max(norm(fd), 1e-12);
  CHECK(norm([&] {
          Matrix d = fd;
          Matrix neg = analytic.grad;
          neg *= -1.0;
          d += neg;
          return d;
        }()) / scale < 1e-4);
  for (std::size_t k = 0; k < fd.size(); ++k)
    REQUIRE(std::abs(fd.values()[k] - analytic.grad.values()[k]) <=
            1e-4 * std::max(std::abs(fd.values()[k]), 1e-3));
}

}  // namespace

TEST_CASE("bpr loss values") {
  CHECK(bpr_loss(0.3, 0.3) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bpr_loss(1.0, 0.0) == doctest::Approx(0.3133).epsilon(1e-4));
  CHECK(bpr_loss(1.0, 0.0) == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-15));
  CHECK(bpr_loss(800.0, 0.0) == 0.0);
  CHECK(std::isfinite(bpr_loss(0.0, 800.0)));
  CHECK(bpr_loss(0.0, 800.0) == doctest::Approx(800.0));
}

TEST_CASE("negative sampling") {
  std::vector<UserItem> pairs;
  for (std::uint32_t i = 0; i < 9; ++i) pairs.push_back({0, i});
  for (std::uint32_t i = 0; i < 5; ++i) pairs.push_back({1, i});
  pairs.push_back({2, 0});
  auto g = build_graph(pairs, 3, 20);

  std::mt19937_64 rng(3);
  std::vector<std::uint32_t> users(1000, 0);
  // user 0 misses items 9..19; restrict to one missing item
  std::vector<UserItem> almost;
  for (std::uint32_t i = 0; i < 19; ++i) almost.push_back({0, i});
  auto g2 = build_graph(almost, 1, 20);
  for (auto n : sample_negatives(g2, users, rng)) CHECK(*n == 19);

  std::vector<UserItem> full;
  for (std::uint32_t i = 0; i < 3; ++i) full.push_back({0, i});
  auto g3 = build_graph(full, 1, 3);
  std::vector<std::uint32_t> one{0};
  CHECK_FALSE(sample_negatives(g3, one, rng)[0].has_value());

  // uniform over the complement: chi-square with 14 degrees of freedom
  std::vector<std::uint32_t> many(100000, 1);
  auto draws = sample_negatives(g, many, rng);
  std::map<std::uint32_t, double> counts;
  for (auto d : draws) {
    REQUIRE(d.has_value());
    REQUIRE(*d >= 5);
    counts[*d] += 1.0;
  }
  REQUIRE(counts.size() == 15);
  double expected = 100000.0 / 15.0, chi2 = 0.0;
  for (auto& [item, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 36.1);  // upper 0.1% point

  std::mt19937_64 a(9), b(9);
  CHECK(sample_negatives(g, many, a) == sample_negatives(g, many, b));
}

TEST_CASE("batch gradient matches finite differences") {
  auto cfg = small_config();
  SUBCASE("symmetric adjacency") {
    auto t = Trainer::lightgcn(toy_graph(), cfg);
    CHECK(t.snapshot().symmetric());
    check_gradient(t);
  }
  SUBCASE("reweighted adjacency") {
    DroConfig dro;
    dro.alpha = 0.1;
    GeaConfig gea{true, 0.6, 8, 0};
    Trainer t(toy_graph(), cfg, dro, gea);
    t.refresh();
    CHECK_FALSE(t.snapshot().symmetric());
    check_gradient(t);
  }
  SUBCASE("last layer combine") {
    cfg.combine = LayerCombine::last;
    DroConfig dro;
    dro.alpha = 0.5;
    Trainer t(toy_graph(), cfg, dro, GeaConfig{});
    t.refresh();
    check_gradient(t);
  }
}

TEST_CASE("property: a small gradient step decreases the batch objective") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testing::random_graph(rng, 6, 6, 0.4);
    auto cfg = small_config();
    cfg.seed = rng();
    DroConfig dro;
    dro.alpha = 0.3;
    Trainer t(g, cfg, dro, GeaConfig{});
    t.refresh();
    auto triples = t.sample_epoch_triples();
    if (triples.empty()) continue;
    auto step = t.batch_gradient(triples);
    Matrix moved = step.grad;
    moved *= -1e-4;
    moved += t.embeddings();
    REQUIRE(t.batch_objective(triples, moved) < step.loss);
  }
}

TEST_CASE("large regularization shrinks embeddings") {
  auto cfg = small_config();
  cfg.optimizer = OptimizerKind::sgd;
  cfg.l2_lambda = 5.0;
  cfg.learning_rate = 0.02;
  auto t = Trainer::lightgcn(toy_graph(), cfg);
  double prev = norm(t.embeddings());
  for (int e = 0; e < 10; ++e) {
    t.train_epoch();
    double now = norm(t.embeddings());
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("infinite alpha without edge addition is the baseline") {
  std::mt19937_64 rng(52);
  auto g = testing::random_graph(rng, 8, 8, 0.4);
  auto cfg = small_config();
  Trainer robust(g, cfg, DroConfig{}, GeaConfig{});
  auto base = Trainer::lightgcn(g, cfg);
  for (int e = 0; e < 5; ++e) CHECK(robust.train_epoch() == base.train_epoch());
  CHECK(robust.embeddings() == base.embeddings());
  CHECK(robust.final_embeddings() == base.final_embeddings());
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(53);
  auto g = testing::random_graph(rng, 8, 8, 0.4);
  auto cfg = small_config();
  DroConfig dro;
  dro.alpha = 0.2;
  GeaConfig gea{true, 0.8, 4, 2};
  Trainer a(g, cfg, dro, gea), b(g, cfg, dro, gea);
  for (int e = 0; e < 4; ++e) CHECK(a.train_epoch() == b.train_epoch());
  CHECK(a.embeddings() == b.embeddings());
  CHECK(a.overlay().added == b.overlay().added);
}

TEST_CASE("resume reproduces the next epoch") {
  std::mt19937_64 rng(54);
  auto g = testing::random_graph(rng, 8, 8, 0.4);
  RunConfig rc;
  rc.train = small_config();
  rc.dro.alpha = 0.3;
  rc.dro.refresh_period = 2;
  rc.gea = GeaConfig{true, 0.8, 4, 3};
  Trainer a(g, rc.train, rc.dro, rc.gea);
  for (int e = 0; e < 3; ++e) a.train_epoch();

  auto dir = std::filesystem::temp_directory_path() / "drgnn_resume_test";
  std::filesystem::create_directories(dir);
  save_checkpoint((dir / "ck").string(), rc, a.state());
  auto ck = load_checkpoint((dir / "ck").string());

  Trainer b(g, ck.config.train, ck.config.dro, ck.config.gea);
  b.restore(ck.state);
  for (int e = 0; e < 3; ++e) CHECK(a.train_epoch() == b.train_epoch());
  CHECK(a.embeddings() == b.embeddings());
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite loss aborts") {
  auto cfg = small_config();
  auto t = Trainer::lightgcn(toy_graph(), cfg);
  Matrix e = t.embeddings();
  e(0, 0) = std::nan("");
  t.set_embeddings(e);
  CHECK_THROWS_AS(t.train_epoch(), NumericError);
}

TEST_CASE("fit stops early without improvement") {
  auto cfg = small_config();
  cfg.epochs = 50;
  cfg.patience = 2;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e-15;
  auto t = Trainer::lightgcn(toy_graph(), cfg);
  std::vector<UserItem> held{{0, 2}, {1, 0}};
  auto r = fit(t, held);
  CHECK(r.stopped_early);
  CHECK(r.history.size() == 3);
  CHECK(r.best_epoch == 1);
}
