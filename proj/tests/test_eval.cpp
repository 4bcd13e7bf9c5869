#include <cmath>

#include "doctest.h"
#include "drgnn/error.hpp"
#include "drgnn/eval.hpp"

using namespace drgnn;

namespace {
using Ids = std::vector<std::uint32_t>;
}

TEST_CASE("ranking") {
  std::vector<UserItem> pairs{{0, 2}};
  auto g = build_graph(pairs, 1, 3);
  Matrix f(4, 1);
  f(0, 0) = 1.0;
  f(1, 0) = 0.1;
  f(2, 0) = 0.9;
  f(3, 0) = 0.5;
  CHECK(rank_items(f, g, 0, {}) == Ids{1, 2, 0});
  Ids mask{1};
  CHECK(rank_items(f, g, 0, mask) == Ids{2, 0});
  CHECK(rank_items(f, g, 0, {}, 1) == Ids{1});
  f(2, 0) = 0.1;
  f(3, 0) = 0.1;
  CHECK(rank_items(f, g, 0, {}) == Ids{0, 1, 2});
}

TEST_CASE("metrics examples") {
  Ids ranked{3, 1, 4, 7};
  Ids rel{3, 1};
  auto m = *metrics_at_k(ranked, rel, 2);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.ndcg == 1.0);

  Ids none{9};
  auto z = *metrics_at_k(ranked, none, 3);
  CHECK(z.precision == 0.0);
  CHECK(z.recall == 0.0);
  CHECK(z.ndcg == 0.0);

  Ids two{5, 8};
  Ids one{8};
  auto h = *metrics_at_k(two, one, 2);
  CHECK(h.precision == 0.5);
  CHECK(h.recall == 1.0);
  CHECK(h.ndcg == doctest::Approx(0.6309).epsilon(1e-4));
  CHECK(h.ndcg == 1.0 / std::log2(3.0));

  CHECK_FALSE(metrics_at_k(ranked, {}, 3).has_value());
  CHECK_THROWS_AS(metrics_at_k(ranked, rel, 0), UsageError);
}

TEST_CASE("property: items past k never matter") {
  Ids ranked{4, 2, 9};
  Ids rel{2, 11};
  auto a = *metrics_at_k(ranked, rel, 3);
  Ids longer{4, 2, 9, 11, 30};
  auto b = *metrics_at_k(longer, rel, 3);
  CHECK(a.ndcg == b.ndcg);
  CHECK(a.precision == b.precision);
  CHECK(a.recall == b.recall);

  for (std::uint32_t n = 1; n < 8; ++n) {
    Ids ideal;
    for (std::uint32_t i = 0; i < n; ++i) ideal.push_back(i);
    for (std::size_t k = 1; k < 10; ++k) CHECK(metrics_at_k(ideal, ideal, k)->ndcg == 1.0);
  }
}

TEST_CASE("evaluate averages over users with held-out items") {
  // two users, three items; user 0 trained on item 0
  std::vector<UserItem> pairs{{0, 0}, {1, 1}};
  auto g = build_graph(pairs, 2, 3);
  Matrix f(5, 1);
  f(0, 0) = 1.0;
  f(1, 0) = 1.0;
  f(2, 0) = 3.0;  // item 0, masked for user 0
  f(3, 0) = 2.0;
  f(4, 0) = 1.0;
  std::vector<UserItem> held{{0, 2}, {1, 2}};
  auto r = evaluate(f, g, held, 1, true);
  CHECK(r.num_evaluated_users == 2);
  // user 0 ranks [1, 2]: miss at k=1; user 1 ranks [0, 2]: miss too
  CHECK(r.ndcg == 0.0);
  auto r2 = evaluate(f, g, held, 2, true);
  REQUIRE(r2.per_user.size() == 2);
  double u0 = r2.per_user[0].metrics.ndcg, u1 = r2.per_user[1].metrics.ndcg;
  CHECK(r2.ndcg == doctest::Approx((u0 + u1) / 2.0).epsilon(1e-15));
  CHECK(r2.to_json().find("\"ndcg\"") != std::string::npos);
}
