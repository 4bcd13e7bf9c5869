#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drgnn/data.hpp"
#include "drgnn/error.hpp"

namespace drgnn {

namespace {

std::vector<double> unit_gaussian_rows(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      out[r * dim + c] = normal(rng);
      norm += out[r * dim + c] * out[r * dim + c];
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < dim; ++c) out[r * dim + c] /= norm;
  }
  return out;
}

}  // namespace

Dataset generate_zipf_dataset(const SyntheticConfig& cfg) {
  if (cfg.num_users == 0 || cfg.num_items == 0 || cfg.latent_dim == 0) {
    throw UsageError("synthetic data needs users, items and a latent dimension");
  }
  if (cfg.interactions_per_user == 0 || cfg.interactions_per_user > cfg.num_items) {
    throw UsageError("interactions_per_user must lie in [1, num_items]");
  }
  std::mt19937_64 rng(cfg.seed);
  const std::size_t dim = cfg.latent_dim;
  const auto users = unit_gaussian_rows(cfg.num_users, dim, rng);
  const auto items = unit_gaussian_rows(cfg.num_items, dim, rng);

  std::vector<std::size_t> rank(cfg.num_items);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> log_pop(cfg.num_items);
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    log_pop[i] = -cfg.zipf_exponent * std::log(static_cast<double>(rank[i] + 1));
  }

  Dataset d;
  d.ids = IdMap::dense(cfg.num_users, cfg.num_items);
  const std::size_t lo = std::max<std::size_t>(1, cfg.interactions_per_user / 2);
  const std::size_t hi = std::min(cfg.num_items, cfg.interactions_per_user + cfg.interactions_per_user / 2);
  std::uniform_int_distribution<std::size_t> count(lo, hi);
  std::extreme_value_distribution<double> gumbel(0.0, 1.0);
  std::vector<std::pair<double, std::uint32_t>> keys(cfg.num_items);
  std::int64_t clock = 0;
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    // Gumbel top-k draws k items without replacement with probability
    // proportional to exp(log weight).
    for (std::size_t i = 0; i < cfg.num_items; ++i) {
      double affinity = 0.0;
      for (std::size_t c = 0; c < dim; ++c) affinity += users[u * dim + c] * items[i * dim + c];
      const double log_weight = log_pop[i] + cfg.preference_temperature * affinity;
      keys[i] = {log_weight + gumbel(rng), static_cast<std::uint32_t>(i)};
    }
    const std::size_t k = count(rng);
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::uint32_t> picked;
    for (std::size_t j = 0; j < k; ++j) picked.push_back(keys[j].second);
    std::shuffle(picked.begin(), picked.end(), rng);
    for (std::uint32_t item : picked) {
      d.interactions.push_back({static_cast<std::uint32_t>(u), item, clock++});
    }
  }
  return d;
}

}  // namespace drgnn
