#include "drgnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "drgnn/error.hpp"
#include "json.hpp"

namespace drgnn {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
    fields.back().pop_back();
  }
  return fields;
}

std::string location(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

bool skip_line(const std::string& line) {
  return line.empty() || line == "\r" || line.front() == '#';
}

template <typename Number>
Number parse_number(const std::string& text, const std::string& what, const std::string& where) {
  std::istringstream in(text);
  Number value{};
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw DataError(where + ": malformed " + what + " '" + text + "'");
  }
  return value;
}

// Keeps the first occurrence of each (user, item) pair.
std::vector<Interaction> dedupe(std::span<const Interaction> interactions) {
  std::set<UserItem> seen;
  std::vector<Interaction> out;
  out.reserve(interactions.size());
  for (const auto& x : interactions) {
    if (seen.insert(x.pair()).second) out.push_back(x);
  }
  return out;
}

std::vector<std::vector<std::size_t>> group_by_user(std::span<const Interaction> xs,
                                                    std::size_t num_users) {
  std::vector<std::vector<std::size_t>> groups(num_users);
  for (std::size_t i = 0; i < xs.size(); ++i) groups[xs[i].user].push_back(i);
  return groups;
}

}  // namespace

// -- IdMap ------------------------------------------------------------------

std::uint32_t IdMap::user(const std::string& raw) {
  auto [it, inserted] = user_index_.try_emplace(raw, static_cast<std::uint32_t>(users_.size()));
  if (inserted) users_.push_back(raw);
  return it->second;
}

std::uint32_t IdMap::item(const std::string& raw) {
  auto [it, inserted] = item_index_.try_emplace(raw, static_cast<std::uint32_t>(items_.size()));
  if (inserted) items_.push_back(raw);
  return it->second;
}

std::optional<std::uint32_t> IdMap::find_user(const std::string& raw) const {
  auto it = user_index_.find(raw);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> IdMap::find_item(const std::string& raw) const {
  auto it = item_index_.find(raw);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

IdMap IdMap::dense(std::size_t num_users, std::size_t num_items) {
  IdMap ids;
  for (std::size_t u = 0; u < num_users; ++u) ids.user("u" + std::to_string(u));
  for (std::size_t i = 0; i < num_items; ++i) ids.item("i" + std::to_string(i));
  return ids;
}

void IdMap::write(std::ostream& out) const {
  for (std::size_t u = 0; u < users_.size(); ++u) out << users_[u] << '\t' << u << "\tuser\n";
  for (std::size_t i = 0; i < items_.size(); ++i) out << items_[i] << '\t' << i << "\titem\n";
}

IdMap IdMap::read(std::istream& in) {
  IdMap ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    const std::string where = location("idmap.tsv", line_no);
    if (f.size() != 3) throw DataError(where + ": expected raw_id, dense_id, role");
    const auto dense = parse_number<std::uint32_t>(f[1], "dense id", where);
    std::uint32_t got = 0;
    if (f[2] == "user") {
      got = ids.user(f[0]);
    } else if (f[2] == "item") {
      got = ids.item(f[0]);
    } else {
      throw DataError(where + ": unknown role '" + f[2] + "'");
    }
    if (got != dense) throw DataError(where + ": dense ids must be listed in order");
  }
  return ids;
}

// -- IO ---------------------------------------------------------------------

bool Dataset::has_timestamps() const {
  return std::all_of(interactions.begin(), interactions.end(),
                     [](const Interaction& x) { return x.timestamp.has_value(); });
}

std::vector<Interaction> read_interactions(std::istream& in, IdMap& ids,
                                           const std::string& source) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    const std::string where = location(source, line_no);
    if (f.size() < 2 || f.size() > 3 || f[0].empty() || f[1].empty()) {
      throw DataError(where + ": expected user<TAB>item[<TAB>timestamp]");
    }
    Interaction x;
    x.user = ids.user(f[0]);
    x.item = ids.item(f[1]);
    if (f.size() == 3 && !f[2].empty()) x.timestamp = parse_number<std::int64_t>(f[2], "timestamp", where);
    out.push_back(x);
  }
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  Dataset d;
  d.interactions = read_interactions(in, d.ids, path);
  return d;
}

void write_interactions(std::ostream& out, std::span<const Interaction> interactions,
                        const IdMap& ids) {
  for (const auto& x : interactions) {
    out << ids.raw_user(x.user) << '\t' << ids.raw_item(x.item);
    if (x.timestamp) out << '\t' << *x.timestamp;
    out << '\n';
  }
}

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::popularity: return "popularity";
    case SplitMode::temporal: return "temporal";
    case SplitMode::exposure: return "exposure";
  }
  return "unknown";
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "popularity") return SplitMode::popularity;
  if (name == "temporal") return SplitMode::temporal;
  if (name == "exposure") return SplitMode::exposure;
  throw UsageError("unknown split mode '" + name + "'");
}

InteractionGraph SplitBundle::train_graph() const {
  const auto pairs = pairs_of(train);
  return build_graph(pairs, num_users(), num_items());
}

std::vector<UserItem> pairs_of(std::span<const Interaction> interactions) {
  std::vector<UserItem> pairs;
  pairs.reserve(interactions.size());
  for (const auto& x : interactions) pairs.push_back(x.pair());
  return pairs;
}

std::vector<Interaction> filter_min_count(std::span<const Interaction> interactions,
                                          std::size_t min_count) {
  if (min_count <= 1) return {interactions.begin(), interactions.end()};
  std::map<std::uint32_t, std::size_t> users;
  std::map<std::uint32_t, std::size_t> items;
  for (const auto& x : interactions) {
    ++users[x.user];
    ++items[x.item];
  }
  std::vector<Interaction> out;
  for (const auto& x : interactions) {
    if (users[x.user] >= min_count && items[x.item] >= min_count) out.push_back(x);
  }
  return out;
}

// -- Splits -----------------------------------------------------------------

SplitBundle split_popularity(const Dataset& data, std::size_t quota, std::uint64_t seed) {
  if (quota == 0) throw UsageError("popularity split: quota must be >= 1");
  const auto xs = dedupe(data.interactions);

  std::vector<std::vector<std::size_t>> by_item(data.num_items());
  for (std::size_t i = 0; i < xs.size(); ++i) by_item[xs[i].item].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<char> to_test(xs.size(), 0);
  for (auto& members : by_item) {
    const std::size_t take = std::min(quota, members.size());
    // partial Fisher-Yates: the first `take` slots become a uniform sample
    for (std::size_t j = 0; j < take; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, members.size() - 1);
      std::swap(members[j], members[pick(rng)]);
      to_test[members[j]] = 1;
    }
  }

  SplitBundle b;
  b.ids = data.ids;
  b.meta = {SplitMode::popularity, quota, seed, 0};
  std::vector<char> user_in_train(data.num_users(), 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!to_test[i]) {
      b.train.push_back(xs[i]);
      user_in_train[xs[i].user] = 1;
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (to_test[i] && user_in_train[xs[i].user]) b.test.push_back(xs[i]);
  }
  if (b.train.empty() || b.test.empty()) throw DataError("popularity split produced an empty set");
  return b;
}

SplitBundle split_temporal(const Dataset& data) {
  if (!data.has_timestamps()) throw DataError("temporal split requires a timestamp on every row");
  // Earliest occurrence of a repeated pair wins.
  std::vector<std::size_t> order(data.interactions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *data.interactions[a].timestamp < *data.interactions[b].timestamp;
  });
  std::vector<Interaction> chronological;
  chronological.reserve(order.size());
  for (std::size_t i : order) chronological.push_back(data.interactions[i]);
  const auto xs = dedupe(chronological);

  SplitBundle b;
  b.ids = data.ids;
  b.meta = {SplitMode::temporal, 0, 0, 0};
  for (const auto& members : group_by_user(xs, data.num_users())) {
    const std::size_t n = members.size();
    if (n == 0) continue;
    std::size_t n_train = (6 * n) / 10;
    std::size_t n_test = (2 * n + 9) / 10;
    if (n_train == 0) n_train = 1;
    n_test = std::min(n_test, n - n_train);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& x = xs[members[j]];
      if (j < n_train) {
        b.train.push_back(x);
      } else if (j >= n - n_test) {
        b.test.push_back(x);
      } else {
        b.validation.push_back(x);
      }
    }
  }
  if (b.train.empty()) throw DataError("temporal split produced an empty training set");
  return b;
}

namespace {

std::vector<Interaction> read_rated(std::istream& in, IdMap& ids, const std::string& source) {
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    const std::string where = location(source, line_no);
    if (f.size() != 3 || f[0].empty() || f[1].empty()) {
      throw DataError(where + ": expected user<TAB>item<TAB>rating");
    }
    const auto rating = parse_number<double>(f[2], "rating", where);
    if (rating > 3.0) out.push_back({ids.user(f[0]), ids.item(f[1]), std::nullopt});
  }
  return out;
}

}  // namespace

SplitBundle load_exposure_pair(std::istream& train, std::istream& test) {
  SplitBundle b;
  b.meta = {SplitMode::exposure, 0, 0, 0};
  b.train = dedupe(read_rated(train, b.ids, "train"));
  auto test_rows = dedupe(read_rated(test, b.ids, "test"));
  if (b.train.empty()) throw DataError("exposure split: no training rating above 3");
  std::vector<char> user_in_train(b.ids.num_users(), 0);
  for (const auto& x : b.train) user_in_train[x.user] = 1;
  std::set<UserItem> train_pairs;
  for (const auto& x : b.train) train_pairs.insert(x.pair());
  for (const auto& x : test_rows) {
    if (user_in_train[x.user] && !train_pairs.contains(x.pair())) b.test.push_back(x);
  }
  if (b.test.empty()) throw DataError("exposure split: no test rating above 3");
  return b;
}

SplitBundle load_exposure_pair(const std::string& train_path, const std::string& test_path) {
  std::ifstream train(train_path);
  if (!train) throw DataError("cannot read " + train_path);
  std::ifstream test(test_path);
  if (!test) throw DataError("cannot read " + test_path);
  return load_exposure_pair(train, test);
}

// -- Shift diagnostics ------------------------------------------------------

double shift_kl(std::span<const Interaction> train, std::span<const Interaction> test) {
  if (train.empty() || test.empty()) throw DataError("shift_kl needs non-empty train and test");
  constexpr double kSmoothing = 1e-9;
  std::map<std::uint32_t, std::pair<double, double>> counts;  // item -> (train, test)
  for (const auto& x : train) counts[x.item].first += 1.0;
  for (const auto& x : test) counts[x.item].second += 1.0;
  double train_total = 0.0;
  double test_total = 0.0;
  for (auto& [item, c] : counts) {
    if (c.first == 0.0) c.first = kSmoothing;
    if (c.second == 0.0) c.second = kSmoothing;
    train_total += c.first;
    test_total += c.second;
  }
  double kl = 0.0;
  for (const auto& [item, c] : counts) {
    const double p = c.second / test_total;
    const double q = c.first / train_total;
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

double kl_to_uniform(std::span<const Interaction> interactions, std::size_t num_items) {
  if (interactions.empty() || num_items == 0) return 0.0;
  std::vector<double> counts(num_items, 0.0);
  for (const auto& x : interactions) counts.at(x.item) += 1.0;
  const double total = static_cast<double>(interactions.size());
  const double uniform = 1.0 / static_cast<double>(num_items);
  double kl = 0.0;
  for (double c : counts) {
    if (c > 0.0) kl += (c / total) * std::log((c / total) / uniform);
  }
  return kl;
}

// -- Split files ------------------------------------------------------------

void write_split(const SplitBundle& bundle, const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path base(prefix);
  if (base.has_parent_path()) fs::create_directories(base.parent_path());
  auto write_part = [&](const std::string& suffix, const std::vector<Interaction>& part) {
    std::ofstream out(prefix + suffix);
    if (!out) throw DataError("cannot write " + prefix + suffix);
    write_interactions(out, part, bundle.ids);
  };
  write_part(".train.tsv", bundle.train);
  write_part(".valid.tsv", bundle.validation);
  write_part(".test.tsv", bundle.test);

  const fs::path idmap = base.has_parent_path() ? base.parent_path() / "idmap.tsv" : fs::path("idmap.tsv");
  std::ofstream ids(idmap);
  if (!ids) throw DataError("cannot write " + idmap.string());
  bundle.ids.write(ids);

  nlohmann::ordered_json meta;
  meta["mode"] = to_string(bundle.meta.mode);
  meta["quota"] = bundle.meta.quota;
  meta["seed"] = bundle.meta.seed;
  meta["min_count"] = bundle.meta.min_count;
  meta["users"] = bundle.num_users();
  meta["items"] = bundle.num_items();
  meta["train"] = bundle.train.size();
  meta["validation"] = bundle.validation.size();
  meta["test"] = bundle.test.size();
  std::ofstream out(prefix + ".split.json");
  if (!out) throw DataError("cannot write " + prefix + ".split.json");
  out << meta.dump(2) << '\n';
}

SplitBundle read_split(const std::string& prefix) {
  namespace fs = std::filesystem;
  const fs::path base(prefix);
  const fs::path idmap = base.has_parent_path() ? base.parent_path() / "idmap.tsv" : fs::path("idmap.tsv");
  SplitBundle b;
  if (fs::exists(idmap)) {
    std::ifstream in(idmap);
    b.ids = IdMap::read(in);
  }
  auto read_part = [&](const std::string& suffix, bool required) {
    std::ifstream in(prefix + suffix);
    if (!in) {
      if (required) throw DataError("cannot read " + prefix + suffix);
      return std::vector<Interaction>{};
    }
    return read_interactions(in, b.ids, prefix + suffix);
  };
  b.train = read_part(".train.tsv", true);
  b.validation = read_part(".valid.tsv", false);
  b.test = read_part(".test.tsv", false);
  std::ifstream meta_in(prefix + ".split.json");
  if (meta_in) {
    const auto meta = nlohmann::json::parse(meta_in, nullptr, false);
    if (!meta.is_discarded()) {
      b.meta.mode = parse_split_mode(meta.value("mode", std::string("popularity")));
      b.meta.quota = meta.value("quota", std::size_t{0});
      b.meta.seed = meta.value("seed", std::uint64_t{0});
      b.meta.min_count = meta.value("min_count", std::size_t{0});
    }
  }
  if (b.train.empty()) throw DataError(prefix + ".train.tsv holds no interactions");
  return b;
}

}  // namespace drgnn
