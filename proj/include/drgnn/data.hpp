#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "drgnn/graph.hpp"

namespace drgnn {

/// One interaction in dense per-side indices.
struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::optional<std::int64_t> timestamp;

  UserItem pair() const { return {user, item}; }
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Bidirectional mapping between raw string ids and dense indices, one
/// namespace per side.
class IdMap {
 public:
  std::uint32_t user(const std::string& raw);  // inserts when absent
  std::uint32_t item(const std::string& raw);
  std::optional<std::uint32_t> find_user(const std::string& raw) const;
  std::optional<std::uint32_t> find_item(const std::string& raw) const;
  const std::string& raw_user(std::uint32_t dense) const { return users_.at(dense); }
  const std::string& raw_item(std::uint32_t dense) const { return items_.at(dense); }
  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }

  /// Synthetic ids "u<k>" / "i<k>" for data generated in dense form.
  static IdMap dense(std::size_t num_users, std::size_t num_items);

  /// Lines `raw_id<TAB>dense_id<TAB>role` with role user|item.
  void write(std::ostream& out) const;
  static IdMap read(std::istream& in);

 private:
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::uint32_t> user_index_;
  std::unordered_map<std::string, std::uint32_t> item_index_;
};

struct Dataset {
  IdMap ids;
  std::vector<Interaction> interactions;

  std::size_t num_users() const { return ids.num_users(); }
  std::size_t num_items() const { return ids.num_items(); }
  bool has_timestamps() const;
};

/// Parses `user<TAB>item[<TAB>timestamp]` lines into `ids` (shared across
/// files). Blank lines and lines starting with '#' are skipped. Throws
/// DataError with the line number on malformed rows.
std::vector<Interaction> read_interactions(std::istream& in, IdMap& ids,
                                           const std::string& source = "<stream>");
Dataset load_dataset(const std::string& path);

/// Writes interactions with raw ids, including timestamps when present.
void write_interactions(std::ostream& out, std::span<const Interaction> interactions,
                        const IdMap& ids);

enum class SplitMode { popularity, temporal, exposure };
std::string to_string(SplitMode mode);
SplitMode parse_split_mode(const std::string& name);

struct SplitMetadata {
  SplitMode mode = SplitMode::popularity;
  std::size_t quota = 0;
  std::uint64_t seed = 0;
  std::size_t min_count = 0;
};

struct SplitBundle {
  IdMap ids;
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  SplitMetadata meta;

  std::size_t num_users() const { return ids.num_users(); }
  std::size_t num_items() const { return ids.num_items(); }
  InteractionGraph train_graph() const;
};

std::vector<UserItem> pairs_of(std::span<const Interaction> interactions);

/// Drops users and items with fewer than `min_count` interactions (single
/// pass). min_count 0 or 1 keeps everything.
std::vector<Interaction> filter_min_count(std::span<const Interaction> interactions,
                                          std::size_t min_count);

/// Per item, moves min(count, quota) uniformly sampled interactions to the
/// test set; the rest stay in train. Test interactions of users absent from
/// train are dropped. Throws UsageError for quota 0, DataError when train or
/// test ends up empty.
SplitBundle split_popularity(const Dataset& data, std::size_t quota, std::uint64_t seed);

/// Per user, stable-sorted by timestamp: first floor(0.6 n) to train (at
/// least one), last ceil(0.2 n) to test, the middle to validation. Throws
/// DataError when any timestamp is missing.
SplitBundle split_temporal(const Dataset& data);

/// Reads biased training ratings and randomly exposed test ratings
/// (`user<TAB>item<TAB>rating`), keeping ratings > 3 as positives. Test
/// interactions of users without training positives are dropped.
SplitBundle load_exposure_pair(std::istream& train, std::istream& test);
SplitBundle load_exposure_pair(const std::string& train_path, const std::string& test_path);

/// KL(test || train) over item frequencies on the union support; zero counts
/// are smoothed by 1e-9 before renormalizing. Throws DataError when either
/// side is empty.
double shift_kl(std::span<const Interaction> train, std::span<const Interaction> test);

/// KL(item frequency || uniform over `num_items`); popularity skew measure.
double kl_to_uniform(std::span<const Interaction> interactions, std::size_t num_items);

/// Writes <prefix>.train.tsv, .valid.tsv, .test.tsv, .split.json and
/// idmap.tsv next to them.
void write_split(const SplitBundle& bundle, const std::string& prefix);
/// Reads the files written by write_split.
SplitBundle read_split(const std::string& prefix);

// -- Synthetic data ---------------------------------------------------------

struct SyntheticConfig {
  std::size_t num_users = 2000;
  std::size_t num_items = 1000;
  double zipf_exponent = 1.2;
  std::size_t interactions_per_user = 25;
  std::size_t latent_dim = 8;
  /// Sharpness of latent preference in the sampling weight.
  double preference_temperature = 2.0;
  std::uint64_t seed = 1;
};

/// Users pick items with probability proportional to
/// zipf_weight(item) * exp(temperature * <x_u, y_i>), without replacement.
/// Item popularity ranks are a random permutation of item ids.
Dataset generate_zipf_dataset(const SyntheticConfig& config);

}  // namespace drgnn
