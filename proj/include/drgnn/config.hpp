#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "drgnn/data.hpp"
#include "drgnn/dro.hpp"
#include "drgnn/gea.hpp"
#include "drgnn/trainer.hpp"
#include "json.hpp"

namespace drgnn {

struct DataConfig {
  std::string split;  // prefix of <split>.train.tsv etc.
  SplitMode mode = SplitMode::popularity;
  std::size_t quota = 3;
  std::uint64_t seed = 7;
  std::size_t min_count = 0;
};

/// Fully resolved run configuration. JSON layout:
/// {"data":{...},"model":{...},"dro":{...},"gea":{...},"train":{...},"eval":{...}}
/// Unknown sections or keys are rejected.
struct RunConfig {
  DataConfig data;
  TrainConfig train;
  DroConfig dro;
  GeaConfig gea;

  /// Throws UsageError on unknown keys, wrong types or invalid values.
  static RunConfig from_json(const nlohmann::json& j);
  /// Overlays the keys present in `j` onto this config.
  void merge(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  void validate() const;
};

RunConfig load_run_config(const std::string& path);

/// Accepts a number or "inf"/"infinity".
double parse_alpha(const std::string& text);

}  // namespace drgnn
