#include "drgnn/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "drgnn/error.hpp"
#include "drgnn/model.hpp"

namespace drgnn {

void save_checkpoint(const std::string& prefix, const RunConfig& config, const TrainerState& state) {
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  save_embeddings(prefix + ".emb.txt", state.embeddings);
  save_embeddings(prefix + ".adam_m.txt", state.adam_m);
  save_embeddings(prefix + ".adam_v.txt", state.adam_v);
  if (state.has_snapshot) save_embeddings(prefix + ".refresh.txt", state.refresh_source);

  nlohmann::ordered_json j;
  j["config"] = config.to_json();
  j["epoch"] = state.epoch;
  j["adam_step"] = state.adam_step;
  j["rng_state"] = state.rng_state;
  j["has_snapshot"] = state.has_snapshot;
  j["overlay"] = state.overlay;
  std::ofstream out(prefix + ".json");
  if (!out) throw DataError("cannot write " + prefix + ".json");
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw DataError("cannot read " + prefix + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(prefix + ".json: " + e.what());
  }
  Checkpoint c;
  c.config = RunConfig::from_json(j.at("config"));
  c.state.epoch = j.value("epoch", std::size_t{0});
  c.state.adam_step = j.value("adam_step", std::uint64_t{0});
  c.state.rng_state = j.value("rng_state", std::string{});
  c.state.has_snapshot = j.value("has_snapshot", false);
  c.state.overlay = j.value("overlay", std::vector<std::int64_t>{});
  c.state.embeddings = load_embeddings(prefix + ".emb.txt");
  if (std::filesystem::exists(prefix + ".adam_m.txt")) c.state.adam_m = load_embeddings(prefix + ".adam_m.txt");
  if (std::filesystem::exists(prefix + ".adam_v.txt")) c.state.adam_v = load_embeddings(prefix + ".adam_v.txt");
  if (c.state.has_snapshot) c.state.refresh_source = load_embeddings(prefix + ".refresh.txt");
  return c;
}

TrainingLog::TrainingLog(const std::string& path, bool append) : path_(path) {
  if (append && std::filesystem::exists(path)) return;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,loss,val_ndcg\n";
}

void TrainingLog::write(const EpochRecord& record) {
  std::ofstream out(path_, std::ios::app);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << record.epoch << ',' << record.loss << ',';
  if (record.val_ndcg) out << *record.val_ndcg;
  out << '\n';
}

}  // namespace drgnn
