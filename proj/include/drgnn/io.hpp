#pragma once

#include <iosfwd>
#include <string>

#include "drgnn/config.hpp"
#include "drgnn/trainer.hpp"

namespace drgnn {

struct Checkpoint {
  RunConfig config;
  TrainerState state;
};

/// Writes <prefix>.emb.txt (embedding dump) and a <prefix>.json sidecar with
/// the config and epoch. Optimizer moments and the robust-weight source go
/// to <prefix>.adam_m.txt, .adam_v.txt and .refresh.txt.
void save_checkpoint(const std::string& prefix, const RunConfig& config, const TrainerState& state);
Checkpoint load_checkpoint(const std::string& prefix);

/// CSV log with header `epoch,loss,val_ndcg`; val_ndcg is empty when no
/// validation set exists.
class TrainingLog {
 public:
  explicit TrainingLog(const std::string& path, bool append = false);
  void write(const EpochRecord& record);

 private:
  std::string path_;
};

}  // namespace drgnn
