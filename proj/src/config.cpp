#include "drgnn/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "drgnn/error.hpp"

namespace drgnn {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& section, const std::set<std::string>& known) {
  if (!obj.is_object()) throw UsageError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw UsageError("config: unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config: '" + section + "." + key + "' has the wrong type");
  }
}

double read_alpha(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) return parse_alpha(value.get<std::string>());
  throw UsageError("config: 'dro.alpha' must be a number or \"inf\"");
}

}  // namespace

double parse_alpha(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw UsageError("bad alpha '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw UsageError("bad alpha '" + text + "'");
  }
}

void RunConfig::merge(const json& j) {
  reject_unknown(j, "<root>", {"data", "model", "dro", "gea", "train", "eval"});
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d, "data", {"split", "mode", "quota", "seed", "min_count"});
    read(d, "split", data.split, "data");
    if (d.contains("mode")) {
      std::string mode;
      read(d, "mode", mode, "data");
      data.mode = parse_split_mode(mode);
    }
    read(d, "quota", data.quota, "data");
    read(d, "seed", data.seed, "data");
    read(d, "min_count", data.min_count, "data");
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, "model", {"dim", "layers", "combine", "init_std"});
    read(m, "dim", train.dim, "model");
    read(m, "layers", train.layers, "model");
    read(m, "init_std", train.init_std, "model");
    if (m.contains("combine")) {
      std::string combine;
      read(m, "combine", combine, "model");
      train.combine = parse_layer_combine(combine);
    }
  }
  if (j.contains("dro")) {
    const auto& d = j["dro"];
    reject_unknown(d, "dro", {"alpha", "refresh_period", "l2_normalize"});
    if (d.contains("alpha")) dro.alpha = read_alpha(d["alpha"]);
    read(d, "refresh_period", dro.refresh_period, "dro");
    read(d, "l2_normalize", dro.l2_normalize, "dro");
  }
  if (j.contains("gea")) {
    const auto& g = j["gea"];
    reject_unknown(g, "gea", {"enabled", "gamma", "candidates", "refresh_period"});
    read(g, "enabled", gea.enabled, "gea");
    read(g, "gamma", gea.gamma, "gea");
    read(g, "candidates", gea.candidate_size, "gea");
    read(g, "refresh_period", gea.refresh_period, "gea");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, "train", {"learning_rate", "l2_lambda", "epochs", "batch_size", "seed", "optimizer",
                                "adam_beta1", "adam_beta2", "adam_epsilon", "patience"});
    read(t, "learning_rate", train.learning_rate, "train");
    read(t, "l2_lambda", train.l2_lambda, "train");
    read(t, "epochs", train.epochs, "train");
    read(t, "batch_size", train.batch_size, "train");
    read(t, "seed", train.seed, "train");
    if (t.contains("optimizer")) {
      std::string opt;
      read(t, "optimizer", opt, "train");
      train.optimizer = parse_optimizer(opt);
    }
    read(t, "adam_beta1", train.adam_beta1, "train");
    read(t, "adam_beta2", train.adam_beta2, "train");
    read(t, "adam_epsilon", train.adam_epsilon, "train");
    read(t, "patience", train.patience, "train");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e, "eval", {"k"});
    read(e, "k", train.eval_k, "eval");
  }
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  cfg.merge(j);
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  train.validate();
  dro.validate();
  gea.validate();
  if (data.mode == SplitMode::popularity && data.quota == 0) throw UsageError("data.quota must be >= 1");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data"] = {{"split", data.split},
               {"mode", to_string(data.mode)},
               {"quota", data.quota},
               {"seed", data.seed},
               {"min_count", data.min_count}};
  j["model"] = {{"dim", train.dim},
                {"layers", train.layers},
                {"combine", to_string(train.combine)},
                {"init_std", train.init_std}};
  nlohmann::ordered_json alpha;
  if (dro.enabled()) {
    alpha = dro.alpha;
  } else {
    alpha = "inf";
  }
  j["dro"] = {{"alpha", alpha}, {"refresh_period", dro.refresh_period}, {"l2_normalize", dro.l2_normalize}};
  j["gea"] = {{"enabled", gea.enabled},
              {"gamma", gea.gamma},
              {"candidates", gea.candidate_size},
              {"refresh_period", gea.refresh_period}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"l2_lambda", train.l2_lambda},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"seed", train.seed},
                {"optimizer", to_string(train.optimizer)},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_epsilon", train.adam_epsilon},
                {"patience", train.patience}};
  j["eval"] = {{"k", train.eval_k}};
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  return RunConfig::from_json(j);
}

}  // namespace drgnn
