#include "drgnn/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drgnn/config.hpp"
#include "drgnn/data.hpp"
#include "drgnn/error.hpp"
#include "drgnn/eval.hpp"
#include "drgnn/experiment.hpp"
#include "drgnn/io.hpp"
#include "drgnn/model.hpp"
#include "drgnn/trainer.hpp"

namespace drgnn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

std::string strip_tsv(const std::string& path) {
  const fs::path p(path);
  return (p.parent_path() / p.stem()).string();
}

// run.json holds the fully resolved invocation next to the outputs.
void write_run_json(const std::string& output_path, const std::string& command, const ordered_json& body) {
  const fs::path dir = fs::path(output_path).has_parent_path() ? fs::path(output_path).parent_path() : fs::path(".");
  fs::create_directories(dir);
  ordered_json j;
  j["command"] = command;
  for (const auto& [key, value] : body.items()) j[key] = value;
  std::ofstream out(dir / "run.json");
  if (!out) throw DataError("cannot write " + (dir / "run.json").string());
  out << j.dump(2) << '\n';
}

std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  // shortest text that round-trips
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Flags shared by train and sweep-alpha; each optional overrides the config.
struct ModelFlags {
  std::string config_path;
  std::string split;
  std::optional<std::string> alpha;
  std::optional<std::string> gea;
  std::optional<double> gea_gamma;
  std::optional<std::size_t> gea_candidates;
  std::optional<int> refresh_period;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<double> l2_lambda;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> layers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer;
  std::optional<std::string> combine;
  std::optional<std::size_t> patience;
  std::optional<std::size_t> k;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "RunConfig JSON file");
    app->add_option("--split", split, "split prefix (<prefix>.train.tsv, ...)");
    app->add_option("--alpha", alpha, "robust Lagrange multiplier, or inf to disable");
    app->add_option("--gea", gea, "edge addition on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--gea-gamma", gea_gamma, "original-distribution weight in (0,1]; enables edge addition");
    app->add_option("--gea-candidates", gea_candidates, "candidate set size");
    app->add_option("--refresh-period", refresh_period, "epochs between weight refreshes");
    app->add_option("--epochs", epochs);
    app->add_option("--lr", learning_rate);
    app->add_option("--l2", l2_lambda);
    app->add_option("--batch-size", batch_size);
    app->add_option("--dim", dim);
    app->add_option("--layers", layers);
    app->add_option("--seed", seed);
    app->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
    app->add_option("--combine", combine)->check(CLI::IsMember({"mean", "last"}));
    app->add_option("--patience", patience, "early-stopping patience; 0 disables");
    app->add_option("--k", k, "ranking cutoff");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (!split.empty()) cfg.data.split = split;
    if (alpha) cfg.dro.alpha = parse_alpha(*alpha);
    if (gea_gamma) {
      cfg.gea.gamma = *gea_gamma;
      cfg.gea.enabled = true;
    }
    if (gea) cfg.gea.enabled = (*gea == "on");
    if (gea_candidates) cfg.gea.candidate_size = *gea_candidates;
    if (refresh_period) cfg.dro.refresh_period = *refresh_period;
    if (epochs) cfg.train.epochs = *epochs;
    if (learning_rate) cfg.train.learning_rate = *learning_rate;
    if (l2_lambda) cfg.train.l2_lambda = *l2_lambda;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (dim) cfg.train.dim = *dim;
    if (layers) cfg.train.layers = *layers;
    if (seed) cfg.train.seed = *seed;
    if (optimizer) cfg.train.optimizer = parse_optimizer(*optimizer);
    if (combine) cfg.train.combine = parse_layer_combine(*combine);
    if (patience) cfg.train.patience = *patience;
    if (k) cfg.train.eval_k = *k;
    cfg.validate();
    if (cfg.data.split.empty()) throw UsageError("--split (or data.split in the config) is required");
    return cfg;
  }
};

int cmd_split(const std::string& mode_name, const std::string& input, const std::string& train_input,
              const std::string& test_input, std::string out_prefix, std::size_t quota,
              std::uint64_t seed, std::size_t min_count, std::ostream& out) {
  const SplitMode mode = parse_split_mode(mode_name);
  SplitBundle bundle;
  if (mode == SplitMode::exposure) {
    if (train_input.empty() || test_input.empty()) {
      throw UsageError("split --mode exposure needs --train-input and --test-input");
    }
    bundle = load_exposure_pair(train_input, test_input);
    if (out_prefix.empty()) out_prefix = strip_tsv(train_input);
  } else {
    if (input.empty()) throw UsageError("split --mode " + mode_name + " needs --input");
    Dataset data = load_dataset(input);
    data.interactions = filter_min_count(data.interactions, min_count);
    if (mode == SplitMode::temporal) {
      if (!data.has_timestamps()) {
        throw DataError("split --mode temporal: input has rows without a timestamp column");
      }
      bundle = split_temporal(data);
    } else {
      bundle = split_popularity(data, quota, seed);
    }
    bundle.meta.min_count = min_count;
    if (out_prefix.empty()) out_prefix = strip_tsv(input);
  }
  write_split(bundle, out_prefix);
  ordered_json body;
  body["mode"] = mode_name;
  body["input"] = input;
  body["train_input"] = train_input;
  body["test_input"] = test_input;
  body["out"] = out_prefix;
  body["quota"] = quota;
  body["seed"] = seed;
  body["min_count"] = min_count;
  write_run_json(out_prefix, "split", body);
  out << "train " << bundle.train.size() << " validation " << bundle.validation.size() << " test "
      << bundle.test.size() << '\n';
  return 0;
}

int cmd_train(const ModelFlags& flags, std::string out_prefix, const std::string& resume,
              std::ostream& out) {
  RunConfig cfg = flags.resolve();
  const SplitBundle bundle = read_split(cfg.data.split);
  if (out_prefix.empty()) out_prefix = cfg.data.split + ".model";

  Trainer trainer(bundle.train_graph(), cfg.train, cfg.dro, cfg.gea);
  if (!resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume);
    trainer.restore(ckpt.state);
  }
  TrainingLog log(out_prefix + ".log.csv", !resume.empty());
  const auto validation = pairs_of(bundle.validation);
  const FitResult result = fit(trainer, validation, [&](const EpochRecord& r) { log.write(r); });

  save_checkpoint(out_prefix, cfg, trainer.state());
  const auto& held = validation.empty() ? bundle.test : bundle.validation;
  const MetricsReport metrics =
      evaluate(result.best_final_embeddings, trainer.graph(), pairs_of(held), cfg.train.eval_k);
  {
    std::ofstream m(out_prefix + ".metrics.json");
    if (!m) throw DataError("cannot write " + out_prefix + ".metrics.json");
    m << metrics.to_json() << '\n';
  }
  ordered_json body;
  body["config"] = cfg.to_json();
  body["out"] = out_prefix;
  body["resume"] = resume;
  write_run_json(out_prefix, "train", body);
  out << "epochs " << trainer.epoch() << " best_epoch " << result.best_epoch << ' ' << metrics.to_json() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, std::string split, std::optional<std::size_t> k,
                 const std::string& which, const std::string& out_path, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (split.empty()) split = ckpt.config.data.split;
  if (split.empty()) throw UsageError("evaluate needs --split");
  const SplitBundle bundle = read_split(split);
  Trainer trainer(bundle.train_graph(), ckpt.config.train, ckpt.config.dro, ckpt.config.gea);
  trainer.restore(ckpt.state);
  const std::size_t cutoff = k.value_or(ckpt.config.train.eval_k);
  const auto& held = which == "validation" ? bundle.validation : bundle.test;
  const MetricsReport metrics = evaluate(trainer.final_embeddings(), trainer.graph(), pairs_of(held), cutoff);
  out << metrics.to_json() << '\n';
  if (!out_path.empty()) {
    std::ofstream m(out_path);
    if (!m) throw DataError("cannot write " + out_path);
    m << metrics.to_json() << '\n';
    ordered_json body;
    body["checkpoint"] = checkpoint;
    body["split"] = split;
    body["k"] = cutoff;
    body["set"] = which;
    write_run_json(out_path, "evaluate", body);
  }
  return 0;
}

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> alphas;
  std::stringstream in(text);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    if (!piece.empty()) alphas.push_back(parse_alpha(piece));
  }
  if (alphas.empty()) throw UsageError("--alphas needs at least one value");
  return alphas;
}

int cmd_sweep(const ModelFlags& flags, const std::string& alpha_list, std::string out_path,
              std::ostream& out, std::ostream& err) {
  const RunConfig cfg = flags.resolve();
  const SplitBundle bundle = read_split(cfg.data.split);
  const auto rows = sweep_alpha(bundle, cfg, parse_alpha_list(alpha_list));
  if (out_path.empty()) out_path = cfg.data.split + ".sweep.csv";
  std::ofstream csv(out_path);
  if (!csv) throw DataError("cannot write " + out_path);
  csv << "alpha,ndcg,kl_of_pstar\n";
  for (const auto& r : rows) {
    csv << format_double(r.alpha) << ',' << (r.ndcg ? format_double(*r.ndcg) : "nan") << ','
        << (r.worst_case_kl ? format_double(*r.worst_case_kl) : "nan") << '\n';
    if (!r.error.empty()) err << "alpha " << format_double(r.alpha) << " failed: " << r.error << '\n';
  }
  ordered_json body;
  body["config"] = cfg.to_json();
  body["alphas"] = alpha_list;
  body["out"] = out_path;
  write_run_json(out_path, "sweep-alpha", body);
  out << "wrote " << rows.size() << " rows to " << out_path << '\n';
  return 0;
}

int cmd_shift_kl(const std::string& split, const std::string& train_path, const std::string& test_path,
                 const std::string& out_path, std::ostream& out) {
  SplitBundle bundle;
  if (!split.empty()) {
    bundle = read_split(split);
  } else {
    if (train_path.empty() || test_path.empty()) throw UsageError("shift-kl needs --split or --train and --test");
    std::ifstream tr(train_path);
    if (!tr) throw DataError("cannot read " + train_path);
    std::ifstream te(test_path);
    if (!te) throw DataError("cannot read " + test_path);
    bundle.train = read_interactions(tr, bundle.ids, train_path);
    bundle.test = read_interactions(te, bundle.ids, test_path);
  }
  const double kl = shift_kl(bundle.train, bundle.test);
  out << format_double(kl) << '\n';
  if (!out_path.empty()) {
    ordered_json j;
    j["shift_kl"] = kl;
    j["train"] = bundle.train.size();
    j["test"] = bundle.test.size();
    std::ofstream o(out_path);
    if (!o) throw DataError("cannot write " + out_path);
    o << j.dump() << '\n';
    ordered_json body;
    body["split"] = split;
    body["train"] = train_path;
    body["test"] = test_path;
    write_run_json(out_path, "shift-kl", body);
  }
  return 0;
}

int cmd_dump(const std::string& checkpoint, const std::string& split_override, bool final,
             const std::string& out_path, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  Matrix table = ckpt.state.embeddings;
  if (final) {
    const std::string split = split_override.empty() ? ckpt.config.data.split : split_override;
    const SplitBundle bundle = read_split(split);
    Trainer trainer(bundle.train_graph(), ckpt.config.train, ckpt.config.dro, ckpt.config.gea);
    trainer.restore(ckpt.state);
    table = trainer.final_embeddings();
  }
  if (out_path.empty()) {
    write_embeddings(out, table);
  } else {
    save_embeddings(out_path, table);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributionally robust graph collaborative filtering"};
  app.require_subcommand(1);

  auto* split = app.add_subcommand("split", "build train/validation/test files");
  std::string mode;
  std::string input;
  std::string train_input;
  std::string test_input;
  std::string split_out;
  std::size_t quota = 3;
  std::uint64_t split_seed = 7;
  std::size_t min_count = 0;
  split->add_option("--mode", mode, "popularity | temporal | exposure")->required();
  split->add_option("--input", input, "interaction TSV");
  split->add_option("--train-input", train_input, "exposure: biased training ratings");
  split->add_option("--test-input", test_input, "exposure: random-exposure test ratings");
  split->add_option("--out", split_out, "output prefix");
  split->add_option("--quota", quota, "popularity: test interactions per item");
  split->add_option("--seed", split_seed);
  split->add_option("--min-count", min_count, "drop users/items with fewer interactions");

  auto* train = app.add_subcommand("train", "train a model on a split");
  ModelFlags train_flags;
  train_flags.attach(train);
  std::string train_out;
  std::string resume;
  train->add_option("--out", train_out, "checkpoint prefix");
  train->add_option("--resume", resume, "checkpoint prefix to continue from");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint");
  std::string eval_ckpt;
  std::string eval_split;
  std::optional<std::size_t> eval_k;
  std::string eval_set = "test";
  std::string eval_out;
  evaluate_cmd->add_option("--checkpoint", eval_ckpt)->required();
  evaluate_cmd->add_option("--split", eval_split);
  evaluate_cmd->add_option("--k", eval_k);
  evaluate_cmd->add_option("--set", eval_set)->check(CLI::IsMember({"test", "validation"}));
  evaluate_cmd->add_option("--out", eval_out, "metrics JSON path");

  auto* sweep = app.add_subcommand("sweep-alpha", "train and evaluate once per alpha");
  ModelFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string alphas;
  std::string sweep_out;
  sweep->add_option("--alphas", alphas, "comma-separated, e.g. 0.1,0.3,1,inf")->required();
  sweep->add_option("--out", sweep_out, "CSV path");

  auto* shift = app.add_subcommand("shift-kl", "item-frequency KL(test || train)");
  std::string shift_split;
  std::string shift_train;
  std::string shift_test;
  std::string shift_out;
  shift->add_option("--split", shift_split);
  shift->add_option("--train", shift_train);
  shift->add_option("--test", shift_test);
  shift->add_option("--out", shift_out, "JSON path");

  auto* bound = app.add_subcommand("bound", "generalization bound B(alpha, d, rho)");
  BoundInputs bound_in;
  bound->add_option("--alpha", bound_in.alpha)->required();
  bound->add_option("--degree", bound_in.degree)->required();
  bound->add_option("--rho", bound_in.rho)->required();
  bound->add_option("--hypotheses", bound_in.hypothesis_count, "|Theta|");

  auto* dump = app.add_subcommand("dump-embeddings", "write an embedding table");
  std::string dump_ckpt;
  std::string dump_split;
  std::string dump_out;
  bool dump_final = false;
  dump->add_option("--checkpoint", dump_ckpt)->required();
  dump->add_option("--split", dump_split);
  dump->add_option("--out", dump_out);
  dump->add_flag("--final", dump_final, "propagated embeddings instead of layer 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*split) {
      return cmd_split(mode, input, train_input, test_input, split_out, quota, split_seed, min_count, out);
    }
    if (*train) return cmd_train(train_flags, train_out, resume, out);
    if (*evaluate_cmd) return cmd_evaluate(eval_ckpt, eval_split, eval_k, eval_set, eval_out, out);
    if (*sweep) return cmd_sweep(sweep_flags, alphas, sweep_out, out, err);
    if (*shift) return cmd_shift_kl(shift_split, shift_train, shift_test, shift_out, out);
    if (*bound) {
      out << format_double(generalization_bound(bound_in)) << '\n';
      return 0;
    }
    if (*dump) return cmd_dump(dump_ckpt, dump_split, dump_final, dump_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace drgnn::cli
