// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line driver: synth | train | eval | gradcheck | ablate.
// Exit codes: 0 ok, 1 usage, 2 bad config, 3 bad data, 4 numeric failure.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsraseg/config_json.hpp"
#include "dsraseg/errors.hpp"
#include "dsraseg/image_io.hpp"
#include "dsraseg/metrics.hpp"
#include "dsraseg/net.hpp"
#include "dsraseg/parallel.hpp"
#include "dsraseg/synth.hpp"
#include "dsraseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TrainBundle {
  dsraseg::NetworkConfig network;
  dsraseg::TrainConfig train;
};

// Combined config file: {"network": {...}, "train": {...}}, both optional.
TrainBundle load_bundle(const std::string& path) {
  TrainBundle bundle;
  if (path.empty()) return bundle;
  const json j = dsraseg::load_json_file(path);
  for (const auto& item : j.items())
    if (item.key() != "network" && item.key() != "train")
      throw dsraseg::ConfigError(path + ": unknown key '" + item.key() + "'");
  if (j.contains("network")) from_json(j.at("network"), bundle.network);
  if (j.contains("train")) from_json(j.at("train"), bundle.train);
  return bundle;
}

const std::vector<int>& pick_split(const dsraseg::Dataset& data, const std::string& name) {
  if (name == "train") return data.split.train;
  if (name == "val") return data.split.val;
  if (name == "test") return data.split.test;
  throw dsraseg::ConfigError("split must be train, val, or test, got '" + name + "'");
}

int run_synth(const std::string& config, const std::string& out, int64_t seed, int count) {
  dsraseg::SynthSpec spec;
  if (!config.empty()) from_json(dsraseg::load_json_file(config), spec);
  if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
  if (count > 0) spec.count = count;
  const dsraseg::Dataset data = dsraseg::generate(spec);
  dsraseg::save_dataset(data, out);
  std::printf("wrote %d samples (%zu train / %zu val / %zu test) to %s\n", spec.count,
              data.split.train.size(), data.split.val.size(), data.split.test.size(),
              out.c_str());
  return 0;
}

int run_train(const std::string& config, const std::string& data_dir, const std::string& out,
              const std::string& resume, int64_t seed, int epochs) {
  TrainBundle bundle = load_bundle(config);
  if (seed >= 0) {
    bundle.network.seed = static_cast<uint64_t>(seed);
    bundle.train.seed = static_cast<uint64_t>(seed);
  }
  if (epochs > 0) bundle.train.epochs = epochs;

  const dsraseg::Dataset data = dsraseg::load_dataset(data_dir);
  bundle.network.num_classes = data.spec.num_classes;
  dsraseg::Model model(bundle.network);
  const dsraseg::RunRecord rec = dsraseg::train(model, data, bundle.train, out, resume);

  const dsraseg::EpochRecord& last = rec.epochs.back();
  std::printf("done: %d epochs, final loss %.6f", last.epoch, last.total);
  if (last.val_mdice >= 0.0)
    std::printf(", val mdice %.4f, val miou %.4f", last.val_mdice, last.val_miou);
  std::printf("\nbest epoch %d (val mdice %.4f)\nrecord: %s\n", rec.best_epoch,
              rec.best_val_mdice, (fs::path(out) / "record.json").string().c_str());
  return 0;
}

// Writes the split's predictions (and matching ground truth) as PGM files,
// then scores them with the directory protocol so file-based and
// checkpoint-based evaluation share one code path.
dsraseg::metrics::MetricsReport eval_checkpoint(const std::string& ckpt_dir,
                                                const std::string& data_dir,
                                                const std::string& split_name,
                                                const std::string& out) {
  const dsraseg::Checkpoint ck = dsraseg::load_checkpoint(ckpt_dir);
  const dsraseg::Model model = dsraseg::model_from_checkpoint(ck);
  const dsraseg::Dataset data = dsraseg::load_dataset(data_dir);
  if (data.spec.num_classes != model.config.num_classes)
    throw dsraseg::ConfigError("eval: dataset and checkpoint disagree on the class count");
  const std::vector<int>& idx = pick_split(data, split_name);
  if (idx.empty()) throw dsraseg::ConfigError("eval: split '" + split_name + "' is empty");

  const fs::path pred_dir = fs::path(out) / "pred";
  const fs::path gt_dir = fs::path(out) / "gt";
  fs::create_directories(pred_dir);
  fs::create_directories(gt_dir);

  const int s = data.spec.size;
  const int k = model.config.num_classes;
  for (int i : idx) {
    const dsraseg::Sample& sm = data.samples.at(static_cast<size_t>(i));
    char stem[32];
    std::snprintf(stem, sizeof(stem), "img_%05d", i);

    dsraseg::ImageU8 pred = dsraseg::ImageU8::make(s, s, 1);
    dsraseg::ImageU8 gt = dsraseg::ImageU8::make(s, s, 1);
    if (k == 1) {
      const dsraseg::Tensor probs = model.predict_probs(sm.image);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          pred.at(y, x, 0) = static_cast<uint8_t>(std::lround(probs.at(0, 0, y, x) * 255.0));
          gt.at(y, x, 0) = sm.label.at(0, y, x) == 1 ? 255 : 0;
        }
    } else {
      const dsraseg::LabelMap lab = model.predict(sm.image);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          pred.at(y, x, 0) = static_cast<uint8_t>(lab.at(0, y, x));
          gt.at(y, x, 0) = static_cast<uint8_t>(sm.label.at(0, y, x));
        }
    }
    dsraseg::write_pgm((pred_dir / (std::string(stem) + ".pgm")).string(), pred);
    dsraseg::write_pgm((gt_dir / (std::string(stem) + ".pgm")).string(), gt);
  }
  const auto mode =
      k == 1 ? dsraseg::metrics::EvalMode::kBinary : dsraseg::metrics::EvalMode::kMulticlass;
  return dsraseg::metrics::evaluate_dir(pred_dir.string(), gt_dir.string(), mode, k);
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& ckpt,
             const std::string& data_dir, const std::string& split_name, const std::string& out,
             int classes, const std::string& csv) {
  dsraseg::metrics::MetricsReport report;
  if (!ckpt.empty()) {
    if (data_dir.empty())
      throw dsraseg::ConfigError("eval: --checkpoint requires --data");
    const std::string stage_dir = out.empty() ? (fs::path(ckpt) / "eval").string() : out;
    report = eval_checkpoint(ckpt, data_dir, split_name, stage_dir);
  } else {
    if (pred.empty() || gt.empty())
      throw dsraseg::ConfigError("eval: need either --checkpoint or both --pred and --gt");
    const auto mode = classes == 1 ? dsraseg::metrics::EvalMode::kBinary
                                   : dsraseg::metrics::EvalMode::kMulticlass;
    report = dsraseg::metrics::evaluate_dir(pred, gt, mode, classes);
  }
  if (!csv.empty()) dsraseg::metrics::write_csv(report, csv);
  std::fputs(dsraseg::metrics::summary_table(report).c_str(), stdout);
  return 0;
}

int run_gradcheck(int extent, int classes, int64_t seed, const std::vector<int>& widths,
                  int decoder) {
  dsraseg::NetworkConfig cfg;
  cfg.num_classes = classes;
  if (widths.size() != 5)
    throw dsraseg::ConfigError("gradcheck: --widths takes exactly 5 channel counts");
  std::copy(widths.begin(), widths.end(), cfg.encoder_widths.begin());
  cfg.decoder_width = decoder;
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
  const dsraseg::GradcheckReport report =
      dsraseg::gradcheck_model(cfg, extent, cfg.seed);
  for (const auto& [name, err] : report.per_input)
    std::printf("%-28s max rel err %.3e\n", name.c_str(), err);
  std::printf("%lld elements checked, worst %.3e: %s\n",
              static_cast<long long>(report.elements), report.max_rel_error,
              report.pass() ? "PASS" : "FAIL");
  return report.pass() ? 0 : 4;
}

int run_ablate(const std::string& config, const std::string& data_dir, const std::string& out,
               const std::vector<uint64_t>& seeds) {
  TrainBundle bundle = load_bundle(config);
  const dsraseg::Dataset data = dsraseg::load_dataset(data_dir);
  bundle.network.num_classes = data.spec.num_classes;
  const dsraseg::AblationTable table =
      dsraseg::ablate_losses(bundle.network, bundle.train, data, seeds, out);
  std::fputs(table.render().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale multi-class segmentation with background-aware refinement"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads for tensor ops (default 1)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic shape dataset");
  std::string synth_config, synth_out;
  int64_t synth_seed = -1;
  int synth_count = 0;
  synth->add_option("--config", synth_config, "dataset spec JSON");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override the spec seed");
  synth->add_option("--count", synth_count, "override the sample count");

  auto* train = app.add_subcommand("train", "train a model on a dataset directory");
  std::string train_config, train_data, train_out, train_resume;
  int64_t train_seed = -1;
  int train_epochs = 0;
  train->add_option("--config", train_config, "combined network/train JSON");
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run directory")->required();
  train->add_option("--resume", train_resume, "checkpoint directory to resume from");
  train->add_option("--seed", train_seed, "override network and train seeds");
  train->add_option("--epochs", train_epochs, "override the epoch count");

  auto* eval = app.add_subcommand("eval", "score predictions or a checkpoint");
  std::string eval_pred, eval_gt, eval_ckpt, eval_data, eval_split = "val", eval_out, eval_csv;
  int eval_classes = 1;
  eval->add_option("--pred", eval_pred, "prediction directory (with --gt)");
  eval->add_option("--gt", eval_gt, "ground-truth directory (with --pred)");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory (with --data)");
  eval->add_option("--data", eval_data, "dataset directory (with --checkpoint)");
  eval->add_option("--split", eval_split, "dataset split: train|val|test (default val)");
  eval->add_option("--out", eval_out, "where to stage checkpoint predictions");
  eval->add_option("--classes", eval_classes, "class count for --pred/--gt mode (default 1)");
  eval->add_option("--csv", eval_csv, "write the per-image report here");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full loss");
  int gc_extent = 32, gc_classes = 2, gc_decoder = 6;
  int64_t gc_seed = -1;
  // Audit-width network: central differences visit every parameter twice, so
  // production widths would run for hours. Narrow channels, same topology.
  std::vector<int> gc_widths{4, 6, 8, 10, 12};
  gradcheck->add_option("--size", gc_extent, "input extent (multiple of 32, default 32)");
  gradcheck->add_option("--classes", gc_classes, "foreground class count (default 2)");
  gradcheck->add_option("--seed", gc_seed, "parameter and probe seed");
  gradcheck->add_option("--widths", gc_widths, "encoder channels (default 4 6 8 10 12)")
      ->expected(5);
  gradcheck->add_option("--decoder", gc_decoder, "decoder channels (default 6)");

  auto* ablate = app.add_subcommand("ablate", "loss-term ablation over seeds");
  std::string ab_config, ab_data, ab_out;
  std::vector<uint64_t> ab_seeds{7, 8, 9};
  ablate->add_option("--config", ab_config, "combined network/train JSON");
  ablate->add_option("--data", ab_data, "dataset directory")->required();
  ablate->add_option("--out", ab_out, "output directory")->required();
  ablate->add_option("--seeds", ab_seeds, "training seeds (default 7 8 9)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) dsraseg::set_thread_count(threads);
    if (synth->parsed()) return run_synth(synth_config, synth_out, synth_seed, synth_count);
    if (train->parsed())
      return run_train(train_config, train_data, train_out, train_resume, train_seed,
                       train_epochs);
    if (eval->parsed())
      return run_eval(eval_pred, eval_gt, eval_ckpt, eval_data, eval_split, eval_out,
                      eval_classes, eval_csv);
    if (gradcheck->parsed())
      return run_gradcheck(gc_extent, gc_classes, gc_seed, gc_widths, gc_decoder);
    if (ablate->parsed()) return run_ablate(ab_config, ab_data, ab_out, ab_seeds);
  } catch (const dsraseg::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const dsraseg::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const dsraseg::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  }
  return 0;
}
