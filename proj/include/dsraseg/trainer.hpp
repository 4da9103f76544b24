// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsraseg/gradcheck.hpp"
#include "dsraseg/metrics.hpp"
#include "dsraseg/net.hpp"
#include "dsraseg/supervision.hpp"
#include "dsraseg/synth.hpp"

namespace dsraseg {

// Adam with bias correction. Moment buffers are keyed by parameter name so
// checkpointed state can be restored onto a freshly built model.
class Adam {
 public:
  Adam(NamedTensors params, double lr, double beta1, double beta2, double eps);

  void step();       // consumes .grad() of every parameter
  void zero_grad();  // clears all parameter gradients
  int64_t steps() const { return t_; }

  // Moment buffers as "m.<name>" / "v.<name>" pairs, in parameter order.
  NamedTensors state() const;
  void load_state(const NamedTensors& state, int64_t steps);

 private:
  NamedTensors params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  // Per-batch scale jitter; the working extent is round(S*f/32)*32, no
  // smaller than 32. With the 64px reference data this yields {64, 64, 96}.
  std::vector<double> scales{0.75, 1.0, 1.25};
  int eval_every = 5;  // validation cadence in epochs; 0 = final epoch only
  uint64_t seed = 7;   // shuffle and scale streams, derived per epoch
  LossSpec loss;

  void validate() const;  // throws ConfigError
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  // Mean stage-weighted loss terms over the epoch's steps.
  double dice = 0.0, ce = 0.0, bce = 0.0, total = 0.0;
  // Validation means; negative when this epoch was not evaluated.
  double val_mdice = -1.0, val_miou = -1.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // epoch of the best validation mean dice
  double best_val_mdice = -1.0;
  // Checkpoint names relative to the run directory, so the serialized record
  // is byte-identical across reruns regardless of where they ran.
  std::string last_checkpoint, best_checkpoint;
};

// A checkpoint directory holds weights.bin + manifest.json covering the
// network config, epoch counter, and (if present) optimizer moments.
struct Checkpoint {
  NetworkConfig config;
  ModelParams params;
  int epoch = 0;
  bool has_optimizer = false;
  NamedTensors opt_state;
  int64_t opt_steps = 0;
};

void save_checkpoint(const std::string& dir, const Model& model, const Adam* opt, int epoch);
Checkpoint load_checkpoint(const std::string& dir);
Model model_from_checkpoint(const Checkpoint& ckpt);

struct EvalScores {
  double mdice = 0.0, miou = 0.0;
  int images = 0;  // images contributing (those with a defined mean)
};

// Mean multiclass dice/IoU of model.predict over the given sample indices.
EvalScores evaluate_split(const Model& model, const Dataset& data, const std::vector<int>& idx);

// Full per-image metric report (all seven metrics) of model.predict over the
// given sample indices, aggregated exactly like directory evaluation.
metrics::MetricsReport evaluate_model(const Model& model, const Dataset& data,
                                      const std::vector<int>& idx);

// Trains in place. Writes last.ckpt every epoch, best.ckpt on improvement,
// and record.csv / record.json once done; wall-clock timing goes to a
// separate timing.txt so the record files are byte-stable across machines.
// A non-finite loss raises NumericError after dumping diagnostics.json.
// `resume_from` restarts from a checkpoint written by a previous run with
// the same config; epoch streams are derived from (seed, epoch), so a
// resumed run replays exactly the batches the uninterrupted run would see.
RunRecord train(Model& model, const Dataset& data, const TrainConfig& cfg,
                const std::string& out_dir, const std::string& resume_from = "");

// Loss ablation: the three two-term combinations and the full loss, each
// trained from scratch per seed (model and data order both keyed by the
// seed). Scores are final-epoch validation means.
struct AblationRow {
  std::string combo;                  // "dice+ce", "dice+bce", "ce+bce", "dice+ce+bce"
  std::vector<double> mdice_by_seed;  // aligned with the seeds argument
  std::vector<double> miou_by_seed;
  double median_mdice = 0.0;
  double median_miou = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // always all four rows
  std::vector<uint64_t> seeds;
  std::string render() const;  // fixed-width text table, scores in points
};

AblationTable ablate_losses(const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                            const Dataset& data, const std::vector<uint64_t>& seeds,
                            const std::string& out_dir);

// Finite-difference check of d(total loss)/d(parameter) for every parameter
// tensor of a small model on one synthetic batch.
GradcheckReport gradcheck_model(const NetworkConfig& cfg, int extent, uint64_t seed);

}  // namespace dsraseg
