// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsraseg/config_json.hpp"
#include "dsraseg/errors.hpp"
#include "dsraseg/metrics.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/rng.hpp"

namespace dsraseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kShuffleStream = 0x73687566;
constexpr uint64_t kScaleStream = 0x7363616c;
constexpr uint64_t kGradcheckStream = 0x67636b6d;

int snap_extent(int base, double factor) {
  const auto units = std::llround(base * factor / 32.0);
  return 32 * static_cast<int>(std::max<int64_t>(1, units));
}

bool same_network_config(const NetworkConfig& a, const NetworkConfig& b) {
  return a.num_classes == b.num_classes && a.encoder_widths == b.encoder_widths &&
         a.decoder_width == b.decoder_width && a.seed == b.seed &&
         a.gain_softmax == b.gain_softmax && a.ce_background == b.ce_background;
}

// Stacks the chosen samples at the working extent. Images are resampled
// bilinearly, labels by nearest neighbor; neither lands on the tape.
void make_batch(const Dataset& data, const std::vector<int>& order, size_t begin, size_t end,
                int extent, Tensor& images, LabelMap& labels) {
  NoGradGuard guard;
  const int b = static_cast<int>(end - begin);
  const int s = data.spec.size;
  images = Tensor::zeros({b, 3, extent, extent});
  labels = LabelMap::zeros(b, extent, extent);
  double* out = images.data();
  const int64_t plane = static_cast<int64_t>(extent) * extent;
  for (int bi = 0; bi < b; ++bi) {
    const Sample& sm = data.samples[static_cast<size_t>(order[begin + static_cast<size_t>(bi)])];
    Tensor img = extent == s ? sm.image : bilinear_resize(sm.image, extent, extent);
    std::copy(img.data(), img.data() + 3 * plane, out + bi * 3 * plane);
    LabelMap lab = extent == s ? sm.label : nearest_resize(sm.label, extent, extent);
    std::copy(lab.v.begin(), lab.v.end(),
              labels.v.begin() + static_cast<int64_t>(bi) * plane);
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("failed to write " + path.string());
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_run_record(const std::string& out_dir, const RunRecord& rec, const Model& model,
                      const TrainConfig& cfg) {
  std::string csv = "epoch,dice,ce,bce,total,val_mdice,val_miou\n";
  for (const EpochRecord& er : rec.epochs) {
    csv += std::to_string(er.epoch) + "," + format_g17(er.dice) + "," + format_g17(er.ce) + "," +
           format_g17(er.bce) + "," + format_g17(er.total) + ",";
    if (er.val_mdice >= 0.0) csv += format_g17(er.val_mdice);
    csv += ",";
    if (er.val_miou >= 0.0) csv += format_g17(er.val_miou);
    csv += "\n";
  }
  write_text_file(fs::path(out_dir) / "record.csv", csv);

  json epochs = json::array();
  for (const EpochRecord& er : rec.epochs) {
    json e{{"epoch", er.epoch}, {"dice", er.dice},   {"ce", er.ce},
           {"bce", er.bce},     {"total", er.total}};
    if (er.val_mdice >= 0.0) {
      e["val_mdice"] = er.val_mdice;
      e["val_miou"] = er.val_miou;
    }
    epochs.push_back(std::move(e));
  }
  json j{{"format", "train-record-v1"},
         {"network", model.config},
         {"train", cfg},
         {"epochs", std::move(epochs)},
         {"best_epoch", rec.best_epoch},
         {"best_val_mdice", rec.best_val_mdice},
         {"last_checkpoint", rec.last_checkpoint},
         {"best_checkpoint", rec.best_checkpoint}};
  write_text_file(fs::path(out_dir) / "record.json", j.dump(2) + "\n");
}

void dump_diagnostics(const std::string& out_dir, int epoch, int step,
                      const std::vector<int>& order, size_t begin, size_t end, int extent,
                      const LossBreakdown& bd) {
  json batch = json::array();
  for (size_t i = begin; i < end; ++i) batch.push_back(order[i]);
  json j{{"epoch", epoch},
         {"step", step},
         {"extent", extent},
         {"batch_indices", std::move(batch)},
         {"dice", bd.dice},
         {"ce", bd.ce},
         {"bce", bd.bce},
         {"total", bd.total}};
  std::ofstream out(fs::path(out_dir) / "diagnostics.json");
  out << j.dump(2) << "\n";
}

}  // namespace

Adam::Adam(NamedTensors params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (params_.empty()) throw ConfigError("optimizer: no parameters");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    const double* g = p.grad();
    if (g == nullptr) continue;  // parameter outside the loss graph; leave it be
    double* m = m_[i].data();
    double* v = v_[i].data();
    double* w = p.data();
    const int64_t n = p.numel();
    for (int64_t e = 0; e < n; ++e) {
      m[e] = beta1_ * m[e] + (1.0 - beta1_) * g[e];
      v[e] = beta2_ * v[e] + (1.0 - beta2_) * g[e] * g[e];
      w[e] -= lr_ * (m[e] / c1) / (std::sqrt(v[e] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

NamedTensors Adam::state() const {
  NamedTensors out;
  out.reserve(2 * params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("m." + params_[i].first, m_[i]);
    out.emplace_back("v." + params_[i].first, v_[i]);
  }
  return out;
}

void Adam::load_state(const NamedTensors& state, int64_t steps) {
  if (steps < 0) throw DataError("optimizer state: negative step counter");
  for (size_t i = 0; i < params_.size(); ++i) {
    const std::string mk = "m." + params_[i].first;
    const std::string vk = "v." + params_[i].first;
    const Tensor* ms = nullptr;
    const Tensor* vs = nullptr;
    for (const auto& [name, t] : state) {
      if (name == mk) ms = &t;
      if (name == vk) vs = &t;
    }
    if (ms == nullptr || vs == nullptr)
      throw DataError("optimizer state: missing moments for " + params_[i].first);
    if (!same_shape(ms->shape(), params_[i].second.shape()) ||
        !same_shape(vs->shape(), params_[i].second.shape()))
      throw DataError("optimizer state: shape mismatch for " + params_[i].first);
    std::copy(ms->data(), ms->data() + ms->numel(), m_[i].data());
    std::copy(vs->data(), vs->data() + vs->numel(), v_[i].data());
  }
  t_ = steps;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train config: lr must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("train config: betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("train config: adam_eps must be > 0");
  if (scales.empty()) throw ConfigError("train config: scales must be non-empty");
  for (double f : scales)
    if (!(f > 0.0)) throw ConfigError("train config: scales must be positive");
  if (eval_every < 0) throw ConfigError("train config: eval_every must be >= 0");
  loss.validate();
}

void save_checkpoint(const std::string& dir, const Model& model, const Adam* opt, int epoch) {
  fs::create_directories(dir);
  NamedTensors tensors = model.parameters();
  if (opt != nullptr) {
    NamedTensors st = opt->state();
    tensors.insert(tensors.end(), st.begin(), st.end());
  }
  save_archive(dir, tensors);
  json j{{"format", "checkpoint-v1"},
         {"network", model.config},
         {"epoch", epoch},
         {"optimizer", json{{"present", opt != nullptr},
                            {"steps", opt != nullptr ? opt->steps() : 0}}}};
  write_text_file(fs::path(dir) / "checkpoint.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "checkpoint.json");
  if (!in) throw DataError("missing checkpoint.json in " + dir);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (j.value("format", "") != "checkpoint-v1")
    throw DataError("checkpoint manifest: unsupported format");

  Checkpoint ck;
  ck.config = j.at("network").get<NetworkConfig>();
  ck.config.validate();
  ck.epoch = j.at("epoch").get<int>();
  ck.has_optimizer = j.at("optimizer").at("present").get<bool>();
  ck.opt_steps = j.at("optimizer").at("steps").get<int64_t>();

  NamedTensors loaded = load_archive(dir);
  ck.params = init_params(ck.config);
  NamedTensors slots = named_params(ck.params);
  for (auto& [name, slot] : slots) {
    const Tensor* src = nullptr;
    for (const auto& [ln, lt] : loaded)
      if (ln == name) {
        src = &lt;
        break;
      }
    if (src == nullptr) throw DataError("checkpoint: missing tensor " + name);
    if (!same_shape(src->shape(), slot.shape()))
      throw DataError("checkpoint: shape mismatch for " + name);
    std::copy(src->data(), src->data() + src->numel(), slot.data());
  }
  if (ck.has_optimizer)
    for (const auto& [ln, lt] : loaded)
      if (ln.rfind("m.", 0) == 0 || ln.rfind("v.", 0) == 0) ck.opt_state.emplace_back(ln, lt);
  return ck;
}

Model model_from_checkpoint(const Checkpoint& ckpt) { return Model(ckpt.config, ckpt.params); }

EvalScores evaluate_split(const Model& model, const Dataset& data, const std::vector<int>& idx) {
  EvalScores out;
  double dice_sum = 0.0, iou_sum = 0.0;
  for (int i : idx) {
    const Sample& sm = data.samples.at(static_cast<size_t>(i));
    const LabelMap pred = model.predict(sm.image);
    const metrics::MulticlassOverlap mo =
        metrics::multiclass_dice(pred, sm.label, data.spec.num_classes);
    if (!mo.defined) continue;
    dice_sum += mo.mdice;
    iou_sum += mo.miou;
    ++out.images;
  }
  if (out.images > 0) {
    out.mdice = dice_sum / out.images;
    out.miou = iou_sum / out.images;
  }
  return out;
}

metrics::MetricsReport evaluate_model(const Model& model, const Dataset& data,
                                      const std::vector<int>& idx) {
  metrics::MetricsReport rep;
  rep.mode = metrics::EvalMode::kMulticlass;
  rep.num_classes = data.spec.num_classes;
  for (int i : idx) {
    const Sample& sm = data.samples.at(static_cast<size_t>(i));
    const LabelMap pred = model.predict(sm.image);
    metrics::ImageResult r = metrics::evaluate_label_pair(pred, sm.label, rep.num_classes);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "img_%05d", i);  // matches the on-disk names
    r.name = stem;
    rep.images.push_back(std::move(r));
  }
  metrics::finalize_report(rep);
  return rep;
}

RunRecord train(Model& model, const Dataset& data, const TrainConfig& cfg,
                const std::string& out_dir, const std::string& resume_from) {
  cfg.validate();
  model.config.validate();
  if (data.spec.num_classes != model.config.num_classes)
    throw ConfigError("train: dataset and network disagree on the class count");
  if (data.split.train.empty()) throw ConfigError("train: the train split is empty");
  fs::create_directories(out_dir);

  Adam opt(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  int start_epoch = 0;
  if (!resume_from.empty()) {
    const Checkpoint ck = load_checkpoint(resume_from);
    if (!same_network_config(ck.config, model.config))
      throw ConfigError("resume: checkpoint network config differs from the model");
    NamedTensors dst = model.parameters();
    const NamedTensors src = named_params(ck.params);
    for (size_t i = 0; i < dst.size(); ++i)
      std::copy(src[i].second.data(), src[i].second.data() + src[i].second.numel(),
                dst[i].second.data());
    if (ck.has_optimizer) opt.load_state(ck.opt_state, ck.opt_steps);
    start_epoch = ck.epoch;
    if (start_epoch >= cfg.epochs)
      throw ConfigError("resume: checkpoint is already at or past the final epoch");
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  const int base_extent = data.spec.size;
  int global_step = 0;
  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = data.split.train;
    Rng shuffle_rng = Rng::derive(cfg.seed, {kShuffleStream, static_cast<uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    Rng scale_rng = Rng::derive(cfg.seed, {kScaleStream, static_cast<uint64_t>(epoch)});

    EpochRecord er;
    er.epoch = epoch;
    int steps = 0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(begin + static_cast<size_t>(cfg.batch_size), order.size());
      const double factor = cfg.scales[static_cast<size_t>(
          scale_rng.uniform_int(0, static_cast<int>(cfg.scales.size()) - 1))];
      const int extent = snap_extent(base_extent, factor);
      if (extent < 32 || extent % 32 != 0)
        throw NumericError("train: working extent " + std::to_string(extent) +
                           " is not a positive multiple of 32");

      Tensor images;
      LabelMap labels;
      make_batch(data, order, begin, end, extent, images, labels);

      Tape tape;
      const StageOutputs stages = model.forward(images);
      auto [loss, bd] =
          total_loss(stages, labels, cfg.loss, model.config.num_classes, model.config.ce_background);
      ++global_step;
      if (!std::isfinite(bd.total)) {
        dump_diagnostics(out_dir, epoch, global_step, order, begin, end, extent, bd);
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(global_step) +
                           " (see diagnostics.json)");
      }
      tape.backward(loss);
      opt.step();
      opt.zero_grad();

      er.dice += bd.dice;
      er.ce += bd.ce;
      er.bce += bd.bce;
      er.total += bd.total;
      ++steps;
    }
    er.dice /= steps;
    er.ce /= steps;
    er.bce /= steps;
    er.total /= steps;

    const bool final_epoch = epoch == cfg.epochs;
    const bool cadence = cfg.eval_every > 0 && epoch % cfg.eval_every == 0;
    if ((cadence || final_epoch) && !data.split.val.empty()) {
      const EvalScores ev = evaluate_split(model, data, data.split.val);
      er.val_mdice = ev.mdice;
      er.val_miou = ev.miou;
      if (ev.mdice > rec.best_val_mdice) {
        rec.best_val_mdice = ev.mdice;
        rec.best_epoch = epoch;
        rec.best_checkpoint = "best.ckpt";
        save_checkpoint((fs::path(out_dir) / rec.best_checkpoint).string(), model, &opt, epoch);
      }
    }
    rec.last_checkpoint = "last.ckpt";
    save_checkpoint((fs::path(out_dir) / rec.last_checkpoint).string(), model, &opt, epoch);
    rec.epochs.push_back(er);
  }

  write_run_record(out_dir, rec, model, cfg);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  // Kept out of record.csv / record.json so those stay byte-identical
  // across machines and runs.
  write_text_file(fs::path(out_dir) / "timing.txt", "wall_seconds " + format_g17(wall) + "\n");
  return rec;
}

AblationTable ablate_losses(const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                            const Dataset& data, const std::vector<uint64_t>& seeds,
                            const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  struct Combo {
    const char* tag;
    bool dice, ce, bce;
  };
  static constexpr Combo kCombos[4] = {{"dice+ce", true, true, false},
                                       {"dice+bce", true, false, true},
                                       {"ce+bce", false, true, true},
                                       {"dice+ce+bce", true, true, true}};

  AblationTable table;
  table.seeds = seeds;
  for (const Combo& combo : kCombos) {
    AblationRow row;
    row.combo = combo.tag;
    for (uint64_t seed : seeds) {
      NetworkConfig nc = net_cfg;
      nc.seed = seed;
      TrainConfig tc = train_cfg;
      tc.seed = seed;
      tc.loss.w_dice = combo.dice ? train_cfg.loss.w_dice : 0.0;
      tc.loss.w_ce = combo.ce ? train_cfg.loss.w_ce : 0.0;
      tc.loss.w_bce = combo.bce ? train_cfg.loss.w_bce : 0.0;

      Model model(nc);
      const std::string run_dir =
          (fs::path(out_dir) / (std::string(combo.tag) + "_seed" + std::to_string(seed)))
              .string();
      const RunRecord rr = train(model, data, tc, run_dir);
      double dice_score = -1.0, iou_score = -1.0;
      for (auto it = rr.epochs.rbegin(); it != rr.epochs.rend(); ++it)
        if (it->val_mdice >= 0.0) {
          dice_score = it->val_mdice;
          iou_score = it->val_miou;
          break;
        }
      if (dice_score < 0.0) throw ConfigError("ablation: run produced no validation score");
      row.mdice_by_seed.push_back(dice_score);
      row.miou_by_seed.push_back(iou_score);
    }
    const auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      const size_t n = v.size();
      return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    row.median_mdice = median(row.mdice_by_seed);
    row.median_miou = median(row.miou_by_seed);
    table.rows.push_back(std::move(row));
  }
  write_text_file(fs::path(out_dir) / "ablation.txt", table.render());
  return table;
}

std::string AblationTable::render() const {
  std::string out = "per-seed cells and medians are mdice/miou, in points\n";
  char buf[80];
  out += "combo        ";
  for (uint64_t s : seeds) {
    std::snprintf(buf, sizeof(buf), " %13s", ("seed" + std::to_string(s)).c_str());
    out += buf;
  }
  out += "         median\n";
  for (const AblationRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-13s", row.combo.c_str());
    out += buf;
    for (size_t i = 0; i < row.mdice_by_seed.size(); ++i) {
      std::snprintf(buf, sizeof(buf), " %6.2f/%6.2f", 100.0 * row.mdice_by_seed[i],
                    100.0 * row.miou_by_seed[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "  %6.2f/%6.2f\n", 100.0 * row.median_mdice,
                  100.0 * row.median_miou);
    out += buf;
  }
  return out;
}

GradcheckReport gradcheck_model(const NetworkConfig& cfg, int extent, uint64_t seed) {
  cfg.validate();
  if (extent < 32 || extent % 32 != 0)
    throw ConfigError("gradcheck: extent must be a positive multiple of 32");

  Model model(cfg);
  Rng rng = Rng::derive(seed, {kGradcheckStream});
  Tensor image = Tensor::zeros({1, 3, extent, extent});
  double* v = image.data();
  for (int64_t i = 0; i < image.numel(); ++i) v[i] = rng.uniform();
  LabelMap labels = LabelMap::zeros(1, extent, extent);
  for (int32_t& l : labels.v) l = rng.uniform_int(0, cfg.num_classes);

  // Finite differences need a generic point. At init the biases are exactly
  // zero, so any pre-activation whose receptive field died under an earlier
  // relu sits exactly at the relu kink; there central differences measure the
  // subgradient midpoint while the tape reports the one-sided derivative.
  for (auto& kv : model.parameters()) {
    double* pd = kv.second.data();
    const int64_t n = kv.second.numel();
    for (int64_t i = 0; i < n; ++i) pd[i] += rng.uniform(-0.1, 0.1);
  }

  std::vector<GradcheckInput> inputs;
  for (const auto& [name, p] : model.parameters()) inputs.push_back({name, p});

  const LossSpec spec;  // all terms and stages active
  const auto f = [&](const std::vector<Tensor>&) {
    return total_loss(model.forward(image), labels, spec, cfg.num_classes, cfg.ce_background)
        .first;
  };
  return gradcheck(f, std::move(inputs));
}

}  // namespace dsraseg
