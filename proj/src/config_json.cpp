// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/config_json.hpp"

#include <fstream>
#include <initializer_list>

#include "dsraseg/errors.hpp"

namespace dsraseg {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const char* what,
                    std::initializer_list<const char*> known) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

const char* gain_name(GainSoftmax g) {
  return g == GainSoftmax::kChannel ? "channel" : "spatial";
}

GainSoftmax gain_from(const std::string& s) {
  if (s == "channel") return GainSoftmax::kChannel;
  if (s == "spatial") return GainSoftmax::kSpatial;
  throw ConfigError("gain_softmax must be 'channel' or 'spatial', got '" + s + "'");
}

const char* ce_bg_name(CeBackground m) {
  return m == CeBackground::kZero ? "zero" : "bg_head";
}

CeBackground ce_bg_from(const std::string& s) {
  if (s == "zero") return CeBackground::kZero;
  if (s == "bg_head") return CeBackground::kBgHead;
  throw ConfigError("ce_background must be 'zero' or 'bg_head', got '" + s + "'");
}

}  // namespace

void to_json(json& j, const NetworkConfig& c) {
  j = json{{"num_classes", c.num_classes},
           {"encoder_widths", c.encoder_widths},
           {"decoder_width", c.decoder_width},
           {"seed", c.seed},
           {"gain_softmax", gain_name(c.gain_softmax)},
           {"ce_background", ce_bg_name(c.ce_background)}};
}

void from_json(const json& j, NetworkConfig& c) {
  reject_unknown(j, "network config",
                 {"num_classes", "encoder_widths", "decoder_width", "seed", "gain_softmax",
                  "ce_background"});
  c.num_classes = j.value("num_classes", c.num_classes);
  if (j.contains("encoder_widths")) {
    const auto& w = j.at("encoder_widths");
    if (!w.is_array() || w.size() != 5)
      throw ConfigError("network config: encoder_widths must be an array of 5 ints");
    for (size_t i = 0; i < 5; ++i) c.encoder_widths[i] = w[i].get<int>();
  }
  c.decoder_width = j.value("decoder_width", c.decoder_width);
  c.seed = j.value("seed", c.seed);
  if (j.contains("gain_softmax")) c.gain_softmax = gain_from(j.at("gain_softmax"));
  if (j.contains("ce_background")) c.ce_background = ce_bg_from(j.at("ce_background"));
}

void to_json(json& j, const LossSpec& s) {
  j = json{{"w_dice", s.w_dice},
           {"w_ce", s.w_ce},
           {"w_bce", s.w_bce},
           {"stage_weights", s.stage_weights},
           {"smooth", s.smooth},
           {"boundary_weighted", s.boundary_weighted}};
}

void from_json(const json& j, LossSpec& s) {
  reject_unknown(j, "loss spec",
                 {"w_dice", "w_ce", "w_bce", "stage_weights", "smooth", "boundary_weighted"});
  s.w_dice = j.value("w_dice", s.w_dice);
  s.w_ce = j.value("w_ce", s.w_ce);
  s.w_bce = j.value("w_bce", s.w_bce);
  if (j.contains("stage_weights")) {
    const auto& w = j.at("stage_weights");
    if (!w.is_array() || w.size() != 4)
      throw ConfigError("loss spec: stage_weights must be an array of 4 numbers");
    for (size_t i = 0; i < 4; ++i) s.stage_weights[i] = w[i].get<double>();
  }
  s.smooth = j.value("smooth", s.smooth);
  s.boundary_weighted = j.value("boundary_weighted", s.boundary_weighted);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"adam_eps", c.adam_eps},
           {"scales", c.scales},
           {"eval_every", c.eval_every},
           {"seed", c.seed},
           {"loss", c.loss}};
}

void from_json(const json& j, TrainConfig& c) {
  reject_unknown(j, "train config",
                 {"epochs", "batch_size", "lr", "beta1", "beta2", "adam_eps", "scales",
                  "eval_every", "seed", "loss"});
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  if (j.contains("scales")) c.scales = j.at("scales").get<std::vector<double>>();
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  if (j.contains("loss")) from_json(j.at("loss"), c.loss);
}

void to_json(json& j, const SynthSpec& s) {
  json shapes = json::array();
  for (ShapeKind sk : s.shapes) shapes.push_back(shape_kind_name(sk));
  j = json{{"size", s.size},
           {"num_classes", s.num_classes},
           {"shapes", shapes},
           {"contrast", s.contrast},
           {"noise", s.noise},
           {"occlusion", s.occlusion},
           {"count", s.count},
           {"split", s.split},
           {"seed", s.seed}};
}

void from_json(const json& j, SynthSpec& s) {
  reject_unknown(j, "dataset spec",
                 {"size", "num_classes", "shapes", "contrast", "noise", "occlusion", "count",
                  "split", "seed"});
  s.size = j.value("size", s.size);
  s.num_classes = j.value("num_classes", s.num_classes);
  if (j.contains("shapes")) {
    s.shapes.clear();
    for (const auto& name : j.at("shapes")) s.shapes.push_back(shape_kind_from(name.get<std::string>()));
  }
  s.contrast = j.value("contrast", s.contrast);
  s.noise = j.value("noise", s.noise);
  s.occlusion = j.value("occlusion", s.occlusion);
  s.count = j.value("count", s.count);
  if (j.contains("split")) {
    const auto& sp = j.at("split");
    if (!sp.is_array() || sp.size() != 3)
      throw ConfigError("dataset spec: split must be an array of 3 ratios");
    for (size_t i = 0; i < 3; ++i) s.split[i] = sp[i].get<double>();
  }
  s.seed = j.value("seed", s.seed);
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

}  // namespace dsraseg
