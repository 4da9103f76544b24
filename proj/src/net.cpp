// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/net.hpp"

#include <cmath>
#include <string>

#include "dsraseg/errors.hpp"
#include "dsraseg/ops.hpp"
#include "dsraseg/rng.hpp"

namespace dsraseg {

void NetworkConfig::validate() const {
  if (num_classes < 1) throw ConfigError("NetworkConfig: num_classes must be >= 1");
  for (int wdt : encoder_widths) {
    if (wdt < 1) throw ConfigError("NetworkConfig: encoder widths must be >= 1");
  }
  if (decoder_width < 1) throw ConfigError("NetworkConfig: decoder_width must be >= 1");
}

namespace {

ConvParams init_conv(Rng& rng, int out_ch, int in_ch, int k) {
  ConvParams p;
  p.w = Tensor::zeros({out_ch, in_ch, k, k}, /*requires_grad=*/true);
  p.b = Tensor::zeros({out_ch}, /*requires_grad=*/true);
  // He-normal: keeps relu activations at unit scale through depth.
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
  double* w = p.w.data();
  const int64_t n = p.w.numel();
  for (int64_t i = 0; i < n; ++i) w[i] = rng.normal(0.0, stddev);
  return p;
}

HeadParams init_head(Rng& rng, int in_ch, int width, int classes) {
  HeadParams h;
  h.trunk1 = init_conv(rng, width, in_ch, 3);
  h.trunk2 = init_conv(rng, width, width, 3);
  h.fg = init_conv(rng, classes, width, 1);
  h.bg = init_conv(rng, classes, width, 1);
  return h;
}

void collect_head(NamedTensors& out, const std::string& prefix, const HeadParams& h) {
  out.emplace_back(prefix + ".trunk1.weight", h.trunk1.w);
  out.emplace_back(prefix + ".trunk1.bias", h.trunk1.b);
  out.emplace_back(prefix + ".trunk2.weight", h.trunk2.w);
  out.emplace_back(prefix + ".trunk2.bias", h.trunk2.b);
  out.emplace_back(prefix + ".fg.weight", h.fg.w);
  out.emplace_back(prefix + ".fg.bias", h.fg.b);
  out.emplace_back(prefix + ".bg.weight", h.bg.w);
  out.emplace_back(prefix + ".bg.bias", h.bg.b);
}

}  // namespace

ModelParams init_params(const NetworkConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::derive(cfg.seed, {0x70617261u});  // parameter stream
  ModelParams p;
  int in_ch = 3;
  for (int i = 0; i < 5; ++i) {
    p.encoder[static_cast<size_t>(i)] = init_conv(rng, cfg.encoder_widths[static_cast<size_t>(i)], in_ch, 3);
    in_ch = cfg.encoder_widths[static_cast<size_t>(i)];
  }
  const int fused = cfg.encoder_widths[2] + cfg.encoder_widths[3] + cfg.encoder_widths[4];
  p.decoder = init_head(rng, fused, cfg.decoder_width, cfg.num_classes);
  // refine[0] consumes F4, refine[1] F3, refine[2] F2.
  p.refine[0] = init_head(rng, cfg.encoder_widths[4], cfg.decoder_width, cfg.num_classes);
  p.refine[1] = init_head(rng, cfg.encoder_widths[3], cfg.decoder_width, cfg.num_classes);
  p.refine[2] = init_head(rng, cfg.encoder_widths[2], cfg.decoder_width, cfg.num_classes);
  return p;
}

NamedTensors named_params(const ModelParams& p) {
  NamedTensors out;
  for (size_t i = 0; i < p.encoder.size(); ++i) {
    out.emplace_back("encoder.block" + std::to_string(i) + ".weight", p.encoder[i].w);
    out.emplace_back("encoder.block" + std::to_string(i) + ".bias", p.encoder[i].b);
  }
  collect_head(out, "decoder", p.decoder);
  collect_head(out, "refine3", p.refine[0]);
  collect_head(out, "refine2", p.refine[1]);
  collect_head(out, "refine1", p.refine[2]);
  return out;
}

FeaturePyramid encoder_forward(const Tensor& image, const ModelParams& p,
                               const NetworkConfig& cfg) {
  if (image.ndim() != 4 || image.dim(1) != 3)
    throw ConfigError("encoder_forward: expected [N,3,H,W], got " + shape_str(image.shape()));
  const int h = image.dim(2), w = image.dim(3);
  if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0) {
    throw ConfigError("encoder_forward: input extent " + std::to_string(h) + "x" +
                      std::to_string(w) + " must be a positive multiple of 32");
  }
  FeaturePyramid fp;
  Tensor x = image;
  for (int i = 0; i < 5; ++i) {
    x = relu(conv2d(x, p.encoder[static_cast<size_t>(i)].w, p.encoder[static_cast<size_t>(i)].b,
                    /*stride=*/2, /*padding=*/1));
    if (i >= 1) fp.f[static_cast<size_t>(i - 1)] = x;
  }
  check_pyramid(fp, cfg, h, w);
  return fp;
}

void check_pyramid(const FeaturePyramid& fp, const NetworkConfig& cfg, int h, int w) {
  for (int i = 0; i < 4; ++i) {
    const Tensor& f = fp.f[static_cast<size_t>(i)];
    if (!f.defined() || f.ndim() != 4)
      throw ConfigError("feature pyramid level " + std::to_string(i + 1) + " is malformed");
    const int want_c = cfg.encoder_widths[static_cast<size_t>(i + 1)];
    const int want_h = h >> (i + 2), want_w = w >> (i + 2);
    if (f.dim(1) != want_c || f.dim(2) != want_h || f.dim(3) != want_w) {
      throw ConfigError("feature pyramid level " + std::to_string(i + 1) + " has shape " +
                        shape_str(f.shape()) + ", expected [N," + std::to_string(want_c) + "," +
                        std::to_string(want_h) + "," + std::to_string(want_w) + "]");
    }
  }
}

SegOutput decode_coarse(const FeaturePyramid& fp, const ModelParams& p,
                        const NetworkConfig& cfg) {
  const Tensor& f2 = fp.f[1];
  Tensor f3 = resize_like(fp.f[2], f2);
  Tensor f4 = resize_like(fp.f[3], f2);
  Tensor fused = concat_channels({f2, f3, f4});
  auto [fg, bg] = stage_heads(fused, p.decoder);
  (void)cfg;
  return SegOutput{fg, bg};
}

Tensor reverse_gain(const SegOutput& deeper, const Tensor& target_feature, GainSoftmax axis) {
  if (!same_shape(deeper.fg.shape(), deeper.bg.shape())) {
    throw ConfigError("reverse_gain: fg/bg shape mismatch " + shape_str(deeper.fg.shape()) +
                      " vs " + shape_str(deeper.bg.shape()));
  }
  Tensor diff = sub(resize_like(deeper.fg, target_feature), resize_like(deeper.bg, target_feature));
  return axis == GainSoftmax::kChannel ? softmax_channels(diff) : softmax_spatial(diff);
}

std::pair<Tensor, Tensor> stage_heads(const Tensor& feature, const HeadParams& p) {
  Tensor t = relu(conv2d(feature, p.trunk1.w, p.trunk1.b, 1, 1));
  t = relu(conv2d(t, p.trunk2.w, p.trunk2.b, 1, 1));
  Tensor fg = conv2d(t, p.fg.w, p.fg.b, 1, 0);
  Tensor bg = conv2d(t, p.bg.w, p.bg.b, 1, 0);
  return {fg, bg};
}

SegOutput fuse_gain(const Tensor& p_fg, const Tensor& p_bg, const Tensor& gain) {
  if (!same_shape(p_fg.shape(), gain.shape())) {
    throw ConfigError("fuse_gain: fg/gain shape mismatch " + shape_str(p_fg.shape()) + " vs " +
                      shape_str(gain.shape()));
  }
  return SegOutput{add(p_fg, mul(p_fg, gain)), p_bg};
}

SegOutput refine_stage(const Tensor& feature, const SegOutput& deeper, const HeadParams& p,
                       GainSoftmax axis) {
  auto [p_fg, p_bg] = stage_heads(feature, p);
  Tensor gain = reverse_gain(deeper, feature, axis);
  return fuse_gain(p_fg, p_bg, gain);
}

LabelMap predict_labels(const SegOutput& stage, int out_h, int out_w) {
  NoGradGuard ng;
  Tensor fg = bilinear_resize(stage.fg, out_h, out_w);
  Tensor bg = bilinear_resize(stage.bg, out_h, out_w);
  const int n = fg.dim(0), k = fg.dim(1);
  LabelMap out = LabelMap::zeros(n, out_h, out_w);
  const double* pf = fg.data();
  const double* pb = bg.data();
  const int64_t plane = static_cast<int64_t>(out_h) * out_w;
  for (int i = 0; i < n; ++i) {
    for (int64_t px = 0; px < plane; ++px) {
      // The strongest foreground class wins only if it also beats its own
      // paired background logit; ties keep the lower class / background.
      int64_t best_idx = static_cast<int64_t>(i) * k * plane + px;
      int best_c = 0;
      for (int c = 1; c < k; ++c) {
        const int64_t idx = (static_cast<int64_t>(i) * k + c) * plane + px;
        if (pf[idx] > pf[best_idx]) {
          best_idx = idx;
          best_c = c;
        }
      }
      out.v[static_cast<size_t>(i * plane + px)] =
          pf[best_idx] > pb[best_idx] ? static_cast<int32_t>(best_c + 1) : 0;
    }
  }
  return out;
}

Model::Model(NetworkConfig cfg) : config(cfg), params(init_params(cfg)) {}

Model::Model(NetworkConfig cfg, ModelParams existing) : config(cfg), params(std::move(existing)) {
  config.validate();
}

StageOutputs Model::forward(const Tensor& image) const {
  FeaturePyramid fp = encoder_forward(image, params, config);
  StageOutputs out;
  out.r[0] = decode_coarse(fp, params, config);                                     // R4 at /8
  out.r[1] = refine_stage(fp.f[3], out.r[0], params.refine[0], config.gain_softmax);  // R3 at /32
  out.r[2] = refine_stage(fp.f[2], out.r[1], params.refine[1], config.gain_softmax);  // R2 at /16
  out.r[3] = refine_stage(fp.f[1], out.r[2], params.refine[2], config.gain_softmax);  // R1 at /8
  return out;
}

LabelMap Model::predict(const Tensor& image) const {
  NoGradGuard ng;
  StageOutputs s = forward(image);
  return predict_labels(s.r[3], image.dim(2), image.dim(3));
}

Tensor Model::predict_probs(const Tensor& image) const {
  NoGradGuard ng;
  StageOutputs s = forward(image);
  Tensor fg = bilinear_resize(s.r[3].fg, image.dim(2), image.dim(3));
  Tensor bg = bilinear_resize(s.r[3].bg, image.dim(2), image.dim(3));
  return sigmoid(sub(fg, bg));
}

Refiner::Refiner(RefinerConfig cfg_) : config(cfg_) {
  if (config.feature_channels < 1 || config.num_classes < 1 || config.width < 1)
    throw ConfigError("RefinerConfig: widths and class count must be >= 1");
  Rng rng = Rng::derive(config.seed, {0x72656669u});
  params = init_head(rng, config.feature_channels, config.width, config.num_classes);
}

SegOutput Refiner::refine(const Tensor& features, const SegOutput& coarse) const {
  if (features.ndim() != 4 || features.dim(1) != config.feature_channels) {
    throw ConfigError("Refiner: expected [N," + std::to_string(config.feature_channels) +
                      ",h,w] features, got " + shape_str(features.shape()));
  }
  return refine_stage(features, coarse, params, config.gain_softmax);
}

}  // namespace dsraseg
