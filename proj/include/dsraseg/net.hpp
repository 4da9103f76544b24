// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "dsraseg/archive.hpp"
#include "dsraseg/label_map.hpp"
#include "dsraseg/tensor.hpp"

namespace dsraseg {

// Axis over which the reverse gain is normalized.
enum class GainSoftmax { kChannel, kSpatial };
// How cross-entropy scores the background class (see supervision.hpp).
enum class CeBackground { kZero, kBgHead };

struct NetworkConfig {
  int num_classes = 1;  // K foreground classes; heads emit K channels each
  // Five stride-2 blocks: widths[0] is the stem (/2); pyramid levels F1..F4
  // carry widths[1..4] at strides /4, /8, /16, /32.
  std::array<int, 5> encoder_widths{16, 32, 48, 64, 80};
  int decoder_width = 32;  // trunk width of the decoder and refinement heads
  uint64_t seed = 1;       // parameter initialization stream
  GainSoftmax gain_softmax = GainSoftmax::kChannel;
  CeBackground ce_background = CeBackground::kZero;

  void validate() const;  // throws ConfigError
};

struct ConvParams {
  Tensor w, b;
};

// One segmentation head block: two 3x3 conv+relu trunk layers feeding two
// independent 1x1 projections, one for foreground and one for background.
struct HeadParams {
  ConvParams trunk1, trunk2, fg, bg;
};

struct ModelParams {
  std::array<ConvParams, 5> encoder;
  HeadParams decoder;             // global map over the fused pyramid
  std::array<HeadParams, 3> refine;  // [0] deepest (F4) ... [2] shallowest (F2)
};

// Paired per-class maps; both [N, K, h, w].
struct SegOutput {
  Tensor fg, bg;
};

// f[0]=F1 (/4, widths[1]) ... f[3]=F4 (/32, widths[4]).
struct FeaturePyramid {
  std::array<Tensor, 4> f;
};

ModelParams init_params(const NetworkConfig& cfg);

// Stable name -> tensor view over all parameters, in initialization order.
NamedTensors named_params(const ModelParams& p);

// Backbone: five stride-2 conv+relu blocks; returns the last four outputs.
// Input [N, 3, H, W] with H, W positive multiples of 32.
FeaturePyramid encoder_forward(const Tensor& image, const ModelParams& p,
                               const NetworkConfig& cfg);

// Throws ConfigError unless the pyramid matches cfg widths and the /4../32
// ladder for an input of extent (h, w).
void check_pyramid(const FeaturePyramid& fp, const NetworkConfig& cfg, int h, int w);

// Global coarse map from the three deepest levels: F3 and F4 are upsampled
// to F2's grid, concatenated, and passed through a head block. Output at /8.
SegOutput decode_coarse(const FeaturePyramid& fp, const ModelParams& p,
                        const NetworkConfig& cfg);

// Per-pixel gain from the deeper stage's paired maps:
//   gain = softmax(resize(deeper.fg) - resize(deeper.bg))
// resized to target_feature's grid, normalized over channels (default) or
// over space. Adding one shared map to both inputs leaves the gain unchanged.
Tensor reverse_gain(const SegOutput& deeper, const Tensor& target_feature, GainSoftmax axis);

// The head block phi: two 3x3 conv+relu trunk layers, then the paired 1x1
// projections. Returns {P_fg, P_bg}.
std::pair<Tensor, Tensor> stage_heads(const Tensor& feature, const HeadParams& p);

// Gain acts multiplicatively on the foreground path only:
//   fg_out = p_fg + p_fg * gain,   bg_out = p_bg.
SegOutput fuse_gain(const Tensor& p_fg, const Tensor& p_bg, const Tensor& gain);

// One refinement stage: heads on `feature`, gain from `deeper`, fused.
SegOutput refine_stage(const Tensor& feature, const SegOutput& deeper, const HeadParams& p,
                       GainSoftmax axis);

// Stage outputs, deepest first: r[0]=R4 (/8), r[1]=R3 (/32), r[2]=R2 (/16),
// r[3]=R1 (/8). R1 is the final prediction source.
struct StageOutputs {
  std::array<SegOutput, 4> r;
};

// Decodes a stage output to integer labels at (out_h, out_w): both maps are
// bilinearly resized, the class with the largest fg logit wins if that logit
// strictly exceeds its paired bg logit, else background. With one class and
// a zero background map this reduces to thresholding sigmoid(fg) at 0.5.
LabelMap predict_labels(const SegOutput& stage, int out_h, int out_w);

class Model {
 public:
  explicit Model(NetworkConfig cfg);
  Model(NetworkConfig cfg, ModelParams params);

  // Full cascade: encoder, coarse decode, three refinement stages.
  StageOutputs forward(const Tensor& image) const;

  // Inference helpers; both run under NoGradGuard at the input resolution.
  LabelMap predict(const Tensor& image) const;
  // Per-class probability maps sigmoid(fg - bg), resized to the input grid.
  Tensor predict_probs(const Tensor& image) const;

  NamedTensors parameters() const { return named_params(params); }

  NetworkConfig config;
  ModelParams params;
};

// Standalone refinement module over arbitrary feature maps: same head block
// and gain composition as the in-network stages, with its own parameters.
struct RefinerConfig {
  int feature_channels = 32;
  int num_classes = 1;
  int width = 32;
  uint64_t seed = 1;
  GainSoftmax gain_softmax = GainSoftmax::kChannel;
};

class Refiner {
 public:
  explicit Refiner(RefinerConfig cfg);
  SegOutput refine(const Tensor& features, const SegOutput& coarse) const;

  RefinerConfig config;
  HeadParams params;
};

}  // namespace dsraseg
