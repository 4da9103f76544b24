// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <utility>

#include "dsraseg/label_map.hpp"
#include "dsraseg/net.hpp"
#include "dsraseg/tensor.hpp"

namespace dsraseg {

// Per-class background indicator: mask[n,k] is 1 where label != k+1, so it
// is exactly the complement of class k's foreground mask.
struct BackgroundMask {
  Tensor mask;  // [N, K, h, w], values in {0, 1}
};

BackgroundMask make_background_mask(const LabelMap& labels, int num_classes);

// Soft dice loss on per-class sigmoid probabilities:
//   dice_nk = (2*sum(p*g) + smooth) / (sum(p) + sum(g) + smooth)
// over each (sample, class) plane; loss = mean over all (n, k) of 1 - dice.
Tensor dice_loss(const Tensor& fg_logits, const LabelMap& labels, double smooth);

// Pixelwise cross-entropy over K+1 classes. Foreground class k scores
// fg_logits[k]; the background score is 0 (kZero) or min over the paired
// background head's channels (kBgHead). Mean over all pixels.
Tensor ce_loss(const Tensor& fg_logits, const Tensor& bg_logits, const LabelMap& labels,
               CeBackground mode);

// Binary cross-entropy with logits against the background mask, in the
// overflow-safe form max(z,0) - z*m + log1p(exp(-|z|)). With boundary
// weighting each pixel is scaled by w = 1 + 5*|boxavg15(m) - m|, where
// boxavg15 is a 15x15 box average dividing by the in-image tap count, so a
// spatially constant mask yields w = 1 everywhere and the weighted loss
// equals the unweighted one. Per (n, k): sum(w*l)/sum(w); mean over (n, k).
Tensor bce_loss(const Tensor& bg_logits, const BackgroundMask& bg_mask, bool boundary_weighted);

struct LossSpec {
  double w_dice = 1.0, w_ce = 1.0, w_bce = 1.0;
  std::array<double, 4> stage_weights{1.0, 1.0, 1.0, 1.0};  // [R4, R3, R2, R1]
  double smooth = 1.0;
  bool boundary_weighted = true;

  void validate() const;  // throws ConfigError on all-zero or negative weights
};

struct StageLossTerms {
  double dice = 0.0, ce = 0.0, bce = 0.0;
};

struct LossBreakdown {
  std::array<StageLossTerms, 4> stages;    // unweighted per-stage terms
  double dice = 0.0, ce = 0.0, bce = 0.0;  // stage-weighted sums per term
  double total = 0.0;
};

// Deep supervision: every stage output is scored against the labels resampled
// (nearest) to its own grid, as stage_weight * (w_dice*dice + w_ce*ce +
// w_bce*bce), and the stage contributions are summed. Terms with zero weight
// are skipped entirely. Returns the scalar loss tensor (on the tape) plus a
// plain-number breakdown.
std::pair<Tensor, LossBreakdown> total_loss(const StageOutputs& stages, const LabelMap& labels,
                                            const LossSpec& spec, int num_classes,
                                            CeBackground ce_mode);

}  // namespace dsraseg
