// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsraseg/label_map.hpp"

namespace dsraseg::metrics {

// Single-image binary mask (values 0/1) and probability map (values [0,1]).
struct BinaryMask {
  int h = 0, w = 0;
  std::vector<uint8_t> v;

  static BinaryMask zeros(int h, int w);
  uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + static_cast<size_t>(x)]; }
  uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + static_cast<size_t>(x)]; }
  int64_t count() const;
};

struct ProbMap {
  int h = 0, w = 0;
  std::vector<double> v;

  static ProbMap zeros(int h, int w);
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + static_cast<size_t>(x)]; }
  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + static_cast<size_t>(x)]; }
};

// A metric value that can be undefined for degenerate inputs.
struct Maybe {
  double value = 0.0;
  bool defined = false;
};

struct DiceIou {
  double dice = 0.0, iou = 0.0;
};

// Overlap from hard counts. Both masks empty scores {1, 1}; exactly one
// empty scores {0, 0}. Satisfies dice = 2*iou / (1 + iou).
DiceIou dice_iou(const BinaryMask& pred, const BinaryMask& gt);

struct MulticlassOverlap {
  std::vector<double> dice, iou;     // per class 1..K (0 where absent)
  std::vector<uint8_t> present_gt;   // class appears in GT
  double mdice = 0.0, miou = 0.0;    // means over GT-present classes
  bool defined = false;              // false when GT has no foreground class
};

// One-vs-rest overlap per class, averaged over classes present in GT.
MulticlassOverlap multiclass_dice(const LabelMap& pred, const LabelMap& gt, int num_classes);

// Mean absolute error between the probability map and the binary target.
double mae(const ProbMap& pred, const BinaryMask& gt);

// Boundary-aware weighted F-measure (beta^2 = 1). Prediction errors are
// propagated to the nearest ground-truth pixel, blurred with a 7x7 Gaussian
// (sigma 5), and discounted away from the object by 2 - exp(ln(0.5)/5 * d).
// Undefined when GT is empty.
Maybe weighted_fmeasure(const ProbMap& pred, const BinaryMask& gt);

// Structure measure: 0.5 * object-level + 0.5 * region-level similarity,
// clamped below at 0. Degenerate GT: empty -> 1 - mean(pred),
// full -> mean(pred).
double s_measure(const ProbMap& pred, const BinaryMask& gt);

// Enhanced-alignment measure averaged over 256 thresholds t = (j+0.5)/256,
// binarizing pred >= t. Empty GT scores 1 - mean(FM); full GT scores
// mean(FM); otherwise the enhanced alignment of mean-centered maps.
double e_measure_mean(const ProbMap& pred, const BinaryMask& gt);

// 95th-percentile symmetric boundary distance (linear-interpolated rank over
// the pooled directed distances). A boundary pixel is a mask pixel with a
// 4-neighbor outside the mask; image borders count as outside. Undefined
// when either mask is empty.
Maybe hd95(const BinaryMask& pred, const BinaryMask& gt);

// ---------------------------------------------------------------------------

enum class EvalMode { kBinary, kMulticlass };

struct ImageResult {
  std::string name;
  double mdice = 0.0, miou = 0.0, wfm = 0.0, sm = 0.0, mem = 0.0, mae = 0.0, hd95 = 0.0;
  bool overlap_ok = false;  // mdice/miou defined
  bool wfm_ok = false;
  bool sm_ok = false;  // sm/mem defined (multiclass: some GT class present)
  bool hd95_ok = false;
};

struct MetricsReport {
  EvalMode mode = EvalMode::kBinary;
  int num_classes = 1;
  std::vector<ImageResult> images;
  // Aggregates are means over the images where each metric is defined.
  ImageResult mean;
  int n_overlap = 0, n_wfm = 0, n_sm = 0, n_hd95 = 0;
};

// All seven metrics for one binary pair: overlap and hd95 threshold the
// probability map at 0.5, the soft metrics consume it as-is.
ImageResult evaluate_prob_pair(const ProbMap& pred, const BinaryMask& gt);

// All seven metrics for one label-map pair ([1,H,W], values in [0, K]).
// Soft metrics run one-vs-rest on hard class masks, averaged over the
// classes present in GT.
ImageResult evaluate_label_pair(const LabelMap& pred, const LabelMap& gt, int num_classes);

// Fills report.mean and the defined-image counts from report.images.
// Each aggregate is the mean over the images where that metric is defined.
void finalize_report(MetricsReport& report);

// Pairs files by stem between the two directories (.png/.pgm), evaluates
// every pair, and aggregates. Binary mode treats predictions as gray
// probability maps (v/255, thresholded at 0.5 for overlap/hd95) and GT as
// binary (>=128). Multiclass mode treats both as label maps with values in
// [0, K]. Throws DataError when the stems do not match up.
MetricsReport evaluate_dir(const std::string& pred_dir, const std::string& gt_dir, EvalMode mode,
                           int num_classes);

// CSV with one row per image plus a final "mean" row; raw units.
void write_csv(const MetricsReport& report, const std::string& path);

// Fixed-width text table; [0,1] metrics scaled by 100, hd95 in pixels.
std::string summary_table(const MetricsReport& report);

}  // namespace dsraseg::metrics
