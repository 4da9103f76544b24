// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace dsraseg {

// Batched integer label grid. 0 is background; foreground classes are 1..K.
struct LabelMap {
  int n = 0, h = 0, w = 0;
  std::vector<int32_t> v;  // row-major [n][h][w]

  static LabelMap zeros(int n, int h, int w);

  int32_t& at(int i, int y, int x) {
    return v[(static_cast<size_t>(i) * h + static_cast<size_t>(y)) * w + static_cast<size_t>(x)];
  }
  int32_t at(int i, int y, int x) const {
    return v[(static_cast<size_t>(i) * h + static_cast<size_t>(y)) * w + static_cast<size_t>(x)];
  }
  int64_t numel() const { return static_cast<int64_t>(n) * h * w; }
  bool operator==(const LabelMap& o) const = default;
};

// Validates every label lies in [0, num_classes]; throws ConfigError otherwise.
void check_labels(const LabelMap& labels, int num_classes, const char* where);

// Nearest-neighbor resample: src = floor(dst * in_extent / out_extent).
// Pure integer arithmetic, so downscaling by 2 picks even rows/cols exactly.
LabelMap nearest_resize(const LabelMap& labels, int out_h, int out_w);

}  // namespace dsraseg
