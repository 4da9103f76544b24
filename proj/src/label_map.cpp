// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/label_map.hpp"

#include <string>

#include "dsraseg/errors.hpp"

namespace dsraseg {

LabelMap LabelMap::zeros(int n, int h, int w) {
  if (n <= 0 || h <= 0 || w <= 0) throw ConfigError("LabelMap: non-positive extent");
  LabelMap m;
  m.n = n;
  m.h = h;
  m.w = w;
  m.v.assign(static_cast<size_t>(n) * h * w, 0);
  return m;
}

void check_labels(const LabelMap& labels, int num_classes, const char* where) {
  for (int32_t x : labels.v) {
    if (x < 0 || x > num_classes) {
      throw ConfigError(std::string(where) + ": label " + std::to_string(x) +
                        " outside [0, " + std::to_string(num_classes) + "]");
    }
  }
}

LabelMap nearest_resize(const LabelMap& labels, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ConfigError("nearest_resize: non-positive output extent");
  if (labels.h == out_h && labels.w == out_w) return labels;
  LabelMap out = LabelMap::zeros(labels.n, out_h, out_w);
  for (int i = 0; i < labels.n; ++i) {
    for (int y = 0; y < out_h; ++y) {
      const int sy = static_cast<int>(static_cast<int64_t>(y) * labels.h / out_h);
      for (int x = 0; x < out_w; ++x) {
        const int sx = static_cast<int>(static_cast<int64_t>(x) * labels.w / out_w);
        out.at(i, y, x) = labels.at(i, sy, sx);
      }
    }
  }
  return out;
}

}  // namespace dsraseg
