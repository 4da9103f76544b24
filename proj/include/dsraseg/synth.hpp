// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dsraseg/label_map.hpp"
#include "dsraseg/tensor.hpp"

namespace dsraseg {

enum class ShapeKind { kDisk, kRect, kAnnulus };

struct SynthSpec {
  int size = 64;        // square images; must be a positive multiple of 32
  int num_classes = 3;  // K; count must be >= K so every class appears
  std::vector<ShapeKind> shapes{ShapeKind::kDisk, ShapeKind::kRect, ShapeKind::kAnnulus};
  double contrast = 0.3;  // exact channel separation between class colors
  double noise = 0.02;    // texture amplitude and Gaussian sigma per channel
  bool occlusion = false; // true: later shapes may paint over earlier ones
  int count = 250;
  std::array<double, 3> split{0.8, 0.1, 0.1};  // train/val/test
  uint64_t seed = 7;

  void validate() const;  // throws ConfigError
};

// One image with its dense labels. Image values are already quantized to
// j/255, so a PNG save/load round-trip reproduces the tensor bitwise.
struct Sample {
  Tensor image;    // [1, 3, S, S] in [0, 1]
  LabelMap label;  // n = 1, values in [0, K]
};

struct SplitIndices {
  std::vector<int> train, val, test;
};

struct Dataset {
  SynthSpec spec;
  std::vector<Sample> samples;
  SplitIndices split;
};

// Deterministic shape-scene generator. Image i carries 1..K shapes over a
// textured background, the first always of class (i mod K) + 1; without
// occlusion, placements that would overlap existing foreground are retried
// and dropped after a bounded number of attempts. With noise = 0 the regions
// are flat and class colors sit exactly `contrast` apart per channel.
Dataset generate(const SynthSpec& spec);

// Shuffles [0, count) with the derived stream and cuts it by the ratios.
// A partition whose ratio is positive but receives zero elements is an
// error; zero-ratio partitions may be empty.
SplitIndices split_dataset(int count, const std::array<double, 3>& ratios, uint64_t seed);

// Layout: dir/images/img_#####.png (RGB), dir/labels/img_#####.pgm (pixel =
// class id), dir/manifest.json (spec echo + split). Loading reproduces the
// dataset bitwise.
void save_dataset(const Dataset& data, const std::string& dir);
Dataset load_dataset(const std::string& dir);

const char* shape_kind_name(ShapeKind k);
ShapeKind shape_kind_from(const std::string& name);

}  // namespace dsraseg
