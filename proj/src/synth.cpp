// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsraseg/config_json.hpp"
#include "dsraseg/errors.hpp"
#include "dsraseg/image_io.hpp"
#include "dsraseg/rng.hpp"

namespace dsraseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr uint64_t kImageStream = 0x696d6167;  // per-image draws
constexpr uint64_t kSplitStream = 0x73706c74;  // partition shuffle
constexpr double kPi = 3.14159265358979323846;

struct ShapeDraw {
  ShapeKind kind;
  double cx, cy;      // center, pixel units
  double a, b;        // disk: r,-; rect: hx,hy; annulus: r_outer,r_inner
};

ShapeDraw draw_shape(Rng& rng, const SynthSpec& spec) {
  ShapeDraw d;
  const double s = spec.size;
  d.kind = spec.shapes[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int>(spec.shapes.size()) - 1))];
  d.cx = (0.2 + 0.6 * rng.uniform()) * s;
  d.cy = (0.2 + 0.6 * rng.uniform()) * s;
  switch (d.kind) {
    case ShapeKind::kDisk:
      d.a = (0.16 + 0.14 * rng.uniform()) * s;
      d.b = 0.0;
      break;
    case ShapeKind::kRect:
      d.a = (0.12 + 0.16 * rng.uniform()) * s;
      d.b = (0.12 + 0.16 * rng.uniform()) * s;
      break;
    case ShapeKind::kAnnulus:
      d.a = (0.18 + 0.14 * rng.uniform()) * s;
      d.b = d.a * (0.35 + 0.20 * rng.uniform());
      break;
  }
  return d;
}

bool inside(const ShapeDraw& d, int y, int x) {
  const double px = x + 0.5, py = y + 0.5;
  const double dx = px - d.cx, dy = py - d.cy;
  switch (d.kind) {
    case ShapeKind::kDisk:
      return dx * dx + dy * dy <= d.a * d.a;
    case ShapeKind::kRect:
      return std::abs(dx) <= d.a && std::abs(dy) <= d.b;
    case ShapeKind::kAnnulus: {
      const double r2 = dx * dx + dy * dy;
      return r2 >= d.b * d.b && r2 <= d.a * d.a;
    }
  }
  return false;
}

// Class 0 is the background, at (1 - delta) / 2 per channel; a class raises
// its pattern channels by exactly delta (first seven classes never clamp,
// wrapped patterns scale up and may). Channel separation is therefore exactly
// delta before any noise is added.
std::array<double, 3> base_color(int cls, double delta) {
  const double bg = (1.0 - delta) / 2.0;
  std::array<double, 3> c{bg, bg, bg};
  if (cls == 0) return c;
  const int pattern = (cls - 1) % 7 + 1;
  const double amp = delta * (1.0 + (cls - 1) / 7);
  for (int ch = 0; ch < 3; ++ch)
    if (pattern >> ch & 1) c[static_cast<size_t>(ch)] = std::min(1.0, c[static_cast<size_t>(ch)] + amp);
  return c;
}

Sample make_sample(const SynthSpec& spec, int index) {
  const int s = spec.size;
  const int k = spec.num_classes;
  Rng rng = Rng::derive(spec.seed, {kImageStream, static_cast<uint64_t>(index)});

  // One brightness offset per channel, shared by every class in the image:
  // images vary while pairwise class separation stays exactly delta. The
  // offset range keeps all colors inside [0, 1] with no clamping.
  std::vector<std::array<double, 3>> colors(static_cast<size_t>(k) + 1);
  std::array<double, 3> shift;
  for (int ch = 0; ch < 3; ++ch)
    shift[static_cast<size_t>(ch)] = 0.25 * (1.0 - spec.contrast) * (2.0 * rng.uniform() - 1.0);
  for (int cls = 0; cls <= k; ++cls) {
    colors[static_cast<size_t>(cls)] = base_color(cls, spec.contrast);
    for (int ch = 0; ch < 3; ++ch)
      colors[static_cast<size_t>(cls)][static_cast<size_t>(ch)] += shift[static_cast<size_t>(ch)];
  }

  Sample out;
  out.label = LabelMap::zeros(1, s, s);
  out.image = Tensor::zeros({1, 3, s, s});
  double* img = out.image.data();
  const auto paint = [&](const ShapeDraw& d, int cls) {
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        if (!inside(d, y, x)) continue;
        out.label.at(0, y, x) = cls;
        for (int ch = 0; ch < 3; ++ch)
          img[(ch * s + y) * s + x] = colors[static_cast<size_t>(cls)][static_cast<size_t>(ch)];
      }
  };
  const auto overlaps = [&](const ShapeDraw& d) {
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        if (out.label.at(0, y, x) != 0 && inside(d, y, x)) return true;
    return false;
  };

  for (int ch = 0; ch < 3; ++ch)
    for (int p = 0; p < s * s; ++p) img[ch * s * s + p] = colors[0][static_cast<size_t>(ch)];

  // One to num_classes shapes per image; the guaranteed class goes first,
  // onto an empty canvas.
  paint(draw_shape(rng, spec), index % k + 1);

  const int extras = rng.uniform_int(0, k - 1);
  for (int e = 0; e < extras; ++e) {
    const int cls = rng.uniform_int(1, k);
    if (spec.occlusion) {
      paint(draw_shape(rng, spec), cls);
      continue;
    }
    for (int attempt = 0; attempt < 20; ++attempt) {
      const ShapeDraw d = draw_shape(rng, spec);
      if (!overlaps(d)) {
        paint(d, cls);
        break;
      }
    }
  }

  // Texture and noise both scale with the noise level, so noise = 0 yields
  // flat regions whose channel separation is exactly the contrast value.
  if (spec.noise > 0.0) {
    const double gx = 2.0 * (2.0 * rng.uniform() - 1.0);
    const double gy = 2.0 * (2.0 * rng.uniform() - 1.0);
    const double fx = 1.0 + 2.0 * rng.uniform();
    const double fy = 1.0 + 2.0 * rng.uniform();
    const double phase = 2.0 * kPi * rng.uniform();
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) {
        const double ux = (x + 0.5) / s, uy = (y + 0.5) / s;
        const double t = spec.noise * (gx * (ux - 0.5) + gy * (uy - 0.5) +
                                       std::sin(2.0 * kPi * (fx * ux + fy * uy) + phase));
        for (int ch = 0; ch < 3; ++ch) img[(ch * s + y) * s + x] += t;
      }
    for (int p = 0; p < 3 * s * s; ++p) img[p] += spec.noise * rng.normal();
  }
  // Quantizing to 8 bits here makes the PNG round-trip exact.
  for (int p = 0; p < 3 * s * s; ++p)
    img[p] = std::lround(std::clamp(img[p], 0.0, 1.0) * 255.0) / 255.0;
  return out;
}

std::string sample_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d", index);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (size < 32 || size % 32 != 0)
    throw ConfigError("dataset spec: size must be a positive multiple of 32");
  if (num_classes < 1) throw ConfigError("dataset spec: num_classes must be >= 1");
  if (shapes.empty()) throw ConfigError("dataset spec: shapes must be non-empty");
  if (!(contrast > 0.0) || contrast > 1.0)
    throw ConfigError("dataset spec: contrast must be in (0, 1]");
  if (noise < 0.0) throw ConfigError("dataset spec: noise must be >= 0");
  if (count < num_classes)
    throw ConfigError("dataset spec: count must be >= num_classes so every class appears");
  double sum = 0.0;
  for (double r : split) {
    if (r < 0.0) throw ConfigError("dataset spec: split ratios must be >= 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("dataset spec: split ratios must sum to 1");
}

const char* shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::kDisk: return "disk";
    case ShapeKind::kRect: return "rect";
    case ShapeKind::kAnnulus: return "annulus";
  }
  throw ConfigError("unknown shape kind");
}

ShapeKind shape_kind_from(const std::string& name) {
  if (name == "disk") return ShapeKind::kDisk;
  if (name == "rect") return ShapeKind::kRect;
  if (name == "annulus") return ShapeKind::kAnnulus;
  throw ConfigError("unknown shape kind: " + name);
}

SplitIndices split_dataset(int count, const std::array<double, 3>& ratios, uint64_t seed) {
  std::vector<int> order(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::derive(seed, {kSplitStream});
  rng.shuffle(order);

  int n0 = static_cast<int>(std::lround(ratios[0] * count));
  int n1 = static_cast<int>(std::lround(ratios[1] * count));
  n0 = std::clamp(n0, 0, count);
  n1 = std::clamp(n1, 0, count - n0);
  const int n2 = count - n0 - n1;
  const int sizes[3] = {n0, n1, n2};
  static const char* names[3] = {"train", "val", "test"};
  for (int p = 0; p < 3; ++p)
    if (ratios[static_cast<size_t>(p)] > 0.0 && sizes[p] == 0)
      throw ConfigError(std::string("split: ") + names[p] +
                        " ratio is positive but the partition is empty");

  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n0);
  out.val.assign(order.begin() + n0, order.begin() + n0 + n1);
  out.test.assign(order.begin() + n0 + n1, order.end());
  return out;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Dataset data;
  data.spec = spec;
  data.samples.reserve(static_cast<size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) data.samples.push_back(make_sample(spec, i));
  data.split = split_dataset(spec.count, spec.split, spec.seed);
  return data;
}

void save_dataset(const Dataset& data, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels");
  const int s = data.spec.size;
  for (int i = 0; i < static_cast<int>(data.samples.size()); ++i) {
    const Sample& sm = data.samples[static_cast<size_t>(i)];
    ImageU8 img = ImageU8::make(s, s, 3);
    const double* v = sm.image.data();
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        for (int ch = 0; ch < 3; ++ch)
          img.at(y, x, ch) =
              static_cast<uint8_t>(std::lround(v[(ch * s + y) * s + x] * 255.0));
    write_png((fs::path(dir) / "images" / (sample_stem(i) + ".png")).string(), img);

    ImageU8 lab = ImageU8::make(s, s, 1);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        lab.at(y, x, 0) = static_cast<uint8_t>(sm.label.at(0, y, x));
    write_pgm((fs::path(dir) / "labels" / (sample_stem(i) + ".pgm")).string(), lab);
  }

  json manifest{{"format", "synth-dataset-v1"},
                {"spec", json(data.spec)},
                {"split",
                 {{"train", data.split.train}, {"val", data.split.val}, {"test", data.split.test}}}};
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw DataError("failed to write dataset manifest in " + dir);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw DataError("missing dataset manifest in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad dataset manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "synth-dataset-v1")
    throw DataError("dataset manifest: unsupported format");

  Dataset data;
  data.spec = manifest.at("spec").get<SynthSpec>();
  data.spec.validate();
  const auto& sp = manifest.at("split");
  data.split.train = sp.at("train").get<std::vector<int>>();
  data.split.val = sp.at("val").get<std::vector<int>>();
  data.split.test = sp.at("test").get<std::vector<int>>();

  const int s = data.spec.size;
  data.samples.reserve(static_cast<size_t>(data.spec.count));
  for (int i = 0; i < data.spec.count; ++i) {
    const std::string stem = sample_stem(i);
    ImageU8 img = read_image((fs::path(dir) / "images" / (stem + ".png")).string());
    if (img.h != s || img.w != s || img.channels != 3)
      throw DataError("dataset image " + stem + ": unexpected geometry");
    ImageU8 lab = read_pgm((fs::path(dir) / "labels" / (stem + ".pgm")).string());
    if (lab.h != s || lab.w != s || lab.channels != 1)
      throw DataError("dataset labels " + stem + ": unexpected geometry");

    Sample sm;
    sm.image = Tensor::zeros({1, 3, s, s});
    double* v = sm.image.data();
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x)
        for (int ch = 0; ch < 3; ++ch)
          v[(ch * s + y) * s + x] = img.at(y, x, ch) / 255.0;
    sm.label = LabelMap::zeros(1, s, s);
    for (int y = 0; y < s; ++y)
      for (int x = 0; x < s; ++x) sm.label.at(0, y, x) = lab.at(y, x, 0);
    check_labels(sm.label, data.spec.num_classes, ("dataset labels " + stem).c_str());
    data.samples.push_back(std::move(sm));
  }
  return data;
}

}  // namespace dsraseg
