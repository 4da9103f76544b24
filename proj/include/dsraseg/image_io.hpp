// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsraseg {

// 8-bit image, rows interleaved; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int h = 0, w = 0, channels = 1;
  std::vector<uint8_t> pix;

  static ImageU8 make(int h, int w, int channels);
  uint8_t& at(int y, int x, int c = 0) {
    return pix[(static_cast<size_t>(y) * w + static_cast<size_t>(x)) * channels +
               static_cast<size_t>(c)];
  }
  uint8_t at(int y, int x, int c = 0) const {
    return pix[(static_cast<size_t>(y) * w + static_cast<size_t>(x)) * channels +
               static_cast<size_t>(c)];
  }
  bool operator==(const ImageU8& o) const = default;
};

// Reads .png (8-bit gray or RGB) or .pgm by extension. Throws DataError.
ImageU8 read_image(const std::string& path);

// PNG writer; picks gray/RGB from channels.
void write_png(const std::string& path, const ImageU8& img);

// Binary PGM (P5, maxval 255); channels must be 1. Label maps use this.
void write_pgm(const std::string& path, const ImageU8& img);
ImageU8 read_pgm(const std::string& path);

}  // namespace dsraseg
