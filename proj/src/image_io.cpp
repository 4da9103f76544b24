// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "dsraseg/errors.hpp"

namespace dsraseg {

ImageU8 ImageU8::make(int h, int w, int channels) {
  if (h <= 0 || w <= 0 || (channels != 1 && channels != 3))
    throw ConfigError("ImageU8: bad extent or channel count");
  ImageU8 img;
  img.h = h;
  img.w = w;
  img.channels = channels;
  img.pix.assign(static_cast<size_t>(h) * w * channels, 0);
  return img;
}

namespace {

bool has_suffix(const std::string& s, const char* suf) {
  const std::string x(suf);
  if (s.size() < x.size()) return false;
  for (size_t i = 0; i < x.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - x.size() + i])) != x[i]) return false;
  }
  return true;
}

ImageU8 read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw DataError("read_image: cannot read PNG " + path + ": " + image.message);
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageU8 out = ImageU8::make(static_cast<int>(image.height), static_cast<int>(image.width),
                              color ? 3 : 1);
  if (!png_image_finish_read(&image, nullptr, out.pix.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DataError("read_image: failed decoding PNG " + path + ": " + image.message);
  }
  return out;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
  if (has_suffix(path, ".pgm")) return read_pgm(path);
  if (has_suffix(path, ".png")) return read_png(path);
  throw DataError("read_image: unsupported format for " + path + " (expect .png or .pgm)");
}

void write_png(const std::string& path, const ImageU8& img) {
  if (img.h <= 0 || img.w <= 0) throw ConfigError("write_png: empty image");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.w);
  image.height = static_cast<png_uint_32>(img.h);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pix.data(), 0, nullptr))
    throw DataError("write_png: cannot write " + path + ": " + image.message);
}

void write_pgm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1) throw ConfigError("write_pgm: PGM is single-channel");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("write_pgm: cannot open " + path);
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pix.data()),
            static_cast<std::streamsize>(img.pix.size()));
  if (!out) throw DataError("write_pgm: short write to " + path);
}

ImageU8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("read_pgm: " + path + " is not binary PGM (P5)");
  auto next_int = [&](const char* what) {
    // Skip whitespace and '#' comment lines between header fields.
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
      if (c == '#') {
        while (c != EOF && c != '\n') c = in.get();
      }
      c = in.get();
    }
    if (c == EOF || !std::isdigit(c))
      throw DataError(std::string("read_pgm: bad ") + what + " in " + path);
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
      v = v * 10 + (c - '0');
      c = in.get();
    }
    if (v <= 0 || v > 1 << 20) throw DataError(std::string("read_pgm: bad ") + what + " in " + path);
    return static_cast<int>(v);
  };
  const int w = next_int("width");
  const int h = next_int("height");
  const int maxval = next_int("maxval");
  if (maxval != 255) throw DataError("read_pgm: " + path + " must use maxval 255");
  // next_int consumed exactly one whitespace byte after maxval (the loop
  // exits on it), so pixel data starts here.
  ImageU8 out = ImageU8::make(h, w, 1);
  in.read(reinterpret_cast<char*>(out.pix.data()), static_cast<std::streamsize>(out.pix.size()));
  if (in.gcount() != static_cast<std::streamsize>(out.pix.size()))
    throw DataError("read_pgm: truncated pixel data in " + path);
  return out;
}

}  // namespace dsraseg
