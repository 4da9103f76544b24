// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "dsraseg/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dsraseg {

namespace {

// Raw buffers are little-endian on disk regardless of host order.
void to_little_endian(std::vector<double>& buf) {
  if constexpr (std::endian::native == std::endian::little) {
    (void)buf;
  } else {
    for (double& d : buf) {
      uint64_t u;
      std::memcpy(&u, &d, 8);
      u = __builtin_bswap64(u);
      std::memcpy(&d, &u, 8);
    }
  }
}

std::string file_for(const std::string& name) {
  std::string f = name;
  for (char& c : f) {
    if (c == '/' || c == '\\') c = '_';
  }
  return f + ".bin";
}

}  // namespace

void save_archive(const std::string& dir, const NamedTensors& tensors) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  json manifest;
  manifest["format"] = "tensor-archive-v1";
  json entries = json::object();
  for (const auto& [name, t] : tensors) {
    if (!t.defined()) throw ConfigError("save_archive: undefined tensor '" + name + "'");
    const std::string file = file_for(name);
    entries[name] = {{"shape", t.shape()}, {"dtype", "float64"}, {"file", file}};

    std::vector<double> buf(t.data(), t.data() + t.numel());
    to_little_endian(buf);
    std::ofstream out(fs::path(dir) / file, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_archive: cannot open " + (fs::path(dir) / file).string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!out) throw DataError("save_archive: short write to " + file);
  }
  manifest["tensors"] = entries;
  // Record names in save order so loads are order-stable.
  json order = json::array();
  for (const auto& [name, t] : tensors) order.push_back(name);
  manifest["order"] = order;

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!mf) throw DataError("save_archive: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

NamedTensors load_archive(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / "manifest.json";
  std::ifstream mf(mpath);
  if (!mf) throw DataError("load_archive: missing manifest " + mpath.string());
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("load_archive: bad manifest " + mpath.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "tensor-archive-v1")
    throw DataError("load_archive: unsupported archive format in " + mpath.string());
  if (!manifest.contains("tensors") || !manifest["tensors"].is_object())
    throw DataError("load_archive: manifest lacks a tensors table");

  std::vector<std::string> names;
  if (manifest.contains("order")) {
    for (const auto& n : manifest["order"]) names.push_back(n.get<std::string>());
  } else {
    for (auto it = manifest["tensors"].begin(); it != manifest["tensors"].end(); ++it)
      names.push_back(it.key());
  }

  NamedTensors out;
  for (const auto& name : names) {
    if (!manifest["tensors"].contains(name))
      throw DataError("load_archive: order lists unknown tensor '" + name + "'");
    const json& e = manifest["tensors"][name];
    Shape shape;
    for (const auto& d : e.at("shape")) shape.push_back(d.get<int>());
    if (e.value("dtype", "") != "float64")
      throw DataError("load_archive: tensor '" + name + "' has unsupported dtype");
    const fs::path fpath = fs::path(dir) / e.at("file").get<std::string>();
    std::ifstream in(fpath, std::ios::binary);
    if (!in) throw DataError("load_archive: missing tensor file " + fpath.string());
    const int64_t n = shape_numel(shape);
    std::vector<double> buf(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * 8)) {
      throw DataError("load_archive: " + fpath.string() + " holds fewer than " +
                      std::to_string(n) + " float64 values");
    }
    char extra;
    if (in.read(&extra, 1))
      throw DataError("load_archive: " + fpath.string() + " is larger than its manifest shape");
    to_little_endian(buf);  // self-inverse swap on big-endian hosts
    out.emplace_back(name, Tensor::from_data(shape, std::move(buf)));
  }
  return out;
}

}  // namespace dsraseg
