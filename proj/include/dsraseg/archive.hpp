// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dsraseg/tensor.hpp"

namespace dsraseg {

// Tensor archive: a directory holding one raw little-endian float64 binary
// per tensor plus manifest.json mapping name -> {shape, dtype, file}.
// Round-trips are bitwise exact; checkpoints build on this format.

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_archive(const std::string& dir, const NamedTensors& tensors);

// Loads every tensor listed in the manifest, in manifest order.
// Throws DataError on missing files, size mismatches, or a bad manifest.
NamedTensors load_archive(const std::string& dir);

}  // namespace dsraseg
