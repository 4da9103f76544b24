// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dsraseg {

// Invalid configuration: bad shapes, ratios, widths, flag values. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or malformed data on disk: datasets, checkpoints, images. CLI exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure at runtime: NaN/Inf loss, non-deterministic function under
// gradcheck, consumed tape. CLI exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dsraseg
