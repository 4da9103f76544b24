// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "dsraseg/net.hpp"
#include "dsraseg/supervision.hpp"
#include "dsraseg/synth.hpp"
#include "dsraseg/trainer.hpp"

namespace dsraseg {

// JSON bindings for the user-facing config structs. Missing keys keep their
// defaults; unknown keys are rejected so typos fail loudly instead of being
// silently ignored.

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

void to_json(nlohmann::json& j, const LossSpec& s);
void from_json(const nlohmann::json& j, LossSpec& s);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

// Parses a JSON file; DataError if unreadable, ConfigError if malformed.
nlohmann::json load_json_file(const std::string& path);

}  // namespace dsraseg
