// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file: magic "SBVQ", version u32, parameter count u32, then per
// parameter: name length u16 + UTF-8 name, rank u8, dims (u32 each),
// little-endian float32 payload.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbvqa/params.hpp"

namespace sbvqa {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterSet& params, const std::string& path);

std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

/// Loads values into an existing parameter set; names and shapes must match.
void load_checkpoint(ParameterSet& params, const std::string& path);

}  // namespace sbvqa
