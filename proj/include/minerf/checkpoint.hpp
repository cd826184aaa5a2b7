// Copyright 2026 The minerf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint file: one JSON header line terminated by '\n', then the raw
// little-endian float64 payload in header order. For every parameter the
// header lists three blocks (value, Adam first moment, Adam second moment)
// with their byte offsets relative to the payload start.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "minerf/config.hpp"
#include "minerf/model.hpp"

namespace minerf {

struct Checkpoint {
  RunConfig config;
  std::int64_t step = 0;
  Model model;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Fresh model for the run config and the identities of a dataset.
Checkpoint initial_checkpoint(const RunConfig& cfg, const std::vector<IdentitySlot>& identities);

}  // namespace minerf
