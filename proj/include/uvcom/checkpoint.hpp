// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvcom/config.hpp"
#include "uvcom/params.hpp"

namespace uvcom {

/// Everything needed to resume or evaluate a run: weights, adaptive-moment
/// optimizer state (empty before the first step), the config snapshot and
/// the global step counter.
struct TrainState {
  TrainConfig config;
  ModelParams params;
  std::vector<Mat> adam_m;  ///< aligned with param_entries order
  std::vector<Mat> adam_v;
  std::int64_t step = 0;
};

/// Binary snapshot; raw float64 payloads make the round trip bit-exact on
/// one platform.
void save_checkpoint(const TrainState& state, const std::string& path);

/// Throws std::runtime_error on bad magic, version, or shape mismatches.
TrainState load_checkpoint(const std::string& path);

}  // namespace uvcom
