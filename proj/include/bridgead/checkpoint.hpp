// Copyright 2026 The BridgeAD Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef BRIDGEAD__CHECKPOINT_HPP_
#define BRIDGEAD__CHECKPOINT_HPP_

#include "bridgead/model.hpp"
#include "bridgead/run_config.hpp"

#include <filesystem>
#include <string>

namespace bridgead
{

/// File layout: 8-byte magic, little-endian u64 manifest length, JSON
/// manifest, then the raw row-major float64 payload of every parameter.
inline constexpr char kCheckpointMagic[9] = "BADCKPT1";

struct CheckpointInfo
{
  RunConfig config;  // as echoed at save time
  std::string config_hash;
  Stage stage{Stage::kEndToEnd};
  nlohmann::json manifest;
};

void save_checkpoint(const std::filesystem::path & path, const BridgeModel & model, const RunConfig & config);

/// Manifest and echoed config only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path & path);

/// Loads parameter values into `model`. Throws ConfigError unless the
/// manifest lists exactly the model's parameters with matching shapes.
CheckpointInfo load_checkpoint(const std::filesystem::path & path, BridgeModel & model);

}  // namespace bridgead

#endif  // BRIDGEAD__CHECKPOINT_HPP_
