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

#include "bridgead/model_config.hpp"

namespace bridgead
{
namespace
{

void require(bool ok, const std::string & field, const std::string & message)
{
  if (!ok) {
    throw ConfigError("model." + field + ": " + message);
  }
}

}  // namespace

void ModelConfig::validate() const
{
  require(channels > 0, "channels", "must be positive");
  require(heads >= 1 && heads <= 4, "heads", "must be in [1, 4]");
  require(channels % heads == 0, "channels", "must be divisible by heads");
  require(max_objects >= 1, "max_objects", "must be positive");
  require(map_queries >= 1, "map_queries", "must be positive");
  require(map_points >= 2, "map_points", "must be at least 2");
  require(decoder_layers >= 1, "decoder_layers", "must be at least 1");
  require(motion_modes >= 1, "motion_modes", "must be positive");
  require(motion_steps >= 1, "motion_steps", "must be positive");
  require(plan_modes >= 3 && plan_modes % 3 == 0, "plan_modes", "must be a positive multiple of 3 (one group per command)");
  require(plan_steps >= 1 && plan_steps <= motion_steps, "plan_steps", "must be in [1, motion_steps]");
  require(history_frames >= 1, "history_frames", "must be positive");
  require(t_m2m >= 1 && t_m2m <= motion_steps - history_frames, "t_m2m",
          std::to_string(t_m2m) + " exceeds motion_steps - history_frames = " +
            std::to_string(motion_steps - history_frames));
  require(t_p2p >= 1 && t_p2p <= plan_steps - history_frames, "t_p2p",
          std::to_string(t_p2p) + " exceeds plan_steps - history_frames = " +
            std::to_string(plan_steps - history_frames));
  require(track_score_threshold >= 0.0 && track_score_threshold <= 1.0, "track_score_threshold", "must be in [0, 1]");
}

void ModelConfig::apply_paper_preset()
{
  motion_steps = 12;
  plan_steps = 6;
  history_frames = 3;
  t_m2m = 6;
  t_p2p = 3;
  motion_modes = 6;
}

std::string AblationFlags::mask_string() const
{
  std::string s;
  for (const bool f : {mot2det, his_mot, his_plan, mot2plan, step_self_attn, mode_self_attn}) {
    s += f ? '1' : '0';
  }
  return s;
}

}  // namespace bridgead
