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

#ifndef BRIDGEAD__MODEL_CONFIG_HPP_
#define BRIDGEAD__MODEL_CONFIG_HPP_

#include "bridgead/errors.hpp"

#include <string>

namespace bridgead
{

struct ModelConfig
{
  int channels{64};
  int max_objects{32};
  int map_queries{8};
  int map_points{10};
  int decoder_layers{2};
  int heads{1};
  int motion_modes{6};
  int motion_steps{12};
  int plan_modes{18};
  int plan_steps{6};
  int history_frames{3};
  int t_m2m{6};
  int t_p2p{3};
  double track_score_threshold{0.3};

  int plan_modes_per_command() const { return plan_modes / 3; }
  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Full-scale horizons: T_mot=12, T_plan=6, K=3, T_m2m=6, T_p2p=3, M_mot=6.
  void apply_paper_preset();

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

/// Each flag disables one history module by replacing it with identity.
struct AblationFlags
{
  bool mot2det{true};
  bool his_mot{true};
  bool his_plan{true};
  bool mot2plan{true};
  bool step_self_attn{true};
  bool mode_self_attn{true};

  bool any_history() const { return mot2det || his_mot || his_plan || mot2plan; }
  std::string mask_string() const;

  friend bool operator==(const AblationFlags &, const AblationFlags &) = default;
};

}  // namespace bridgead

#endif  // BRIDGEAD__MODEL_CONFIG_HPP_
