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

#ifndef BRIDGEAD__MODEL_HPP_
#define BRIDGEAD__MODEL_HPP_

#include "bridgead/memory_bank.hpp"
#include "bridgead/model_config.hpp"
#include "bridgead/motion_planning.hpp"
#include "bridgead/perception.hpp"

#include <cstdint>
#include <optional>

namespace bridgead
{

enum class Stage { kPerception, kEndToEnd };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string & s);

/// All trainable modules. Parameter names are grouped by prefix:
/// perception.*, memory.*, motion.*, planning.*.
class BridgeModel
{
public:
  BridgeModel(const ModelConfig & config, std::uint64_t seed);
  BridgeModel(const BridgeModel &) = delete;
  BridgeModel & operator=(const BridgeModel &) = delete;

  const ModelConfig & config() const { return config_; }
  nn::ParameterStore & store() { return store_; }
  const nn::ParameterStore & store() const { return store_; }

  perception::ObservationEncoder encoder;
  perception::DetectionDecoder decoder;
  perception::Mot2DetFusion fusion;
  perception::MapHead map;
  memory::CompensationEncoder comp_m2d;
  memory::CompensationEncoder comp_m2m;
  memory::CompensationEncoder comp_p2p;
  planning::MotionHead motion;
  planning::PlanHead plan;

private:
  ModelConfig config_;
  nn::ParameterStore store_;
};

/// Per-scenario streaming state: the memory queue and the track table.
struct StreamState
{
  explicit StreamState(std::size_t history_frames = 3) : queue(history_frames) {}
  memory::MemoryQueue queue;
  perception::TrackTable tracks;

  void reset()
  {
    queue.clear();
    tracks = {};
  }
};

struct FrameOutput
{
  int frame_index{0};
  perception::ObjectQuerySet objects;
  perception::MapQuerySet map;
  bool has_planning{false};
  planning::MotionQuerySet motion;  // trajs in the ego frame
  planning::PlanQuerySet plan;
  int selected_plan_mode{-1};
  std::vector<Vec2> selected_plan;
};

/// Runs one frame and, in the end-to-end stage, pushes its detached outputs
/// into `state.queue`.
FrameOutput run_frame(nn::Tape & tape, const BridgeModel & model, const scene::ObservationFrame & frame,
                      StreamState & state, const AblationFlags & flags, Stage stage = Stage::kEndToEnd);

/// Detached cache of a frame's motion and planning outputs.
memory::FrameCache make_frame_cache(const FrameOutput & out, const scene::ObservationFrame & frame);

}  // namespace bridgead

#endif  // BRIDGEAD__MODEL_HPP_
