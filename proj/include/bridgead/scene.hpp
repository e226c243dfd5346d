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

#ifndef BRIDGEAD__SCENE_HPP_
#define BRIDGEAD__SCENE_HPP_

#include "bridgead/errors.hpp"
#include "bridgead/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bridgead::scene
{

using bridgead::ConfigError;

enum class AgentClass { kCar = 0, kPedestrian = 1 };
enum class Behavior { kConstantVelocity, kLaneFollow, kScriptedAdversary };
enum class MapClass { kDivider = 0, kCrossing = 1, kBoundary = 2 };
enum class DrivingCommand { kLeft = 0, kRight = 1, kStraight = 2 };
enum class ScenarioTemplate { kOpenLoopRandom, kFrontalAdversary, kSideAdversary, kStationaryBlockage };

inline constexpr int kNumMapClasses = 3;
inline constexpr int kNumCommands = 3;
inline constexpr double kFrameDt = 0.5;

std::string to_string(AgentClass c);
std::string to_string(Behavior b);
std::string to_string(MapClass c);
std::string to_string(DrivingCommand c);
std::string to_string(ScenarioTemplate t);
AgentClass agent_class_from_string(const std::string & s);
Behavior behavior_from_string(const std::string & s);
MapClass map_class_from_string(const std::string & s);
DrivingCommand command_from_string(const std::string & s);
ScenarioTemplate template_from_string(const std::string & s);

/// Constant-curvature road reference line. Station s runs along the line,
/// offset d is positive to the left.
struct RoadSpec
{
  Pose2 origin;
  double curvature{0.0};
  double lane_width{3.5};
  double length{200.0};
  std::optional<double> crossing_station;

  friend bool operator==(const RoadSpec &, const RoadSpec &) = default;

  Pose2 pose_at(double station, double offset) const;
  /// (station, offset) of a world point.
  Vec2 project(const Vec2 & p) const;
  double heading_at(double station) const { return normalize_angle(origin.yaw + curvature * station); }
};

struct AccelSegment
{
  double t_start{0.0};
  double accel{0.0};
  friend bool operator==(const AccelSegment &, const AccelSegment &) = default;
};

/// One agent; `pose`/`speed` are the current state, the rest is behaviour data.
struct AgentTruth
{
  int agent_id{0};
  AgentClass cls{AgentClass::kCar};
  Pose2 pose;
  double speed{0.0};
  double length{4.5};
  double width{1.9};
  Behavior behavior{Behavior::kConstantVelocity};

  // lane_follow: lane offset, travel direction (+1 along the road), current
  // station and a piecewise-constant acceleration schedule.
  double lane_offset{0.0};
  int direction{1};
  double station{0.0};
  std::vector<AccelSegment> accel_profile;

  // scripted_adversary: straight line from `path_origin`, cruise, then a
  // constant deceleration that halts after `stop_distance` metres.
  Pose2 path_origin;
  double cruise_speed{0.0};
  double stop_distance{0.0};
  double stop_decel{3.0};

  friend bool operator==(const AgentTruth &, const AgentTruth &) = default;
};

struct MapPolyline
{
  MapClass cls{MapClass::kDivider};
  std::vector<Vec2> points;
  friend bool operator==(const MapPolyline &, const MapPolyline &) = default;
};

struct VectorMap
{
  std::vector<MapPolyline> polylines;
  friend bool operator==(const VectorMap &, const VectorMap &) = default;
};

struct EgoSpec
{
  Pose2 pose;
  double speed{8.0};
  double desired_speed{10.0};
  double lane_offset{-1.75};
  double length{4.08};
  double width{1.73};
  std::vector<Vec2> route;
  friend bool operator==(const EgoSpec &, const EgoSpec &) = default;
};

struct Scenario
{
  std::uint64_t seed{0};
  ScenarioTemplate templ{ScenarioTemplate::kOpenLoopRandom};
  RoadSpec road;
  VectorMap map;
  std::vector<AgentTruth> agents;
  EgoSpec ego;
  std::vector<DrivingCommand> commands;
  double duration_s{10.0};
  double frame_dt{kFrameDt};

  std::size_t frame_count() const;
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

/// Generation knobs for the procedural templates.
struct SceneConfig
{
  int min_agents{1};
  int max_agents{8};
  double duration_s{10.0};
  double adversary_duration_s{12.0};

  friend bool operator==(const SceneConfig &, const SceneConfig &) = default;
};

Scenario generate_scenario(std::uint64_t seed, ScenarioTemplate templ, const SceneConfig & config = {});

enum class EgoMode { kExpert, kExternal };

struct EgoState
{
  Pose2 pose;
  double speed{0.0};
  double station{0.0};
  double lane_offset{0.0};
  double desired_speed{10.0};
  double length{4.08};
  double width{1.73};
};

struct WorldState
{
  RoadSpec road;
  double time{0.0};
  std::vector<AgentTruth> agents;
  EgoState ego;
  EgoMode ego_mode{EgoMode::kExpert};
};

WorldState initial_world(const Scenario & scenario, EgoMode mode = EgoMode::kExpert);
/// Advances every agent by its behaviour; the ego follows the expert
/// car-following model unless externally controlled. Throws on dt <= 0.
WorldState step_world(const WorldState & state, double dt);
/// World states at every frame time of the scenario (expert ego).
std::vector<WorldState> rollout(const Scenario & scenario);

/// World-frame footprint of an agent.
OrientedBox2 agent_box(const AgentTruth & agent);
Vec2 agent_velocity(const AgentTruth & agent);
OrientedBox2 ego_box(const EgoState & ego);

// ---------------------------------------------------------------------------
// Observations

/// {x, y, z, ln w, ln h, ln l, sin yaw, cos yaw, vx, vy, vz}
using Box11 = std::array<double, 11>;
inline constexpr std::size_t kBoxDim = 11;

struct NoiseConfig
{
  double pos_std_car{0.3};
  double pos_std_ped{0.15};
  double yaw_std{0.05};
  double vel_std_car{0.8};
  double vel_std_ped{0.3};
  double size_std{0.03};
  double map_std{0.1};
  double dropout{0.05};
  double clutter_rate{0.1};
  double range{50.0};

  static NoiseConfig none();

  friend bool operator==(const NoiseConfig &, const NoiseConfig &) = default;
};

struct ObservedAgent
{
  int agent_id{0};
  AgentClass cls{AgentClass::kCar};
  Box11 box{};
  friend bool operator==(const ObservedAgent &, const ObservedAgent &) = default;
};

/// Ground truth for one agent at the observation time, in the ego frame.
struct AgentGroundTruth
{
  int agent_id{0};
  AgentClass cls{AgentClass::kCar};
  Box11 box{};
  double length{0.0};
  double width{0.0};
  std::vector<Vec2> future;       // steps 1..T
  std::vector<double> future_yaw;
  std::vector<std::uint8_t> future_mask;
  friend bool operator==(const AgentGroundTruth &, const AgentGroundTruth &) = default;
};

struct ObservationFrame
{
  int frame_index{0};
  double timestamp{0.0};
  Pose2 ego_pose;
  DrivingCommand command{DrivingCommand::kStraight};
  std::vector<ObservedAgent> agents;
  std::vector<MapPolyline> map;

  std::vector<AgentGroundTruth> gt_agents;
  std::vector<MapPolyline> gt_map;
  std::vector<Vec2> gt_ego_future;
  std::vector<std::uint8_t> gt_ego_mask;

  friend bool operator==(const ObservationFrame &, const ObservationFrame &) = default;
};

/// Noisy ego-frame observation of a world state; deterministic in `rng_seed`.
ObservationFrame observe(const WorldState & state, const NoiseConfig & noise, std::uint64_t rng_seed);

/// Fills ground-truth futures (ego frame of `frames[index]`) from a rollout.
/// Steps past the end of the rollout are masked out.
void attach_futures(ObservationFrame & frame, const std::vector<WorldState> & frames, std::size_t index,
                    int agent_steps, int ego_steps);

/// Seed for frame `index` of a scenario observed with stream `stream`.
std::uint64_t observation_seed(std::uint64_t scenario_seed, std::size_t index, std::uint64_t stream = 0);

/// Observation frames of a scenario with ground truth attached.
std::vector<ObservationFrame> observe_scenario(const Scenario & scenario, const NoiseConfig & noise, int agent_steps,
                                               int ego_steps, std::uint64_t stream = 0);

Box11 box_from_pose(const Pose2 & pose, const Vec2 & velocity, double length, double width, double height);

}  // namespace bridgead::scene

#endif  // BRIDGEAD__SCENE_HPP_
