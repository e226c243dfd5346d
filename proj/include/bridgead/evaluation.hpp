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


#ifndef BRIDGEAD__EVALUATION_HPP_
#define BRIDGEAD__EVALUATION_HPP_

#include "bridgead/geometry.hpp"
#include "bridgead/model.hpp"
#include "bridgead/scene.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace bridgead::evaluation
{

/// 1 s, 2 s and 3 s at 2 Hz.
inline constexpr std::array<int, 3> kHorizonSteps{2, 4, 6};
inline constexpr double kMissThreshold = 2.0;

enum class L2Convention { kAverage, kAtStep };

/// Mean per-step displacement over steps 1..horizon_steps (kAverage), or
/// the displacement at step horizon_steps (kAtStep).
double l2_error(const std::vector<Vec2> & plan, const std::vector<Vec2> & gt, int horizon_steps,
                L2Convention convention = L2Convention::kAverage);

struct Footprint
{
  double length{4.08};
  double width{1.73};
};

/// Heading of each waypoint: direction to the next waypoint; the last one and
/// zero-length segments reuse the previous heading (`initial` before the first).
std::vector<double> plan_headings(const std::vector<Vec2> & plan, double initial = 0.0);

/// Ground-truth agent boxes per future step; `boxes[s]` lists the agents
/// valid at step s + 1.
using FutureBoxes = std::vector<std::vector<OrientedBox2>>;
FutureBoxes agent_future_boxes(const scene::ObservationFrame & frame, int steps);

/// True if the ego footprint along `plan` overlaps an agent box at any step <= horizon_steps.
bool plan_collides(const std::vector<Vec2> & plan, const Footprint & ego, const FutureBoxes & agents, int horizon_steps);

/// Fraction of samples whose plan collides within the horizon.
double collision_rate(const std::vector<std::vector<Vec2>> & plans, const Footprint & ego,
                      const std::vector<FutureBoxes> & agents, int horizon_steps);

struct MotionMetrics
{
  double ade{0.0};
  double fde{0.0};
  double mr{0.0};
  int agents{0};
};

struct AgentPrediction
{
  nn::Mat trajs;  // M*T x 2, row m * T + s
  int modes{0};
  std::vector<Vec2> gt;
  std::vector<std::uint8_t> mask;
};

/// minADE / minFDE (final valid step) / miss rate over agents with at least one valid step.
MotionMetrics motion_metrics(const std::vector<AgentPrediction> & agents);

/// 5 if no collision, else 4 * max(0, 1 - v_i / v_r). Throws when collided with v_r <= 0.
double nns_score(bool collided, double v_i, double v_r);

// ---------------------------------------------------------------------------
// Open loop

struct ScenarioOpenLoop
{
  std::string scenario_id;
  std::array<double, 3> l2{};
  std::array<double, 3> l2_at{};
  std::array<double, 3> collision{};
  std::array<int, 3> frames{};
  MotionMetrics motion;
};

struct OpenLoopReport
{
  std::array<double, 3> l2{};
  double l2_avg{0.0};
  /// At-step convention, reported separately.
  std::array<double, 3> l2_at{};
  double l2_at_avg{0.0};
  std::array<double, 3> collision{};
  double collision_avg{0.0};
  MotionMetrics motion;
  std::array<int, 3> frames{};
  std::vector<ScenarioOpenLoop> scenarios;
};

struct LabeledSequence
{
  std::string scenario_id;
  std::vector<scene::ObservationFrame> frames;
};

/// Runs the model over every scenario (fresh memory per scenario); per-frame
/// counting, a horizon is counted where the ego ground truth covers it.
OpenLoopReport evaluate_open_loop(const BridgeModel & model, const std::vector<LabeledSequence> & data,
                                  const AblationFlags & flags, const Footprint & ego = {});

// ---------------------------------------------------------------------------
// Closed loop

class Policy
{
public:
  virtual ~Policy() = default;
  virtual void reset() {}
  /// Planned waypoints (ego frame, 2 Hz) from the current observation. The
  /// ego state is only available to scripted policies.
  virtual std::vector<Vec2> plan(const scene::ObservationFrame & frame, const scene::EgoState & ego) = 0;
  /// Keeps the initial velocity instead of tracking waypoints.
  virtual bool holds_velocity() const { return false; }
};

class NoActionPolicy : public Policy
{
public:
  std::vector<Vec2> plan(const scene::ObservationFrame & frame, const scene::EgoState & ego) override;
  bool holds_velocity() const override { return true; }
};

/// Straight-line braking to a stop at `decel`.
class BrakingPolicy : public Policy
{
public:
  explicit BrakingPolicy(double decel = 4.0, int steps = 6) : decel_(decel), steps_(steps) {}
  std::vector<Vec2> plan(const scene::ObservationFrame & frame, const scene::EgoState & ego) override;

private:
  double decel_;
  int steps_;
};

class ModelPolicy : public Policy
{
public:
  ModelPolicy(const BridgeModel & model, const AblationFlags & flags);
  void reset() override;
  std::vector<Vec2> plan(const scene::ObservationFrame & frame, const scene::EgoState & ego) override;

private:
  const BridgeModel & model_;
  AblationFlags flags_;
  StreamState state_;
};

struct ClosedLoopConfig
{
  scene::NoiseConfig noise;
  double control_dt{0.1};
  double accel_limit{4.0};
  double yaw_rate_limit{0.5};
  std::uint64_t stream{7};
};

struct TraceStep
{
  double time{0.0};
  Pose2 ego_pose;
  double speed{0.0};
};

struct RolloutResult
{
  bool collided{false};
  double impact_speed{0.0};
  int collided_with{-1};
  std::vector<TraceStep> trace;
};

struct ClosedLoopResult
{
  double nns{5.0};
  bool collided{false};
  double v_i{0.0};
  double v_r{0.0};
  bool reference_collided{false};
  RolloutResult rollout;
};

/// One rollout of `policy` (reset first). Throws std::runtime_error on non-finite waypoints.
RolloutResult simulate(Policy & policy, const scene::Scenario & scenario, const ClosedLoopConfig & cfg);

/// Policy rollout plus the no-action reference rollout, scored with NNS. A
/// collision where the reference stays collision-free scores 0.
ClosedLoopResult run_closed_loop(Policy & policy, const scene::Scenario & scenario, const ClosedLoopConfig & cfg);

// ---------------------------------------------------------------------------
// Report files

nlohmann::json to_json(const OpenLoopReport & report);
nlohmann::json to_json(const ClosedLoopResult & result, bool with_trace = false);

/// Rows of (scenario_id, metric, horizon, value); the first line is a
/// "# config_hash: <hash>" comment.
void write_open_loop_csv(const OpenLoopReport & report, const std::filesystem::path & path,
                         const std::string & config_hash);
void write_closed_loop_csv(const std::vector<std::pair<std::string, ClosedLoopResult>> & results,
                           const std::filesystem::path & path, const std::string & config_hash);

}  // namespace bridgead::evaluation

#endif  // BRIDGEAD__EVALUATION_HPP_
