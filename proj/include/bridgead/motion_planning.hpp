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

#ifndef BRIDGEAD__MOTION_PLANNING_HPP_
#define BRIDGEAD__MOTION_PLANNING_HPP_

#include "bridgead/layers.hpp"
#include "bridgead/memory_bank.hpp"
#include "bridgead/model_config.hpp"
#include "bridgead/scene.hpp"

#include <vector>

namespace bridgead::planning
{

/// Multi-step motion queries; row ((n * M + m) * T + s) holds agent n, mode m, step s.
struct MotionQuerySet
{
  int agents{0};
  int modes{0};
  int steps{0};
  nn::Var queries;  // N*M*T x C
  nn::Var trajs;    // N*M*T x 2, ego frame
  nn::Var scores;   // N*M x 1 logits
  nn::Var probs;    // N*M x 1, softmax over modes per agent
};

/// Multi-step plan queries; row (m * T + s). Modes are grouped by command:
/// mode m belongs to group m / (M / 3) (0 left, 1 right, 2 straight).
struct PlanQuerySet
{
  int modes{0};
  int steps{0};
  nn::Var queries;  // M*T x C
  nn::Var trajs;    // M*T x 2
  nn::Var scores;   // M x 1 logits
  nn::Var probs;    // M x 1, softmax within each command group
  std::vector<int> command_group;
};

/// History stack: per-step history cross-attention, then step-
/// and mode-level self-attention, each a residual sublayer.
struct HistoryStack
{
  nn::AttentionBlock history_cross;
  nn::AttentionBlock step_self;
  nn::AttentionBlock mode_self;

  static HistoryStack create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                             std::mt19937_64 & rng);
};

struct StageSwitches
{
  bool history_cross{true};
  bool step_self{true};
  bool mode_self{true};
};

struct MotionHead
{
  nn::Parameter * mode_embedding{nullptr};  // M x C
  nn::Parameter * step_embedding{nullptr};  // T x C
  HistoryStack stack;
  nn::Linear offset;
  nn::Linear score;

  static MotionHead create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                           std::mt19937_64 & rng);
};

struct PlanHead
{
  nn::Parameter * ego_query{nullptr};       // 1 x C
  nn::Parameter * mode_embedding{nullptr};  // M_plan x C
  nn::Parameter * step_embedding{nullptr};  // T_plan x C
  nn::AttentionBlock map_attn;
  HistoryStack stack;
  nn::AttentionBlock mot2plan;
  nn::Mlp agent_position;
  nn::Linear offset;
  nn::Linear score;

  static PlanHead create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                         std::mt19937_64 & rng);
};

/// Object queries broadcast over modes and steps plus mode and step embeddings.
MotionQuerySet init_motion_queries(nn::Tape & tape, const nn::Var & object_queries, const MotionHead & head,
                                   int modes, int steps);

/// Updates `queries` only (trajectories and scores are left for decode_motion).
MotionQuerySet history_enhanced_motion(nn::Tape & tape, const MotionQuerySet & mot,
                                       const memory::HistoryFeatures & m2m, const HistoryStack & stack,
                                       const StageSwitches & switches);

/// Learned ego query, informed by the map queries, broadcast over plan modes and steps.
PlanQuerySet init_plan_queries(nn::Tape & tape, const nn::Var & map_queries, const PlanHead & head, int modes,
                               int steps);

PlanQuerySet history_enhanced_plan(nn::Tape & tape, const PlanQuerySet & plan, const memory::HistoryFeatures & p2p,
                                   const HistoryStack & stack, const StageSwitches & switches);

struct SelectedMotion
{
  nn::Var queries;              // N*T_plan x C, row n * T_plan + s
  std::vector<int> modes;       // chosen mode per agent
  nn::Var positions;            // N*T_plan x 2, decoded positions of the chosen mode
};

/// Per agent, the highest-scoring mode (lowest index on ties) and its first
/// `plan_steps` step queries.
SelectedMotion select_with_score(const MotionQuerySet & mot, int plan_steps);

/// Per-step cross-attention from plan queries at step s to the selected
/// agent queries at step s. Identity when there are no agents.
PlanQuerySet mot2plan_interact(nn::Tape & tape, const PlanQuerySet & plan, const SelectedMotion & selected,
                               const PlanHead & head);

/// Fills trajs (agent-centric cumulative offsets), scores and probs.
MotionQuerySet decode_motion(nn::Tape & tape, const MotionQuerySet & mot, const MotionHead & head);
PlanQuerySet decode_plan(nn::Tape & tape, const PlanQuerySet & plan, const PlanHead & head);

/// Highest-probability mode of the command's group (lowest index on ties).
int select_by_command(const std::vector<double> & scores, const std::vector<int> & command_group,
                      scene::DrivingCommand command);
int select_by_command(const PlanQuerySet & plan, scene::DrivingCommand command);
std::vector<Vec2> plan_trajectory(const PlanQuerySet & plan, int mode);

std::vector<int> command_groups(int plan_modes);
/// Index of the highest value in [begin, end), lowest index on ties.
int argmax_first(const double * begin, const double * end);

}  // namespace bridgead::planning

#endif  // BRIDGEAD__MOTION_PLANNING_HPP_
