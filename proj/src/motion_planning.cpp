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

#include "bridgead/motion_planning.hpp"

#include "bridgead/perception.hpp"

#include <stdexcept>

namespace bridgead::planning
{
namespace
{

constexpr double kOffsetScale = 5.0;
constexpr double kPositionScale = 30.0;

nn::Var embed_rows(nn::Tape & tape, nn::Parameter & table, const std::vector<int> & rows)
{
  return nn::gather_rows(tape.parameter(table), rows);
}

/// Shared motion/plan history stack over queries laid out ((g * M + m) * T + s).
nn::Var run_history_stack(nn::Tape & tape, const nn::Var & queries, int groups, int modes, int steps,
                          const memory::HistoryFeatures & history, const HistoryStack & stack,
                          const StageSwitches & switches)
{
  const auto & slice = history.slice;
  if (slice.num_entries() != 0 && slice.leading() != static_cast<std::size_t>(groups * modes)) {
    throw std::invalid_argument("history stack: history slice is not aligned with the query set");
  }
  if (slice.steps > steps) {
    throw std::invalid_argument("history stack: more history steps than query steps");
  }
  nn::Var x = queries;
  if (switches.history_cross && history.features.valid() && history.features.rows() > 0) {
    nn::AttentionPattern pattern;
    std::vector<int> keys;
    for (int lead = 0; lead < groups * modes; ++lead) {
      for (int s = 0; s < steps; ++s) {
        keys.clear();
        if (s < slice.steps) {
          for (int k = 0; k < slice.lags; ++k) {
            const int row = history.entry_rows[static_cast<std::size_t>((lead * slice.lags + k) * slice.steps + s)];
            if (row >= 0) {
              keys.push_back(row);
            }
          }
        }
        pattern.add_query(keys);
      }
    }
    x = stack.history_cross(tape, x, history.features, pattern);
  }
  if (switches.step_self) {
    nn::AttentionPattern pattern;
    std::vector<int> keys(static_cast<std::size_t>(steps));
    for (int lead = 0; lead < groups * modes; ++lead) {
      for (int s = 0; s < steps; ++s) {
        keys[static_cast<std::size_t>(s)] = lead * steps + s;
      }
      for (int s = 0; s < steps; ++s) {
        pattern.add_query(keys);
      }
    }
    x = stack.step_self(tape, x, x, pattern);
  }
  if (switches.mode_self) {
    nn::AttentionPattern pattern;
    std::vector<int> keys(static_cast<std::size_t>(modes));
    for (int g = 0; g < groups; ++g) {
      for (int m = 0; m < modes; ++m) {
        for (int s = 0; s < steps; ++s) {
          for (int mm = 0; mm < modes; ++mm) {
            keys[static_cast<std::size_t>(mm)] = (g * modes + mm) * steps + s;
          }
          pattern.add_query(keys);
        }
      }
    }
    x = stack.mode_self(tape, x, x, pattern);
  }
  return x;
}

}  // namespace

HistoryStack HistoryStack::create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                                  std::mt19937_64 & rng)
{
  return HistoryStack{nn::AttentionBlock::create(store, name + ".history_cross", cfg.channels, cfg.heads, rng),
                      nn::AttentionBlock::create(store, name + ".step_self", cfg.channels, cfg.heads, rng),
                      nn::AttentionBlock::create(store, name + ".mode_self", cfg.channels, cfg.heads, rng)};
}

MotionHead MotionHead::create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                              std::mt19937_64 & rng)
{
  using Init = nn::ParameterStore::Init;
  MotionHead head;
  head.mode_embedding = &store.create(name + ".mode_embedding", cfg.motion_modes, cfg.channels, Init::kNormal, rng);
  head.step_embedding = &store.create(name + ".step_embedding", cfg.motion_steps, cfg.channels, Init::kNormal, rng);
  head.stack = HistoryStack::create(store, name + ".stack", cfg, rng);
  head.offset = nn::Linear::create(store, name + ".offset", cfg.channels, 2, rng);
  head.score = nn::Linear::create(store, name + ".score", cfg.channels, 1, rng);
  return head;
}

PlanHead PlanHead::create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                          std::mt19937_64 & rng)
{
  using Init = nn::ParameterStore::Init;
  PlanHead head;
  head.ego_query = &store.create(name + ".ego_query", 1, cfg.channels, Init::kNormal, rng);
  head.mode_embedding = &store.create(name + ".mode_embedding", cfg.plan_modes, cfg.channels, Init::kNormal, rng);
  head.step_embedding = &store.create(name + ".step_embedding", cfg.plan_steps, cfg.channels, Init::kNormal, rng);
  head.map_attn = nn::AttentionBlock::create(store, name + ".map_attn", cfg.channels, cfg.heads, rng);
  head.stack = HistoryStack::create(store, name + ".stack", cfg, rng);
  head.mot2plan = nn::AttentionBlock::create(store, name + ".mot2plan", cfg.channels, cfg.heads, rng);
  head.agent_position = nn::Mlp::create(store, name + ".agent_position", 2, cfg.channels, cfg.channels, rng);
  head.offset = nn::Linear::create(store, name + ".offset", cfg.channels, 2, rng);
  head.score = nn::Linear::create(store, name + ".score", cfg.channels, 1, rng);
  return head;
}

MotionQuerySet init_motion_queries(nn::Tape & tape, const nn::Var & object_queries, const MotionHead & head,
                                   int modes, int steps)
{
  MotionQuerySet mot;
  mot.agents = static_cast<int>(object_queries.rows());
  mot.modes = modes;
  mot.steps = steps;
  std::vector<int> agent_rows;
  std::vector<int> mode_rows;
  std::vector<int> step_rows;
  for (int n = 0; n < mot.agents; ++n) {
    for (int m = 0; m < modes; ++m) {
      for (int s = 0; s < steps; ++s) {
        agent_rows.push_back(n);
        mode_rows.push_back(m);
        step_rows.push_back(s);
      }
    }
  }
  mot.queries = nn::add(nn::add(nn::gather_rows(object_queries, agent_rows),
                                embed_rows(tape, *head.mode_embedding, mode_rows)),
                        embed_rows(tape, *head.step_embedding, step_rows));
  return mot;
}

MotionQuerySet history_enhanced_motion(nn::Tape & tape, const MotionQuerySet & mot,
                                       const memory::HistoryFeatures & m2m, const HistoryStack & stack,
                                       const StageSwitches & switches)
{
  if (m2m.slice.kind != memory::SliceKind::kMot2Mot) {
    throw std::invalid_argument("history_enhanced_motion: expected a motion history slice");
  }
  MotionQuerySet out = mot;
  out.queries = run_history_stack(tape, mot.queries, mot.agents, mot.modes, mot.steps, m2m, stack, switches);
  return out;
}

PlanQuerySet init_plan_queries(nn::Tape & tape, const nn::Var & map_queries, const PlanHead & head, int modes,
                               int steps)
{
  PlanQuerySet plan;
  plan.modes = modes;
  plan.steps = steps;
  plan.command_group = command_groups(modes);
  const nn::Var ego = tape.parameter(*head.ego_query);
  const nn::Var context =
    head.map_attn(tape, ego, map_queries, perception::dense_pattern(1, 0, static_cast<int>(map_queries.rows())));
  std::vector<int> ego_rows;
  std::vector<int> mode_rows;
  std::vector<int> step_rows;
  for (int m = 0; m < modes; ++m) {
    for (int s = 0; s < steps; ++s) {
      ego_rows.push_back(0);
      mode_rows.push_back(m);
      step_rows.push_back(s);
    }
  }
  plan.queries = nn::add(nn::add(nn::gather_rows(context, ego_rows), embed_rows(tape, *head.mode_embedding, mode_rows)),
                         embed_rows(tape, *head.step_embedding, step_rows));
  return plan;
}

PlanQuerySet history_enhanced_plan(nn::Tape & tape, const PlanQuerySet & plan, const memory::HistoryFeatures & p2p,
                                   const HistoryStack & stack, const StageSwitches & switches)
{
  if (p2p.slice.kind != memory::SliceKind::kPlan2Plan) {
    throw std::invalid_argument("history_enhanced_plan: expected a plan history slice");
  }
  PlanQuerySet out = plan;
  out.queries = run_history_stack(tape, plan.queries, 1, plan.modes, plan.steps, p2p, stack, switches);
  return out;
}

int argmax_first(const double * begin, const double * end)
{
  int best = 0;
  for (const double * p = begin + 1; p < end; ++p) {
    if (*p > begin[best]) {
      best = static_cast<int>(p - begin);
    }
  }
  return best;
}

SelectedMotion select_with_score(const MotionQuerySet & mot, int plan_steps)
{
  if (plan_steps > mot.steps) {
    throw std::invalid_argument("select_with_score: plan horizon exceeds motion horizon");
  }
  SelectedMotion sel;
  const nn::Mat & scores = mot.scores.value();
  std::vector<int> rows;
  for (int n = 0; n < mot.agents; ++n) {
    const double * s = scores.data() + n * mot.modes;
    const int m = argmax_first(s, s + mot.modes);
    sel.modes.push_back(m);
    for (int t = 0; t < plan_steps; ++t) {
      const int src = (n * mot.modes + m) * mot.steps + t;
      rows.push_back(src);
    }
  }
  sel.queries = nn::gather_rows(mot.queries, rows);
  sel.positions = nn::gather_rows(mot.trajs, rows);
  return sel;
}

PlanQuerySet mot2plan_interact(nn::Tape & tape, const PlanQuerySet & plan, const SelectedMotion & selected,
                               const PlanHead & head)
{
  const int agents = static_cast<int>(selected.modes.size());
  if (agents == 0) {
    return plan;
  }
  const nn::Var keys =
    nn::add(selected.queries, head.agent_position(tape, nn::scale(selected.positions, 1.0 / kPositionScale)));
  nn::AttentionPattern pattern;
  std::vector<int> step_keys(static_cast<std::size_t>(agents));
  for (int m = 0; m < plan.modes; ++m) {
    for (int s = 0; s < plan.steps; ++s) {
      for (int n = 0; n < agents; ++n) {
        step_keys[static_cast<std::size_t>(n)] = n * plan.steps + s;
      }
      pattern.add_query(step_keys);
    }
  }
  PlanQuerySet out = plan;
  out.queries = head.mot2plan(tape, plan.queries, keys, pattern);
  return out;
}

MotionQuerySet decode_motion(nn::Tape & tape, const MotionQuerySet & mot, const MotionHead & head)
{
  MotionQuerySet out = mot;
  out.trajs = nn::cumsum_blocks(nn::scale(head.offset(tape, mot.queries), kOffsetScale), mot.steps);
  out.scores = head.score(tape, nn::block_mean_rows(mot.queries, mot.steps));
  out.probs = nn::softmax_blocks(out.scores, mot.modes);
  return out;
}

PlanQuerySet decode_plan(nn::Tape & tape, const PlanQuerySet & plan, const PlanHead & head)
{
  PlanQuerySet out = plan;
  out.trajs = nn::cumsum_blocks(nn::scale(head.offset(tape, plan.queries), kOffsetScale), plan.steps);
  out.scores = head.score(tape, nn::block_mean_rows(plan.queries, plan.steps));
  out.probs = nn::softmax_blocks(out.scores, plan.modes / scene::kNumCommands);
  return out;
}

std::vector<int> command_groups(int plan_modes)
{
  if (plan_modes < scene::kNumCommands || plan_modes % scene::kNumCommands != 0) {
    throw std::invalid_argument("command_groups: plan modes must be a positive multiple of 3");
  }
  std::vector<int> groups;
  const int per_group = plan_modes / scene::kNumCommands;
  for (int m = 0; m < plan_modes; ++m) {
    groups.push_back(m / per_group);
  }
  return groups;
}

int select_by_command(const std::vector<double> & scores, const std::vector<int> & command_group,
                      scene::DrivingCommand command)
{
  const int group = static_cast<int>(command);
  if (group < 0 || group >= scene::kNumCommands) {
    throw std::invalid_argument("select_by_command: unknown driving command");
  }
  if (scores.size() != command_group.size()) {
    throw std::invalid_argument("select_by_command: scores and groups differ in length");
  }
  int best = -1;
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (command_group[m] == group && (best < 0 || scores[m] > scores[static_cast<std::size_t>(best)])) {
      best = static_cast<int>(m);
    }
  }
  if (best < 0) {
    throw std::invalid_argument("select_by_command: command group is empty");
  }
  return best;
}

int select_by_command(const PlanQuerySet & plan, scene::DrivingCommand command)
{
  const nn::Mat & s = plan.scores.value();
  return select_by_command(std::vector<double>(s.data(), s.data() + s.size()), plan.command_group, command);
}

std::vector<Vec2> plan_trajectory(const PlanQuerySet & plan, int mode)
{
  std::vector<Vec2> out;
  const nn::Mat & t = plan.trajs.value();
  for (int s = 0; s < plan.steps; ++s) {
    out.push_back({t(mode * plan.steps + s, 0), t(mode * plan.steps + s, 1)});
  }
  return out;
}

}  // namespace bridgead::planning
