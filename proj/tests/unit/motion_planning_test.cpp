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


#include "bridgead/model.hpp"
#include "bridgead/motion_planning.hpp"
#include "oracles/attention_oracle.hpp"
#include "oracles/gradient_cases.hpp"
#include "oracles/history_cases.hpp"
#include "oracles/model_fixtures.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace bridgead::planning
{
namespace
{

using testing::random_mat;
using testing::reference_block;
using testing::tiny_config;
using testing::dims_of;
using testing::features_or_empty;
using testing::history_keys;
using testing::motion_case;
using testing::plan_case;
using testing::MotionCase;
using testing::PlanCase;

constexpr StageSwitches kCrossOnly{true, false, false};
constexpr StageSwitches kStepOnly{false, true, false};
constexpr StageSwitches kModeOnly{false, false, true};

TEST(MotionQueries, ShapesAtFullScaleHorizons)
{
  auto cfg = tiny_config();
  cfg.plan_modes = 18;
  cfg.apply_paper_preset();
  BridgeModel model(cfg, 1);
  std::mt19937_64 rng(2);
  const int agents = 3;
  const auto c = static_cast<std::size_t>(cfg.channels);
  const auto queue = testing::random_queue(9, 3, agents, dims_of(cfg, agents), rng);
  const std::vector<int> ids{0, 1, 2};
  const auto m2d = memory::slice_m2d(queue, 9, ids, cfg.history_frames, c);
  const auto m2m = memory::slice_m2m(queue, 9, ids, 3, 6, 6, 12, c);
  const auto p2p = memory::slice_p2p(queue, 9, 3, 3, 18, 6, c);
  EXPECT_EQ(m2d.queries.shape(), (Shape{3, 3, c}));
  EXPECT_EQ(m2m.queries.shape(), (Shape{3, 6, 3, 6, c}));
  EXPECT_EQ(p2p.queries.shape(), (Shape{18, 3, 3, c}));

  nn::Tape tape(false);
  auto mot = init_motion_queries(tape, tape.constant(random_mat(agents, cfg.channels, rng)), model.motion, 6, 12);
  EXPECT_EQ(mot.queries.rows(), agents * 6 * 12);
  mot = decode_motion(tape, mot, model.motion);
  EXPECT_EQ(mot.trajs.rows(), agents * 6 * 12);
  EXPECT_EQ(mot.scores.rows(), agents * 6);
  auto plan = init_plan_queries(tape, tape.constant(random_mat(4, cfg.channels, rng)), model.plan, 18, 6);
  EXPECT_EQ(plan.queries.rows(), 18 * 6);
  EXPECT_EQ(plan.queries.cols(), cfg.channels);
  plan = decode_plan(tape, plan, model.plan);
  EXPECT_EQ(plan.scores.rows(), 18);
}

TEST(MotionQueries, StepsAndModesGetDistinctQueries)
{
  BridgeModel model(tiny_config(), 3);
  std::mt19937_64 rng(4);
  nn::Tape tape(false);
  const auto mot = init_motion_queries(tape, tape.constant(random_mat(2, 8, rng)), model.motion, 2, 6);
  const nn::Mat & q = mot.queries.value();
  for (nn::Index a = 0; a < q.rows(); ++a) {
    for (nn::Index b = a + 1; b < q.rows(); ++b) {
      ASSERT_FALSE(q.row(a) == q.row(b)) << a << " " << b;
    }
  }
  const auto plan = init_plan_queries(tape, tape.constant(random_mat(3, 8, rng)), model.plan, 3, 3);
  EXPECT_EQ(plan.command_group, (std::vector<int>{0, 1, 2}));
  EXPECT_FALSE(plan.queries.value().row(0) == plan.queries.value().row(1));
}

TEST(HistoryMotion, ColdStartCrossStageIsBitwiseIdentity)
{
  BridgeModel model(tiny_config(), 5);
  std::mt19937_64 rng(6);
  for (int agents : {0, 1, 3}) {
    nn::Tape tape(false);
    const auto mc = motion_case(tape, model, agents, rng, true);
    const auto out = history_enhanced_motion(tape, mc.mot, mc.m2m, model.motion.stack, kCrossOnly);
    EXPECT_TRUE(out.queries.value() == mc.mot.queries.value());
  }
}

TEST(HistoryMotion, CrossStageMatchesSubsetOracle)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 7);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> agents(1, 4);
  int attended = 0;
  for (int trial = 0; trial < 200; ++trial) {
    nn::Tape tape(false);
    const auto mc = motion_case(tape, model, agents(rng), rng);
    const auto out = history_enhanced_motion(tape, mc.mot, mc.m2m, model.motion.stack, kCrossOnly);
    const auto keys = history_keys(mc.m2m, mc.mot.agents * mc.mot.modes, mc.mot.steps);
    const nn::Mat expected = reference_block(model.motion.stack.history_cross, mc.mot.queries.value(),
                                             features_or_empty(mc.m2m, cfg.channels), keys);
    ASSERT_LT((out.queries.value() - expected).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    for (std::size_t r = 0; r < keys.size(); ++r) {
      const int step = static_cast<int>(r) % cfg.motion_steps;
      if (step >= cfg.t_m2m) {
        ASSERT_TRUE(out.queries.value().row(static_cast<nn::Index>(r)) ==
                    mc.mot.queries.value().row(static_cast<nn::Index>(r)));
      }
      attended += keys[r].empty() ? 0 : 1;
    }
  }
  EXPECT_GT(attended, 200);
}

TEST(HistoryMotion, StepAndModeSelfAttentionMatchOracle)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 9);
  std::mt19937_64 rng(10);
  nn::Tape tape(false);
  const auto mc = motion_case(tape, model, 3, rng);
  const int m = cfg.motion_modes;
  const int t = cfg.motion_steps;
  std::vector<std::vector<int>> step_keys;
  std::vector<std::vector<int>> mode_keys;
  for (int lead = 0; lead < 3 * m; ++lead) {
    for (int s = 0; s < t; ++s) {
      std::vector<int> sk(static_cast<std::size_t>(t));
      std::iota(sk.begin(), sk.end(), lead * t);
      step_keys.push_back(sk);
      std::vector<int> mk;
      for (int mm = 0; mm < m; ++mm) {
        mk.push_back(((lead / m) * m + mm) * t + s);
      }
      mode_keys.push_back(mk);
    }
  }
  const nn::Mat & q = mc.mot.queries.value();
  const auto step = history_enhanced_motion(tape, mc.mot, mc.m2m, model.motion.stack, kStepOnly);
  EXPECT_LT((step.queries.value() - reference_block(model.motion.stack.step_self, q, q, step_keys)).cwiseAbs().maxCoeff(),
            1e-12);
  const auto mode = history_enhanced_motion(tape, mc.mot, mc.m2m, model.motion.stack, kModeOnly);
  EXPECT_LT((mode.queries.value() - reference_block(model.motion.stack.mode_self, q, q, mode_keys)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(HistoryMotion, RejectsWrongSliceKind)
{
  BridgeModel model(tiny_config(), 11);
  std::mt19937_64 rng(12);
  nn::Tape tape(false);
  auto mc = motion_case(tape, model, 2, rng);
  mc.m2m.slice.kind = memory::SliceKind::kPlan2Plan;
  EXPECT_THROW(history_enhanced_motion(tape, mc.mot, mc.m2m, model.motion.stack, {}), std::invalid_argument);
}

TEST(HistoryPlan, ColdStartCrossStageIsBitwiseIdentity)
{
  BridgeModel model(tiny_config(), 13);
  std::mt19937_64 rng(14);
  nn::Tape tape(false);
  const auto pc = plan_case(tape, model, rng, true);
  const auto out = history_enhanced_plan(tape, pc.plan, pc.p2p, model.plan.stack, kCrossOnly);
  EXPECT_TRUE(out.queries.value() == pc.plan.queries.value());
}

TEST(HistoryPlan, CrossStageMatchesSubsetOracle)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 15);
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    nn::Tape tape(false);
    const auto pc = plan_case(tape, model, rng);
    const auto out = history_enhanced_plan(tape, pc.plan, pc.p2p, model.plan.stack, kCrossOnly);
    const auto keys = history_keys(pc.p2p, cfg.plan_modes, cfg.plan_steps);
    const nn::Mat expected = reference_block(model.plan.stack.history_cross, pc.plan.queries.value(),
                                             features_or_empty(pc.p2p, cfg.channels), keys);
    ASSERT_LT((out.queries.value() - expected).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
  }
}

// ---------------------------------------------------------------------------
// SelectWithScore and Mot2Plan

MotionQuerySet scored_motion(nn::Tape & tape, const nn::Mat & scores, int steps, std::mt19937_64 & rng)
{
  MotionQuerySet mot;
  mot.modes = 3;
  mot.agents = static_cast<int>(scores.rows()) / mot.modes;
  mot.steps = steps;
  mot.queries = tape.constant(random_mat(scores.rows() * steps, 8, rng));
  mot.trajs = tape.constant(random_mat(scores.rows() * steps, 2, rng));
  mot.scores = tape.constant(scores);
  return mot;
}

TEST(SelectWithScore, PicksArgmaxWithLowestIndexOnTies)
{
  std::mt19937_64 rng(17);
  nn::Tape tape(false);
  nn::Mat scores(9, 1);
  scores << 0.1, 0.7, 0.3,   // clear winner
    0.5, 0.2, 0.5,           // tie -> lowest index
    -1.0, -1.0, -1.0;        // all tied
  const auto mot = scored_motion(tape, scores, 4, rng);
  const auto sel = select_with_score(mot, 2);
  EXPECT_EQ(sel.modes, (std::vector<int>{1, 0, 0}));
  ASSERT_EQ(sel.queries.rows(), 6);
  for (int n = 0; n < 3; ++n) {
    for (int s = 0; s < 2; ++s) {
      const auto src = (n * 3 + sel.modes[static_cast<std::size_t>(n)]) * 4 + s;
      EXPECT_TRUE(sel.queries.value().row(n * 2 + s) == mot.queries.value().row(src));
      EXPECT_TRUE(sel.positions.value().row(n * 2 + s) == mot.trajs.value().row(src));
    }
  }
  EXPECT_THROW(select_with_score(mot, 5), std::invalid_argument);
}

TEST(SelectWithScore, InvariantToScoreShift)
{
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    nn::Tape tape(false);
    const nn::Mat scores = random_mat(12, 1, rng);
    const auto a = select_with_score(scored_motion(tape, scores, 3, rng), 3);
    const auto b = select_with_score(scored_motion(tape, (scores.array() + 7.25).matrix(), 3, rng), 3);
    EXPECT_EQ(a.modes, b.modes);
  }
}

SelectedMotion random_selection(int agents, int steps, std::mt19937_64 & rng, nn::Tape & tape)
{
  SelectedMotion sel;
  sel.queries = tape.constant(random_mat(agents * steps, 8, rng));
  sel.positions = tape.constant(random_mat(agents * steps, 2, rng, 10.0));
  sel.modes.assign(static_cast<std::size_t>(agents), 0);
  return sel;
}

TEST(Mot2Plan, NoAgentsIsIdentity)
{
  BridgeModel model(tiny_config(), 19);
  std::mt19937_64 rng(20);
  nn::Tape tape(false);
  const auto pc = plan_case(tape, model, rng, true);
  const auto out = mot2plan_interact(tape, pc.plan, random_selection(0, 3, rng, tape), model.plan);
  EXPECT_TRUE(out.queries.value() == pc.plan.queries.value());
}

TEST(Mot2Plan, MatchesPerStepOracle)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 21);
  std::mt19937_64 rng(22);
  for (int agents = 1; agents <= 5; ++agents) {
    nn::Tape tape(false);
    const auto pc = plan_case(tape, model, rng, true);
    const auto sel = random_selection(agents, cfg.plan_steps, rng, tape);
    const auto out = mot2plan_interact(tape, pc.plan, sel, model.plan);
    const nn::Mat kv = sel.queries.value() + testing::apply_mlp(model.plan.agent_position, sel.positions.value() / 30.0);
    std::vector<std::vector<int>> keys;
    for (int m = 0; m < cfg.plan_modes; ++m) {
      for (int s = 0; s < cfg.plan_steps; ++s) {
        std::vector<int> k;
        for (int n = 0; n < agents; ++n) {
          k.push_back(n * cfg.plan_steps + s);
        }
        keys.push_back(k);
      }
    }
    const nn::Mat expected = reference_block(model.plan.mot2plan, pc.plan.queries.value(), kv, keys);
    EXPECT_LT((out.queries.value() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mot2Plan, StepsOnlySeeTheirOwnStep)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 23);
  std::mt19937_64 rng(24);
  nn::Tape tape(false);
  const auto pc = plan_case(tape, model, rng, true);
  const auto sel = random_selection(3, cfg.plan_steps, rng, tape);
  auto moved = sel;
  nn::Mat q = sel.queries.value();
  q.row(1 * cfg.plan_steps + 2) += random_mat(1, 8, rng);
  moved.queries = tape.constant(q);
  nn::Mat pos = sel.positions.value();
  pos(1 * cfg.plan_steps + 2, 0) += 3.0;
  moved.positions = tape.constant(pos);
  const auto a = mot2plan_interact(tape, pc.plan, sel, model.plan).queries.value();
  const auto b = mot2plan_interact(tape, pc.plan, moved, model.plan).queries.value();
  for (int m = 0; m < cfg.plan_modes; ++m) {
    for (int s = 0; s < cfg.plan_steps; ++s) {
      const auto r = m * cfg.plan_steps + s;
      EXPECT_EQ(a.row(r) == b.row(r), s != 2) << "mode " << m << " step " << s;
    }
  }
}

TEST(Mot2Plan, AgentOrderDoesNotMatter)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 25);
  std::mt19937_64 rng(26);
  nn::Tape tape(false);
  const auto pc = plan_case(tape, model, rng, true);
  const auto sel = random_selection(4, cfg.plan_steps, rng, tape);
  const std::vector<int> perm{2, 0, 3, 1};
  std::vector<int> rows;
  SelectedMotion permuted;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (int s = 0; s < cfg.plan_steps; ++s) {
      rows.push_back(perm[i] * cfg.plan_steps + s);
    }
    permuted.modes.push_back(0);
  }
  permuted.queries = nn::gather_rows(sel.queries, rows);
  permuted.positions = nn::gather_rows(sel.positions, rows);
  EXPECT_TRUE(mot2plan_interact(tape, pc.plan, sel, model.plan).queries.value() ==
              mot2plan_interact(tape, pc.plan, permuted, model.plan).queries.value());
}

// ---------------------------------------------------------------------------
// Decoding and selection

TEST(Decode, ConstantOffsetsIntegrateAlongSteps)
{
  BridgeModel model(tiny_config(), 27);
  model.motion.offset.weight->value.setZero();
  model.motion.offset.bias->value << 0.2, 0.0;
  model.plan.offset.weight->value.setZero();
  model.plan.offset.bias->value << 0.0, -0.1;
  std::mt19937_64 rng(28);
  nn::Tape tape(false);
  auto mot = init_motion_queries(tape, tape.constant(random_mat(2, 8, rng)), model.motion, 2, 6);
  mot = decode_motion(tape, mot, model.motion);
  for (nn::Index r = 0; r < mot.trajs.rows(); ++r) {
    const double s = static_cast<double>(r % 6 + 1);
    EXPECT_NEAR(mot.trajs.value()(r, 0), s, 1e-12);
    EXPECT_EQ(mot.trajs.value()(r, 1), 0.0);
  }
  auto plan = init_plan_queries(tape, tape.constant(random_mat(2, 8, rng)), model.plan, 3, 3);
  plan = decode_plan(tape, plan, model.plan);
  const auto traj = plan_trajectory(plan, 1);
  ASSERT_EQ(traj.size(), 3u);
  EXPECT_NEAR(traj[2].y, -1.5, 1e-12);
}

TEST(Decode, ProbabilitiesNormalisePerAgentAndPerCommand)
{
  auto cfg = tiny_config();
  cfg.plan_modes = 6;
  BridgeModel model(cfg, 29);
  std::mt19937_64 rng(30);
  nn::Tape tape(false);
  auto mot = init_motion_queries(tape, tape.constant(random_mat(3, 8, rng)), model.motion, 2, 6);
  mot = decode_motion(tape, mot, model.motion);
  for (int n = 0; n < 3; ++n) {
    EXPECT_NEAR(mot.probs.value()(2 * n, 0) + mot.probs.value()(2 * n + 1, 0), 1.0, 1e-12);
  }
  auto plan = init_plan_queries(tape, tape.constant(random_mat(2, 8, rng)), model.plan, 6, 3);
  plan = decode_plan(tape, plan, model.plan);
  EXPECT_EQ(plan.command_group, (std::vector<int>{0, 0, 1, 1, 2, 2}));
  for (int g = 0; g < 3; ++g) {
    EXPECT_NEAR(plan.probs.value()(2 * g, 0) + plan.probs.value()(2 * g + 1, 0), 1.0, 1e-12);
  }
}

TEST(Decode, MotionStackGradientsMatchFiniteDifferences)
{
  BridgeModel model(tiny_config(), 31);
  std::mt19937_64 rng(32);
  const auto res = testing::motion_stack_gradient_check(model, rng);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
  EXPECT_GT(res.checked, 100u);
}

TEST(Decode, PlanStackGradientsMatchFiniteDifferences)
{
  BridgeModel model(tiny_config(), 33);
  std::mt19937_64 rng(34);
  const auto res = testing::plan_stack_gradient_check(model, rng);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
  EXPECT_GT(res.checked, 100u);
}

TEST(SelectByCommand, SingleModePerGroupFollowsCommand)
{
  const auto groups = command_groups(3);
  const std::vector<double> scores{0.9, 0.1, 0.5};
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kLeft), 0);
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kRight), 1);
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kStraight), 2);
}

TEST(SelectByCommand, BestWithinGroupLowestIndexOnTies)
{
  const auto groups = command_groups(9);
  EXPECT_EQ(groups, (std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2}));
  const std::vector<double> scores{0.1, 0.4, 0.4, 9.0, -1.0, 0.0, 0.2, 0.2, 0.2};
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kLeft), 1);
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kRight), 3);
  EXPECT_EQ(select_by_command(scores, groups, scene::DrivingCommand::kStraight), 6);
}

TEST(SelectByCommand, FollowsPermutationsWithinGroup)
{
  std::mt19937_64 rng(35);
  const auto groups = command_groups(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> scores(9);
    for (auto & s : scores) {
      s = u(rng);
    }
    std::vector<int> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = scores;
    for (int g = 0; g < 3; ++g) {
      for (int i = 0; i < 3; ++i) {
        permuted[static_cast<std::size_t>(3 * g + i)] = scores[static_cast<std::size_t>(3 * g + perm[static_cast<std::size_t>(i)])];
      }
    }
    for (int c = 0; c < 3; ++c) {
      const auto cmd = static_cast<scene::DrivingCommand>(c);
      const int a = select_by_command(scores, groups, cmd);
      const int b = select_by_command(permuted, groups, cmd);
      EXPECT_EQ(3 * c + perm[static_cast<std::size_t>(b - 3 * c)], a);
    }
  }
}

TEST(SelectByCommand, RejectsBadInput)
{
  const auto groups = command_groups(3);
  EXPECT_THROW(select_by_command({0.1, 0.2, 0.3}, groups, static_cast<scene::DrivingCommand>(5)),
               std::invalid_argument);
  EXPECT_THROW(select_by_command({0.1, 0.2}, groups, scene::DrivingCommand::kLeft), std::invalid_argument);
  EXPECT_THROW(command_groups(4), std::invalid_argument);
}

}  // namespace
}  // namespace bridgead::planning
