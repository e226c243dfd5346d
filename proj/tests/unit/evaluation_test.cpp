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


#include "bridgead/evaluation.hpp"
#include "oracles/metric_oracles.hpp"
#include "oracles/model_fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>

namespace bridgead::evaluation
{
namespace
{

using testing::random_path;
using testing::random_prediction;
using testing::tiny_config;

TEST(L2, HandComputedExamples)
{
  const std::vector<Vec2> plan{{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  const std::vector<Vec2> gt{{1.0, 1.0}, {2.0, 2.0}, {3.0, 4.0}};
  EXPECT_DOUBLE_EQ(l2_error(plan, gt, 1), 1.0);
  EXPECT_DOUBLE_EQ(l2_error(plan, gt, 2), 1.5);
  EXPECT_DOUBLE_EQ(l2_error(plan, gt, 3), 7.0 / 3.0);
  EXPECT_DOUBLE_EQ(l2_error(plan, gt, 2, L2Convention::kAtStep), 2.0);
  EXPECT_DOUBLE_EQ(l2_error(plan, gt, 3, L2Convention::kAtStep), 4.0);
  EXPECT_THROW(l2_error(plan, gt, 4), std::invalid_argument);
  EXPECT_THROW(l2_error(plan, {{0.0, 0.0}}, 2), std::invalid_argument);
}

TEST(L2, MatchesPointwiseOracle)
{
  std::mt19937_64 rng(11);
  for (int c = 0; c < 200; ++c) {
    const auto plan = random_path(rng, 6);
    const auto gt = random_path(rng, 6);
    for (int h = 1; h <= 6; ++h) {
      EXPECT_NEAR(l2_error(plan, gt, h), testing::l2_oracle(plan, gt, h, false), 1e-9);
      EXPECT_NEAR(l2_error(plan, gt, h, L2Convention::kAtStep), testing::l2_oracle(plan, gt, h, true), 1e-9);
    }
  }
}

TEST(Headings, FollowNextSegmentAndHoldOnStops)
{
  const std::vector<Vec2> plan{{1.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}, {0.0, 1.0}};
  const auto h = plan_headings(plan, 0.3);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_DOUBLE_EQ(h[0], M_PI / 2);
  EXPECT_DOUBLE_EQ(h[1], M_PI / 2);
  EXPECT_DOUBLE_EQ(h[2], M_PI);
  EXPECT_DOUBLE_EQ(h[3], M_PI);
  const std::vector<Vec2> still{{0.0, 0.0}, {0.0, 0.0}};
  EXPECT_EQ(plan_headings(still, 0.3), (std::vector<double>{0.3, 0.3}));
}

FutureBoxes single_agent_at(int steps, int hit_step, const Vec2 & where)
{
  FutureBoxes boxes(static_cast<std::size_t>(steps));
  boxes[static_cast<std::size_t>(hit_step)].push_back({where, 4.5, 1.9, 0.0});
  return boxes;
}

TEST(Collision, HandComputedExamples)
{
  const std::vector<Vec2> plan{{5.0, 0.0}, {10.0, 0.0}, {15.0, 0.0}, {20.0, 0.0}, {25.0, 0.0}, {30.0, 0.0}};
  const Footprint ego;
  EXPECT_TRUE(plan_collides(plan, ego, single_agent_at(6, 0, {6.0, 0.5}), 2));
  EXPECT_FALSE(plan_collides(plan, ego, single_agent_at(6, 3, {20.0, 0.0}), 2));
  EXPECT_TRUE(plan_collides(plan, ego, single_agent_at(6, 3, {20.0, 0.0}), 4));
  // Lateral gap of 0.1 m between the footprints.
  EXPECT_FALSE(plan_collides(plan, ego, single_agent_at(6, 1, {10.0, 1.73 / 2 + 1.9 / 2 + 0.1}), 6));
  EXPECT_TRUE(plan_collides(plan, ego, single_agent_at(6, 1, {10.0, 1.73 / 2 + 1.9 / 2 - 0.1}), 6));
  // Only the matching step counts.
  EXPECT_FALSE(plan_collides(plan, ego, single_agent_at(6, 2, {10.0, 0.0}), 6));

  const std::vector<std::vector<Vec2>> plans{plan, plan, plan, plan};
  const std::vector<FutureBoxes> agents{single_agent_at(6, 0, {6.0, 0.0}), single_agent_at(6, 5, {30.0, 0.0}),
                                        FutureBoxes(6), single_agent_at(6, 2, {40.0, 0.0})};
  EXPECT_DOUBLE_EQ(collision_rate(plans, ego, agents, 2), 0.25);
  EXPECT_DOUBLE_EQ(collision_rate(plans, ego, agents, 6), 0.5);
  EXPECT_DOUBLE_EQ(collision_rate({}, ego, {}, 6), 0.0);
  EXPECT_THROW(collision_rate(plans, ego, {}, 6), std::invalid_argument);
}

TEST(Collision, MatchesPolygonClippingOracle)
{
  std::mt19937_64 rng(5);
  const Footprint ego;
  int hits = 0;
  int cases = 0;
  for (int c = 0; c < 400; ++c) {
    const auto plan = random_path(rng, 6);
    const auto agents = testing::random_agents_near(plan, rng);
    for (int h : kHorizonSteps) {
      const bool expected = testing::collides_by_area(plan, ego, agents, h);
      EXPECT_EQ(plan_collides(plan, ego, agents, h), expected) << "case " << c << " h " << h;
      hits += expected ? 1 : 0;
      ++cases;
    }
  }
  // Both outcomes are exercised.
  EXPECT_GT(hits, cases / 10);
  EXPECT_LT(hits, cases - cases / 10);
}

TEST(Collision, FutureBoxesRespectMask)
{
  scene::ObservationFrame f;
  scene::AgentGroundTruth a;
  a.length = 4.0;
  a.width = 2.0;
  a.future = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  a.future_yaw = {0.0, 0.1, 0.2};
  a.future_mask = {1, 0, 1};
  f.gt_agents.push_back(a);
  const auto boxes = agent_future_boxes(f, 4);
  ASSERT_EQ(boxes.size(), 4u);
  EXPECT_EQ(boxes[0].size(), 1u);
  EXPECT_TRUE(boxes[1].empty());
  ASSERT_EQ(boxes[2].size(), 1u);
  EXPECT_DOUBLE_EQ(boxes[2][0].yaw, 0.2);
  EXPECT_DOUBLE_EQ(boxes[2][0].center.x, 3.0);
  EXPECT_TRUE(boxes[3].empty());
}

TEST(Collision, ExpertFuturesRarelyCollide)
{
  int frames = 0;
  int collisions = 0;
  const Footprint ego;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto scenario = scene::generate_scenario(seed, scene::ScenarioTemplate::kOpenLoopRandom);
    for (const auto & f : scene::observe_scenario(scenario, {}, 12, 6)) {
      if (f.gt_ego_mask.empty() || f.gt_ego_mask.back() == 0) {
        continue;
      }
      collisions += plan_collides(f.gt_ego_future, ego, agent_future_boxes(f, 6), 6) ? 1 : 0;
      ++frames;
    }
  }
  ASSERT_GT(frames, 100);
  EXPECT_LT(static_cast<double>(collisions) / frames, 0.02) << collisions << " of " << frames;
}

TEST(MotionMetrics, MatchesBruteForceOracle)
{
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> agents_n(1, 6);
  std::uniform_int_distribution<int> modes_n(1, 6);
  for (int c = 0; c < 150; ++c) {
    const int steps = 4 + c % 9;
    std::vector<AgentPrediction> agents;
    for (int a = agents_n(rng); a > 0; --a) {
      agents.push_back(random_prediction(rng, modes_n(rng), steps));
    }
    const auto expected = testing::motion_metrics_oracle(agents);
    const auto got = motion_metrics(agents);
    ASSERT_EQ(got.agents, expected.agents);
    EXPECT_NEAR(got.ade, expected.ade, 1e-9);
    EXPECT_NEAR(got.fde, expected.fde, 1e-9);
    EXPECT_EQ(got.mr, expected.mr);
  }
}

TEST(MotionMetrics, RejectsShapeMismatch)
{
  std::mt19937_64 rng(1);
  auto p = random_prediction(rng, 3, 5);
  p.modes = 2;
  EXPECT_THROW(motion_metrics({p}), std::invalid_argument);
}

TEST(Nns, ReferenceCases)
{
  EXPECT_DOUBLE_EQ(nns_score(false, 0.0, 0.0), 5.0);
  EXPECT_DOUBLE_EQ(nns_score(false, 9.0, 3.0), 5.0);
  EXPECT_DOUBLE_EQ(nns_score(true, 8.0, 8.0), 0.0);
  EXPECT_DOUBLE_EQ(nns_score(true, 2.0, 8.0), 3.0);
  EXPECT_DOUBLE_EQ(nns_score(true, 10.0, 8.0), 0.0);
  EXPECT_DOUBLE_EQ(nns_score(true, 0.0, 8.0), 4.0);
  EXPECT_THROW(nns_score(true, 1.0, 0.0), std::invalid_argument);
}

TEST(Nns, MatchesFormulaOracle)
{
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> v(0.0, 20.0);
  std::bernoulli_distribution hit(0.7);
  for (int c = 0; c < 200; ++c) {
    const bool collided = hit(rng);
    const double vi = v(rng);
    const double vr = v(rng) + 0.1;
    EXPECT_NEAR(nns_score(collided, vi, vr), testing::nns_oracle(collided, vi, vr), 1e-12);
  }
}

scene::Scenario frontal(std::uint64_t seed)
{
  return scene::generate_scenario(seed, scene::ScenarioTemplate::kFrontalAdversary);
}

TEST(ClosedLoop, NoActionCollidesAndScoresZero)
{
  NoActionPolicy policy;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = run_closed_loop(policy, frontal(seed), {});
    EXPECT_TRUE(r.collided) << seed;
    EXPECT_TRUE(r.reference_collided);
    EXPECT_GT(r.v_r, 0.0);
    EXPECT_DOUBLE_EQ(r.nns, 0.0);
  }
}

TEST(ClosedLoop, BrakingAvoidsFrontalCollision)
{
  BrakingPolicy policy;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = run_closed_loop(policy, frontal(seed), {});
    EXPECT_FALSE(r.collided) << seed;
    EXPECT_DOUBLE_EQ(r.nns, 5.0);
    EXPECT_LT(r.rollout.trace.back().speed, 1e-9);
  }
}

TEST(ClosedLoop, RolloutIsDeterministic)
{
  BridgeModel model(tiny_config(), 4);
  ModelPolicy a(model, {});
  ModelPolicy b(model, {});
  const auto scenario = frontal(2);
  const auto ra = simulate(a, scenario, {});
  const auto rb = simulate(b, scenario, {});
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (std::size_t i = 0; i < ra.trace.size(); ++i) {
    EXPECT_EQ(ra.trace[i].ego_pose.x, rb.trace[i].ego_pose.x);
    EXPECT_EQ(ra.trace[i].ego_pose.y, rb.trace[i].ego_pose.y);
    EXPECT_EQ(ra.trace[i].speed, rb.trace[i].speed);
  }
  // reset() clears the stream, so a reused policy repeats itself.
  const auto rc = simulate(a, scenario, {});
  EXPECT_EQ(rc.trace.back().ego_pose.x, ra.trace.back().ego_pose.x);
  EXPECT_EQ(rc.collided, ra.collided);
}

TEST(ClosedLoop, RejectsIncompatibleControlStep)
{
  NoActionPolicy policy;
  ClosedLoopConfig cfg;
  cfg.control_dt = 0.3;
  EXPECT_THROW(simulate(policy, frontal(0), cfg), std::invalid_argument);
}

std::vector<LabeledSequence> small_dataset(const ModelConfig & cfg, int n)
{
  std::vector<LabeledSequence> data;
  for (int i = 0; i < n; ++i) {
    data.push_back({"s" + std::to_string(i), testing::scenario_frames(static_cast<std::uint64_t>(40 + i), cfg, 4.0)});
  }
  return data;
}

TEST(OpenLoop, ReportAveragesFrames)
{
  auto cfg = tiny_config();
  cfg.plan_steps = 6;
  BridgeModel model(cfg, 9);
  const auto data = small_dataset(cfg, 3);
  const auto report = evaluate_open_loop(model, data, {});
  ASSERT_EQ(report.scenarios.size(), 3u);
  double weighted = 0.0;
  for (std::size_t h = 0; h < 3; ++h) {
    ASSERT_GT(report.frames[h], 0);
    int frames = 0;
    double sum = 0.0;
    for (const auto & sc : report.scenarios) {
      frames += sc.frames[h];
      sum += sc.l2[h] * sc.frames[h];
    }
    EXPECT_EQ(frames, report.frames[h]);
    EXPECT_NEAR(report.l2[h], sum / frames, 1e-9);
    EXPECT_TRUE(std::isfinite(report.l2[h]));
    EXPECT_GE(report.collision[h], 0.0);
    EXPECT_LE(report.collision[h], 1.0);
    EXPECT_GE(report.l2_at[h], 0.0);
    weighted += report.l2[h];
  }
  EXPECT_NEAR(report.l2_avg, weighted / 3.0, 1e-12);
  // Longer horizons see fewer frames.
  EXPECT_GE(report.frames[0], report.frames[2]);

  const auto again = evaluate_open_loop(model, data, {});
  EXPECT_EQ(again.l2_avg, report.l2_avg);
  EXPECT_EQ(again.collision_avg, report.collision_avg);
}

TEST(OpenLoop, CsvStartsWithConfigHash)
{
  auto cfg = tiny_config();
  cfg.plan_steps = 6;
  BridgeModel model(cfg, 9);
  const auto report = evaluate_open_loop(model, small_dataset(cfg, 1), {});
  const auto path = std::filesystem::temp_directory_path() / "bridgead_eval_test.csv";
  write_open_loop_csv(report, path, "abc123");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# config_hash: abc123");
  std::getline(in, line);
  EXPECT_EQ(line, "scenario_id,metric,horizon,value");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind("s0,", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 9 + 3);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace bridgead::evaluation
