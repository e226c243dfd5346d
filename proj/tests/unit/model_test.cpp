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
#include "oracles/model_fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <random>

namespace bridgead
{
namespace
{

using testing::scenario_frames;
using testing::tiny_config;

/// Outputs of a streamed run together with the tapes their values live on.
struct Run
{
  std::vector<std::unique_ptr<nn::Tape>> tapes;
  std::vector<FrameOutput> frames;

  const FrameOutput & operator[](std::size_t i) const { return frames[i]; }
  std::size_t size() const { return frames.size(); }
  const FrameOutput & back() const { return frames.back(); }
};

Run run_sequence(const BridgeModel & model, const std::vector<scene::ObservationFrame> & frames,
                 const AblationFlags & flags = {})
{
  StreamState state(static_cast<std::size_t>(model.config().history_frames));
  Run run;
  for (const auto & f : frames) {
    run.tapes.push_back(std::make_unique<nn::Tape>(false));
    run.frames.push_back(run_frame(*run.tapes.back(), model, f, state, flags));
  }
  return run;
}

bool same_rows(const nn::Mat & a, nn::Index ra, const nn::Mat & b, nn::Index rb, nn::Index count)
{
  return a.middleRows(ra * count, count) == b.middleRows(rb * count, count);
}

TEST(Model, ParameterGroupsArePrefixed)
{
  BridgeModel model(tiny_config(), 1);
  std::size_t grouped = 0;
  for (const char * prefix : {"perception.", "memory.", "motion.", "planning."}) {
    grouped += model.store().with_prefix(prefix).size();
  }
  EXPECT_EQ(grouped, model.store().parameters().size());
  EXPECT_GT(model.store().scalar_count(), 1000u);
}

TEST(Model, OutputsHaveDeclaredShapes)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 2);
  const auto outs = run_sequence(model, scenario_frames(3, cfg));
  for (const auto & o : outs.frames) {
    const int n = o.objects.size();
    ASSERT_TRUE(o.has_planning);
    EXPECT_EQ(o.motion.trajs.rows(), n * cfg.motion_modes * cfg.motion_steps);
    EXPECT_EQ(o.motion.probs.rows(), n * cfg.motion_modes);
    EXPECT_EQ(o.plan.trajs.rows(), cfg.plan_modes * cfg.plan_steps);
    EXPECT_EQ(o.selected_plan.size(), static_cast<std::size_t>(cfg.plan_steps));
    EXPECT_GE(o.selected_plan_mode, 0);
    EXPECT_TRUE(o.plan.trajs.value().allFinite());
  }
}

TEST(Model, ReplayIsBitwiseDeterministic)
{
  const auto cfg = tiny_config();
  BridgeModel a(cfg, 4);
  BridgeModel b(cfg, 4);
  const auto frames = scenario_frames(5, cfg);
  const auto oa = run_sequence(a, frames);
  const auto ob = run_sequence(b, frames);
  for (std::size_t i = 0; i < oa.size(); ++i) {
    EXPECT_TRUE(oa[i].plan.trajs.value() == ob[i].plan.trajs.value());
    EXPECT_TRUE(oa[i].motion.trajs.value() == ob[i].motion.trajs.value());
  }
}

TEST(Model, AgentPermutationEquivarianceOverSequence)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 6);
  std::mt19937_64 rng(7);
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto frames = scenario_frames(seed, cfg, 4.0);
    auto permuted = frames;
    for (auto & f : permuted) {
      std::shuffle(f.agents.begin(), f.agents.end(), rng);
    }
    const auto oa = run_sequence(model, frames);
    const auto ob = run_sequence(model, permuted);
    const int per_agent = cfg.motion_modes * cfg.motion_steps;
    for (std::size_t t = 0; t < oa.size(); ++t) {
      const auto & a = oa[t];
      const auto & b = ob[t];
      ASSERT_EQ(a.objects.size(), b.objects.size());
      for (int i = 0; i < a.objects.size(); ++i) {
        const auto it = std::find(b.objects.source_ids.begin(), b.objects.source_ids.end(),
                                  a.objects.source_ids[static_cast<std::size_t>(i)]);
        ASSERT_NE(it, b.objects.source_ids.end());
        const auto j = static_cast<nn::Index>(it - b.objects.source_ids.begin());
        ASSERT_TRUE(same_rows(a.objects.queries.value(), i, b.objects.queries.value(), j, 1)) << "frame " << t;
        ASSERT_TRUE(same_rows(a.objects.boxes.value(), i, b.objects.boxes.value(), j, 1));
        ASSERT_TRUE(same_rows(a.objects.scores.value(), i, b.objects.scores.value(), j, 1));
        ASSERT_TRUE(same_rows(a.motion.queries.value(), i, b.motion.queries.value(), j, per_agent));
        ASSERT_TRUE(same_rows(a.motion.trajs.value(), i, b.motion.trajs.value(), j, per_agent));
        ASSERT_TRUE(same_rows(a.motion.scores.value(), i, b.motion.scores.value(), j, cfg.motion_modes));
      }
      ASSERT_TRUE(a.plan.trajs.value() == b.plan.trajs.value()) << "frame " << t;
      ASSERT_TRUE(a.plan.scores.value() == b.plan.scores.value());
      EXPECT_EQ(a.selected_plan, b.selected_plan);
    }
  }
}

TEST(Model, ResetIsolatesScenarios)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 8);
  const auto first = scenario_frames(21, cfg);
  const auto second = scenario_frames(22, cfg);
  const auto fresh = run_sequence(model, second);

  StreamState state(static_cast<std::size_t>(cfg.history_frames));
  for (const auto & f : first) {
    nn::Tape tape(false);
    run_frame(tape, model, f, state, {});
  }
  state.reset();
  for (std::size_t i = 0; i < second.size(); ++i) {
    nn::Tape tape(false);
    const auto out = run_frame(tape, model, second[i], state, {});
    EXPECT_TRUE(out.plan.trajs.value() == fresh[i].plan.trajs.value()) << "frame " << i;
    EXPECT_EQ(out.objects.track_ids, fresh[i].objects.track_ids);
  }
}

TEST(Model, HistoryChangesOutputsOnlyWhenEnabled)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 9);
  const auto frames = scenario_frames(31, cfg);
  ASSERT_GE(frames.size(), 3u);
  AblationFlags off;
  off.mot2det = off.his_mot = off.his_plan = off.mot2plan = false;
  const auto with = run_sequence(model, frames);
  const auto without = run_sequence(model, frames, off);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    // Without history modules every frame is computed as if cold.
    const auto cold = run_sequence(model, {frames[i]}, off);
    EXPECT_TRUE(without[i].plan.trajs.value() == cold[0].plan.trajs.value());
  }
  EXPECT_FALSE(with.back().plan.trajs.value() == without.back().plan.trajs.value());
}

TEST(Model, PerceptionStageSkipsMemoryAndPlanning)
{
  const auto cfg = tiny_config();
  BridgeModel model(cfg, 10);
  StreamState state(static_cast<std::size_t>(cfg.history_frames));
  for (const auto & f : scenario_frames(41, cfg)) {
    nn::Tape tape(false);
    const auto out = run_frame(tape, model, f, state, {}, Stage::kPerception);
    EXPECT_FALSE(out.has_planning);
    EXPECT_TRUE(state.queue.empty());
    EXPECT_THROW(make_frame_cache(out, f), std::logic_error);
  }
  EXPECT_EQ(stage_from_string(to_string(Stage::kPerception)), Stage::kPerception);
  EXPECT_THROW(stage_from_string("bogus"), ConfigError);
}

TEST(Model, FrameCacheKeepsTrackedAgentsOnly)
{
  auto cfg = tiny_config();
  cfg.track_score_threshold = 1.0;
  BridgeModel model(cfg, 11);
  const auto frames = scenario_frames(51, cfg);
  StreamState state(static_cast<std::size_t>(cfg.history_frames));
  nn::Tape tape(false);
  const auto out = run_frame(tape, model, frames[0], state, {});
  const auto cache = make_frame_cache(out, frames[0]);
  const auto tracked =
    std::count_if(out.objects.track_ids.begin(), out.objects.track_ids.end(), [](int id) { return id >= 0; });
  EXPECT_EQ(cache.num_agents(), static_cast<std::size_t>(tracked));
  EXPECT_EQ(cache.motion_queries.shape()[0], cache.num_agents());
  EXPECT_NO_THROW(cache.validate());
  ASSERT_EQ(state.queue.size(), 1u);
  EXPECT_EQ(state.queue.entries().back(), cache);
}

}  // namespace
}  // namespace bridgead
