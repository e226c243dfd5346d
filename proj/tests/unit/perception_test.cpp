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
#include "bridgead/perception.hpp"
#include "oracles/attention_oracle.hpp"
#include "oracles/gradient_cases.hpp"
#include "oracles/history_cases.hpp"
#include "oracles/model_fixtures.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace bridgead::perception
{
namespace
{

using testing::synthetic_frame;
using testing::tiny_config;
using testing::decode;
using testing::fusion_case;
using testing::FusionCase;

void zero_linear(nn::Linear & l)
{
  l.weight->value.setZero();
  l.bias->value.setZero();
}

TEST(Perception, ObservationFeaturesLayout)
{
  const auto box = scene::box_from_pose(Pose2(3.0, -6.0, 0.5), Vec2{2.0, 1.0}, 4.0, 2.0, 1.5);
  const auto f = observation_features(box, scene::AgentClass::kPedestrian);
  EXPECT_DOUBLE_EQ(f[0], 0.1);
  EXPECT_DOUBLE_EQ(f[1], -0.2);
  EXPECT_DOUBLE_EQ(f[6], std::sin(0.5));
  EXPECT_DOUBLE_EQ(f[7], std::cos(0.5));
  EXPECT_DOUBLE_EQ(f[8], 0.2);
  EXPECT_EQ(f[11], 0.0);
  EXPECT_EQ(f[12], 1.0);
}

TEST(Perception, ResamplePolylineUniformArcLength)
{
  const auto straight = resample_polyline({{0.0, 0.0}, {10.0, 0.0}}, 3);
  ASSERT_EQ(straight.size(), 3u);
  EXPECT_DOUBLE_EQ(straight[1].x, 5.0);
  EXPECT_EQ(straight[2], (Vec2{10.0, 0.0}));

  // L-shaped line of total length 8: samples every 2 m along the arc.
  const auto bent = resample_polyline({{0.0, 0.0}, {4.0, 0.0}, {4.0, 4.0}}, 5);
  const std::vector<Vec2> expected{{0.0, 0.0}, {2.0, 0.0}, {4.0, 0.0}, {4.0, 2.0}, {4.0, 4.0}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(bent[i].x, expected[i].x, 1e-12);
    EXPECT_NEAR(bent[i].y, expected[i].y, 1e-12);
  }
  EXPECT_THROW(resample_polyline({{0.0, 0.0}}, 4), std::invalid_argument);
}

TEST(Perception, SelectsNearestWhenOverBudget)
{
  std::mt19937_64 rng(2);
  auto frame = synthetic_frame(5, 0, rng);
  const double d[] = {30.0, 5.0, 20.0, 1.0, 40.0};
  for (int i = 0; i < 5; ++i) {
    frame.agents[static_cast<std::size_t>(i)].box[0] = d[i];
    frame.agents[static_cast<std::size_t>(i)].box[1] = 0.0;
  }
  EXPECT_EQ(select_observations(frame, 3), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(select_observations(frame, 8), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Perception, ZeroAgentsGiveEmptySets)
{
  BridgeModel model(tiny_config(), 1);
  std::mt19937_64 rng(3);
  nn::Tape tape(false);
  const auto d = decode(tape, model, synthetic_frame(0, 2, rng));
  EXPECT_EQ(d.objects.size(), 0);
  EXPECT_EQ(d.objects.queries.rows(), 0);
  EXPECT_EQ(d.objects.boxes.cols(), 11);
  const auto refined = refine_detections(tape, d.objects, model.fusion);
  EXPECT_EQ(refined.scores.rows(), 0);

  const auto empty = decode(tape, model, synthetic_frame(0, 0, rng));
  EXPECT_EQ(empty.objects.size(), 0);
  EXPECT_EQ(map_head(tape, empty.encoded, empty.encoded.features, model.map).size(), 0);
}

TEST(Perception, ShapesAndRangesAcrossObjectCounts)
{
  auto cfg = tiny_config();
  cfg.max_objects = 32;
  BridgeModel model(cfg, 4);
  std::mt19937_64 rng(5);
  for (int n = 1; n <= 32; ++n) {
    nn::Tape tape(false);
    const auto d = decode(tape, model, synthetic_frame(n, 2, rng));
    const auto out = refine_detections(tape, d.objects, model.fusion);
    ASSERT_EQ(out.queries.rows(), n);
    ASSERT_EQ(out.queries.cols(), cfg.channels);
    ASSERT_EQ(out.boxes.rows(), n);
    ASSERT_EQ(out.boxes.cols(), 11);
    ASSERT_EQ(out.scores.rows(), n);
    ASSERT_EQ(out.track_ids.size(), static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double s = out.scores.value()(i, 0);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
      EXPECT_NEAR(std::hypot(out.boxes.value()(i, 6), out.boxes.value()(i, 7)), 1.0, 1e-12);
    }
  }
}

TEST(Perception, MaxObjectsCapsQueries)
{
  BridgeModel model(tiny_config(), 6);
  std::mt19937_64 rng(7);
  nn::Tape tape(false);
  const auto d = decode(tape, model, synthetic_frame(20, 1, rng));
  EXPECT_EQ(d.objects.size(), model.config().max_objects);
}

TEST(Perception, DuplicateObservationsDecodeIdentically)
{
  BridgeModel model(tiny_config(), 8);
  std::mt19937_64 rng(9);
  auto frame = synthetic_frame(3, 2, rng);
  frame.agents.push_back(frame.agents[1]);
  frame.agents.back().agent_id = 3;
  nn::Tape tape(false);
  const auto d = decode(tape, model, frame);
  EXPECT_TRUE(d.objects.queries.value().row(1) == d.objects.queries.value().row(3));
  EXPECT_TRUE(d.objects.boxes.value().row(1) == d.objects.boxes.value().row(3));
}

TEST(Perception, ZeroOffsetsKeepObservedBoxes)
{
  BridgeModel model(tiny_config(), 10);
  for (auto & layer : model.decoder.layers) {
    zero_linear(layer.offset);
  }
  zero_linear(model.fusion.offset);
  std::mt19937_64 rng(11);
  const auto frame = synthetic_frame(5, 2, rng);
  nn::Tape tape(false);
  const auto d = decode(tape, model, frame);
  const auto out = refine_detections(tape, d.objects, model.fusion);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 11; ++j) {
      EXPECT_NEAR(out.boxes.value()(i, j), frame.agents[static_cast<std::size_t>(i)].box[static_cast<std::size_t>(j)],
                  1e-12);
    }
  }
}

TEST(Perception, AgentPermutationEquivariance)
{
  BridgeModel model(tiny_config(), 12);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto frame = synthetic_frame(5, 3, rng);
    std::vector<int> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = frame;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      permuted.agents[i] = frame.agents[static_cast<std::size_t>(perm[i])];
    }
    nn::Tape tape(false);
    const auto a = decode(tape, model, frame);
    const auto b = decode(tape, model, permuted);
    const auto ma = map_head(tape, a.encoded, a.encoded.features, model.map);
    const auto mb = map_head(tape, b.encoded, b.encoded.features, model.map);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      const auto src = static_cast<nn::Index>(perm[i]);
      const auto dst = static_cast<nn::Index>(i);
      ASSERT_TRUE(b.objects.queries.value().row(dst) == a.objects.queries.value().row(src));
      ASSERT_TRUE(b.objects.boxes.value().row(dst) == a.objects.boxes.value().row(src))
        << (b.objects.boxes.value().row(dst) - a.objects.boxes.value().row(src));
      ASSERT_TRUE(b.objects.scores.value().row(dst) == a.objects.scores.value().row(src));
    }
    ASSERT_TRUE(ma.queries.value() == mb.queries.value());
  }
}

TEST(Perception, DecoderGradientsMatchFiniteDifferences)
{
  BridgeModel model(tiny_config(), 14);
  std::mt19937_64 rng(15);
  const auto frame = synthetic_frame(3, 2, rng);
  const nn::Mat w_box = testing::random_mat(3, 11, rng);
  auto params = model.store().with_prefix("perception.decoder");
  const auto enc = model.store().with_prefix("perception.encoder");
  params.insert(params.end(), enc.begin(), enc.end());
  const auto res = testing::check_gradients(params, [&](nn::Tape & t, bool backward) {
    const auto d = decode(t, model, frame);
    const nn::Var loss = nn::add(nn::sum(nn::cmul(d.objects.boxes, t.constant(w_box))), nn::sum(d.objects.scores));
    if (backward) {
      t.backward(loss);
    }
    return loss.value()(0, 0);
  }, 6);
  EXPECT_LT(res.max_rel_error, 1e-6);
  EXPECT_GT(res.max_abs_grad, 0.0);
}

TEST(Perception, MapHeadShapesAndZeroOffsets)
{
  auto cfg = tiny_config();
  cfg.map_queries = 8;
  BridgeModel model(cfg, 16);
  for (auto & layer : model.map.layers) {
    zero_linear(layer.offset);
  }
  std::mt19937_64 rng(17);
  for (int lines = 0; lines <= 10; ++lines) {
    const auto frame = synthetic_frame(2, lines, rng);
    nn::Tape tape(false);
    const auto enc = encode_observations(tape, frame, model.encoder, cfg);
    const auto map = map_head(tape, enc, enc.features, model.map);
    const int kept = std::min(lines, cfg.map_queries);
    ASSERT_EQ(map.size(), kept);
    ASSERT_EQ(map.points.rows(), kept);
    ASSERT_EQ(map.points.cols(), 2 * cfg.map_points);
    ASSERT_EQ(map.class_scores.cols(), 3);
    if (lines > cfg.map_queries) {
      continue;
    }
    for (int i = 0; i < kept; ++i) {
      const auto samples = resample_polyline(frame.map[static_cast<std::size_t>(i)].points, cfg.map_points);
      for (int p = 0; p < cfg.map_points; ++p) {
        EXPECT_EQ(map.points.value()(i, 2 * p), samples[static_cast<std::size_t>(p)].x);
        EXPECT_EQ(map.points.value()(i, 2 * p + 1), samples[static_cast<std::size_t>(p)].y);
      }
      EXPECT_TRUE(((map.class_scores.value().row(i).array() >= 0.0) && (map.class_scores.value().row(i).array() <= 1.0))
                    .all());
    }
  }
}

// ---------------------------------------------------------------------------
// Mot2Det fusion

TEST(Mot2Det, ColdStartIsBitwiseIdentity)
{
  BridgeModel model(tiny_config(), 18);
  std::mt19937_64 rng(19);
  for (int n : {0, 1, 4}) {
    nn::Tape tape(false);
    const auto objects = decode(tape, model, synthetic_frame(n, 1, rng, 5)).objects;
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    memory::MemoryQueue empty(2);
    const auto slice = memory::slice_m2d(empty, 5, ids, 2, 8);
    const auto feats = memory::compensate(tape, slice, memory::lag_poses(empty, slice), Pose2(), model.comp_m2d);
    const auto fused = mot2det_fuse(tape, objects, feats, model.fusion);
    const auto plain = refine_detections(tape, objects, model.fusion);
    EXPECT_TRUE(fused.queries.value() == objects.queries.value());
    EXPECT_TRUE(fused.boxes.value() == plain.boxes.value());
    EXPECT_TRUE(fused.scores.value() == plain.scores.value());
  }
}

TEST(Mot2Det, MaskedAttentionMatchesSubsetOracle)
{
  BridgeModel model(tiny_config(), 20);
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> agents(1, 5);
  int with_keys = 0;
  for (int trial = 0; trial < 200; ++trial) {
    nn::Tape tape(false);
    const auto fc = fusion_case(tape, model, agents(rng), 4, rng);
    const auto fused = mot2det_fuse(tape, fc.objects, fc.m2d, model.fusion);
    const auto keys = testing::fusion_keys(fc);
    for (const auto & k : keys) {
      with_keys += k.empty() ? 0 : 1;
    }
    const nn::Mat kv = fc.m2d.features.valid() ? fc.m2d.features.value() : nn::Mat(0, 8);
    const nn::Mat expected = testing::reference_block(model.fusion.cross_attn, fc.objects.queries.value(), kv, keys);
    ASSERT_LT((fused.queries.value() - expected).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
  }
  EXPECT_GT(with_keys, 200);
}

TEST(Mot2Det, FusionGradientsMatchFiniteDifferences)
{
  BridgeModel model(tiny_config(), 22);
  std::mt19937_64 rng(23);
  const auto res = testing::fusion_gradient_check(model, rng);
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
}

TEST(Mot2Det, RejectsMisalignedSlice)
{
  BridgeModel model(tiny_config(), 24);
  std::mt19937_64 rng(25);
  nn::Tape tape(false);
  const auto objects = decode(tape, model, synthetic_frame(3, 1, rng)).objects;
  memory::MemoryQueue empty(2);
  const auto slice = memory::slice_m2d(empty, 1, {0, 1}, 2, 8);
  const auto feats = memory::slice_features(tape, slice);
  EXPECT_THROW(mot2det_fuse(tape, objects, feats, model.fusion), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Track IDs

TEST(TrackIds, FirstFrameIsDense)
{
  const auto t = assign_track_ids({7, 3, 9, 1}, {0.9, 0.8, 0.7, 0.95}, {}, 0.3);
  EXPECT_EQ(t.track_ids, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(t.next_id, 4);
}

TEST(TrackIds, LowScoresStayUntracked)
{
  const auto t = assign_track_ids({7, 3, 9}, {0.9, 0.1, 0.7}, {}, 0.3);
  EXPECT_EQ(t.track_ids, (std::vector<int>{0, -1, 1}));
  EXPECT_THROW(assign_track_ids({1}, {}, {}, 0.3), std::invalid_argument);
}

TEST(TrackIds, PersistAcrossFrames)
{
  TrackTable t = assign_track_ids({4, 5, 6}, {1.0, 1.0, 1.0}, {}, 0.3);
  const auto first = t.track_ids;
  for (int f = 0; f < 5; ++f) {
    // Reordered and with low scores: known sources keep their IDs regardless.
    t = assign_track_ids({6, 4, 5}, {0.0, 0.0, 0.0}, t, 0.3);
    EXPECT_EQ(t.track_ids, (std::vector<int>{first[2], first[0], first[1]}));
  }
}

TEST(TrackIds, NeverReusedOverLongRuns)
{
  std::mt19937_64 rng(26);
  std::bernoulli_distribution present(0.7);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  TrackTable t;
  std::map<int, int> owner;  // track id -> source id
  for (int f = 0; f < 100; ++f) {
    std::vector<int> sources;
    std::vector<double> scores;
    for (int s = 0; s < 12; ++s) {
      if (present(rng)) {
        sources.push_back(s + 100 * (f / 25));
        scores.push_back(score(rng));
      }
    }
    std::shuffle(sources.begin(), sources.end(), rng);
    t = assign_track_ids(sources, scores, t, 0.3);
    std::set<int> seen;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const int id = t.track_ids[i];
      if (id < 0) {
        continue;
      }
      ASSERT_TRUE(seen.insert(id).second) << "duplicate id in frame " << f;
      const auto [it, inserted] = owner.emplace(id, sources[i]);
      ASSERT_TRUE(inserted || it->second == sources[i]) << "id " << id << " reused";
    }
  }
}

}  // namespace
}  // namespace bridgead::perception
