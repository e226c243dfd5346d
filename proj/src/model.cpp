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

#include <random>

namespace bridgead
{
namespace
{

Tensor to_tensor(const nn::Mat & m, Shape shape)
{
  return Tensor(std::move(shape), std::vector<double>(m.data(), m.data() + m.size()));
}

nn::Mat gather(const nn::Mat & m, const std::vector<int> & rows)
{
  nn::Mat out(static_cast<nn::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<nn::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

std::string to_string(Stage stage) { return stage == Stage::kPerception ? "perception" : "end_to_end"; }

Stage stage_from_string(const std::string & s)
{
  if (s == "perception") {
    return Stage::kPerception;
  }
  if (s == "end_to_end") {
    return Stage::kEndToEnd;
  }
  throw ConfigError("unknown training stage '" + s + "'");
}

BridgeModel::BridgeModel(const ModelConfig & config, std::uint64_t seed) : config_(config)
{
  config_.validate();
  std::mt19937_64 rng(seed);
  encoder = perception::ObservationEncoder::create(store_, "perception.encoder", config_, rng);
  decoder = perception::DetectionDecoder::create(store_, "perception.decoder", config_, rng);
  fusion = perception::Mot2DetFusion::create(store_, "perception.fusion", config_, rng);
  map = perception::MapHead::create(store_, "perception.map", config_, rng);
  comp_m2d = memory::CompensationEncoder::create(store_, "memory.comp_m2d", config_.channels, config_.history_frames,
                                                 config_.motion_steps, rng);
  comp_m2m = memory::CompensationEncoder::create(store_, "memory.comp_m2m", config_.channels, config_.history_frames,
                                                 config_.motion_steps, rng);
  comp_p2p = memory::CompensationEncoder::create(store_, "memory.comp_p2p", config_.channels, config_.history_frames,
                                                 config_.plan_steps, rng);
  motion = planning::MotionHead::create(store_, "motion", config_, rng);
  plan = planning::PlanHead::create(store_, "planning", config_, rng);
}

FrameOutput run_frame(nn::Tape & tape, const BridgeModel & model, const scene::ObservationFrame & frame,
                      StreamState & state, const AblationFlags & flags, Stage stage)
{
  const auto & cfg = model.config();
  const auto c = static_cast<std::size_t>(cfg.channels);
  const int t = frame.frame_index;
  FrameOutput out;
  out.frame_index = t;

  auto encoded = perception::encode_observations(tape, frame, model.encoder, cfg);
  auto objects = perception::detection_decoder(tape, encoded.objects, encoded.features, model.decoder);
  const nn::Mat & det_scores = objects.scores.value();
  state.tracks = perception::assign_track_ids(
    objects.source_ids, std::vector<double>(det_scores.data(), det_scores.data() + det_scores.size()), state.tracks,
    cfg.track_score_threshold);
  objects.track_ids = state.tracks.track_ids;

  const bool e2e = stage == Stage::kEndToEnd;
  if (e2e && flags.mot2det) {
    const auto slice = memory::slice_m2d(state.queue, t, objects.track_ids, cfg.history_frames, c);
    const auto feats =
      memory::compensate(tape, slice, memory::lag_poses(state.queue, slice), frame.ego_pose, model.comp_m2d);
    objects = perception::mot2det_fuse(tape, objects, feats, model.fusion);
  } else {
    objects = perception::refine_detections(tape, objects, model.fusion);
  }
  out.objects = objects;
  out.map = perception::map_head(tape, encoded, encoded.features, model.map);
  if (!e2e) {
    return out;
  }

  // Motion.
  auto mot = planning::init_motion_queries(tape, objects.queries, model.motion, cfg.motion_modes, cfg.motion_steps);
  memory::HistoryFeatures m2m;
  if (flags.his_mot) {
    const auto slice = memory::slice_m2m(state.queue, t, objects.track_ids, cfg.history_frames, cfg.t_m2m,
                                         cfg.motion_modes, cfg.motion_steps, c);
    m2m = memory::compensate(tape, slice, memory::lag_poses(state.queue, slice), frame.ego_pose, model.comp_m2m);
  } else {
    m2m.slice.kind = memory::SliceKind::kMot2Mot;
  }
  mot = planning::history_enhanced_motion(tape, mot, m2m, model.motion.stack,
                                          {flags.his_mot, flags.step_self_attn, flags.mode_self_attn});
  mot = planning::decode_motion(tape, mot, model.motion);
  // Agent-centric offsets to ego-frame positions around the detected centre.
  {
    std::vector<int> owner(static_cast<std::size_t>(mot.trajs.rows()));
    const int per_agent = mot.modes * mot.steps;
    for (std::size_t r = 0; r < owner.size(); ++r) {
      owner[r] = static_cast<int>(r) / per_agent;
    }
    mot.trajs = nn::add(mot.trajs, nn::gather_rows(nn::slice_cols(objects.boxes, 0, 2), owner));
  }
  out.motion = mot;

  // Planning.
  auto plan = planning::init_plan_queries(tape, out.map.queries, model.plan, cfg.plan_modes, cfg.plan_steps);
  memory::HistoryFeatures p2p;
  if (flags.his_plan) {
    const auto slice =
      memory::slice_p2p(state.queue, t, cfg.history_frames, cfg.t_p2p, cfg.plan_modes, cfg.plan_steps, c);
    p2p = memory::compensate(tape, slice, memory::lag_poses(state.queue, slice), frame.ego_pose, model.comp_p2p);
  } else {
    p2p.slice.kind = memory::SliceKind::kPlan2Plan;
  }
  plan = planning::history_enhanced_plan(tape, plan, p2p, model.plan.stack,
                                         {flags.his_plan, flags.step_self_attn, flags.mode_self_attn});
  if (flags.mot2plan) {
    plan = planning::mot2plan_interact(tape, plan, planning::select_with_score(mot, cfg.plan_steps), model.plan);
  }
  plan = planning::decode_plan(tape, plan, model.plan);
  out.plan = plan;
  out.has_planning = true;
  out.selected_plan_mode = planning::select_by_command(plan, frame.command);
  out.selected_plan = planning::plan_trajectory(plan, out.selected_plan_mode);

  state.queue.push(make_frame_cache(out, frame));
  return out;
}

memory::FrameCache make_frame_cache(const FrameOutput & out, const scene::ObservationFrame & frame)
{
  if (!out.has_planning) {
    throw std::logic_error("make_frame_cache: frame has no motion/planning outputs");
  }
  const auto & mot = out.motion;
  const auto & plan = out.plan;
  std::vector<int> rows;
  std::vector<int> query_rows;
  std::vector<int> score_rows;
  memory::FrameCache cache;
  cache.frame_index = out.frame_index;
  cache.ego_pose = frame.ego_pose;
  const int per_agent = mot.modes * mot.steps;
  for (int n = 0; n < mot.agents; ++n) {
    if (out.objects.track_ids[static_cast<std::size_t>(n)] < 0) {
      continue;
    }
    cache.agent_ids.push_back(out.objects.track_ids[static_cast<std::size_t>(n)]);
    for (int r = 0; r < per_agent; ++r) {
      query_rows.push_back(n * per_agent + r);
    }
    for (int m = 0; m < mot.modes; ++m) {
      score_rows.push_back(n * mot.modes + m);
    }
  }
  const auto n = cache.agent_ids.size();
  const auto m = static_cast<std::size_t>(mot.modes);
  const auto s = static_cast<std::size_t>(mot.steps);
  const auto c = static_cast<std::size_t>(mot.queries.cols());
  const auto mp = static_cast<std::size_t>(plan.modes);
  const auto sp = static_cast<std::size_t>(plan.steps);
  cache.motion_queries = to_tensor(gather(mot.queries.value(), query_rows), {n, m, s, c});
  cache.motion_trajs = to_tensor(gather(mot.trajs.value(), query_rows), {n, m, s, 2});
  cache.motion_scores = to_tensor(gather(mot.scores.value(), score_rows), {n, m});
  cache.plan_queries = to_tensor(plan.queries.value(), {mp, sp, c});
  cache.plan_trajs = to_tensor(plan.trajs.value(), {mp, sp, 2});
  cache.plan_scores = to_tensor(plan.scores.value(), {mp});
  return cache;
}

}  // namespace bridgead
