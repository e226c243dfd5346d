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

#include "bridgead/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace bridgead::evaluation
{
namespace
{

/// Mean over the horizons that were evaluated at least once.
double mean_of(const std::array<double, 3> & v, const std::array<int, 3> & frames)
{
  double total = 0.0;
  int n = 0;
  for (std::size_t h = 0; h < 3; ++h) {
    if (frames[h] > 0) {
      total += v[h];
      ++n;
    }
  }
  return n == 0 ? 0.0 : total / n;
}

bool mask_covers(const std::vector<std::uint8_t> & mask, int steps)
{
  if (static_cast<int>(mask.size()) < steps) {
    return false;
  }
  return std::all_of(mask.begin(), mask.begin() + steps, [](auto v) { return v != 0; });
}

struct MotionSums
{
  double ade{0.0};
  double fde{0.0};
  double misses{0.0};
  int agents{0};

  void add(const MotionMetrics & m)
  {
    ade += m.ade * m.agents;
    fde += m.fde * m.agents;
    misses += m.mr * m.agents;
    agents += m.agents;
  }
  MotionMetrics mean() const
  {
    if (agents == 0) {
      return {};
    }
    const double n = agents;
    return {ade / n, fde / n, misses / n, agents};
  }
};

std::vector<AgentPrediction> matched_predictions(const FrameOutput & out, const scene::ObservationFrame & frame)
{
  const auto & objects = out.objects;
  const nn::Mat & boxes = objects.boxes.value();
  std::vector<Vec2> pred;
  std::vector<int> pred_cls;
  for (int i = 0; i < objects.size(); ++i) {
    pred.push_back({boxes(i, 0), boxes(i, 1)});
    pred_cls.push_back(static_cast<int>(objects.classes[static_cast<std::size_t>(i)]));
  }
  std::vector<Vec2> gt;
  std::vector<int> gt_cls;
  for (const auto & a : frame.gt_agents) {
    gt.push_back({a.box[0], a.box[1]});
    gt_cls.push_back(static_cast<int>(a.cls));
  }
  const auto matches = training::greedy_match(pred, pred_cls, gt, gt_cls, kMissThreshold);
  const auto & mot = out.motion;
  const nn::Mat & trajs = mot.trajs.value();
  const auto rows = static_cast<nn::Index>(mot.modes) * mot.steps;
  std::vector<AgentPrediction> agents;
  for (const auto & [i, j] : matches) {
    const auto & a = frame.gt_agents[static_cast<std::size_t>(j)];
    agents.push_back({trajs.block(i * rows, 0, rows, 2), mot.modes, a.future, a.future_mask});
  }
  return agents;
}

Vec2 checked(const Vec2 & p)
{
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw std::runtime_error("closed loop: policy emitted a non-finite waypoint");
  }
  return p;
}

}  // namespace

double l2_error(const std::vector<Vec2> & plan, const std::vector<Vec2> & gt, int horizon_steps,
                L2Convention convention)
{
  if (horizon_steps < 1 || horizon_steps > static_cast<int>(plan.size()) ||
      horizon_steps > static_cast<int>(gt.size())) {
    throw std::invalid_argument("l2_error: horizon exceeds the trajectory length");
  }
  if (convention == L2Convention::kAtStep) {
    const auto s = static_cast<std::size_t>(horizon_steps - 1);
    return (plan[s] - gt[s]).norm();
  }
  double total = 0.0;
  for (int s = 0; s < horizon_steps; ++s) {
    total += (plan[static_cast<std::size_t>(s)] - gt[static_cast<std::size_t>(s)]).norm();
  }
  return total / horizon_steps;
}

std::vector<double> plan_headings(const std::vector<Vec2> & plan, double initial)
{
  std::vector<double> out(plan.size(), initial);
  double prev = initial;
  for (std::size_t s = 0; s < plan.size(); ++s) {
    if (s + 1 < plan.size()) {
      const Vec2 d = plan[s + 1] - plan[s];
      if (d.x != 0.0 || d.y != 0.0) {
        prev = std::atan2(d.y, d.x);
      }
    }
    out[s] = prev;
  }
  return out;
}

FutureBoxes agent_future_boxes(const scene::ObservationFrame & frame, int steps)
{
  FutureBoxes out(static_cast<std::size_t>(steps));
  for (const auto & a : frame.gt_agents) {
    for (int s = 0; s < steps && s < static_cast<int>(a.future.size()); ++s) {
      const auto k = static_cast<std::size_t>(s);
      if (a.future_mask[k] != 0) {
        out[k].push_back({a.future[k], a.length, a.width, a.future_yaw[k]});
      }
    }
  }
  return out;
}

bool plan_collides(const std::vector<Vec2> & plan, const Footprint & ego, const FutureBoxes & agents, int horizon_steps)
{
  const auto headings = plan_headings(plan);
  const int steps = std::min({horizon_steps, static_cast<int>(plan.size()), static_cast<int>(agents.size())});
  for (int s = 0; s < steps; ++s) {
    const auto k = static_cast<std::size_t>(s);
    const OrientedBox2 box{plan[k], ego.length, ego.width, headings[k]};
    for (const auto & other : agents[k]) {
      if (boxes_overlap(box, other)) {
        return true;
      }
    }
  }
  return false;
}

double collision_rate(const std::vector<std::vector<Vec2>> & plans, const Footprint & ego,
                      const std::vector<FutureBoxes> & agents, int horizon_steps)
{
  if (plans.size() != agents.size()) {
    throw std::invalid_argument("collision_rate: plans and agent boxes differ in count");
  }
  if (plans.empty()) {
    return 0.0;
  }
  int hits = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    hits += plan_collides(plans[i], ego, agents[i], horizon_steps) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(plans.size());
}

MotionMetrics motion_metrics(const std::vector<AgentPrediction> & agents)
{
  MotionSums sums;
  for (const auto & a : agents) {
    const auto t = static_cast<nn::Index>(a.gt.size());
    if (a.modes <= 0 || a.trajs.rows() != a.modes * t || a.mask.size() != a.gt.size()) {
      throw std::invalid_argument("motion_metrics: prediction shape does not match the ground truth");
    }
    int last = -1;
    int valid = 0;
    for (nn::Index s = 0; s < t; ++s) {
      if (a.mask[static_cast<std::size_t>(s)] != 0) {
        last = static_cast<int>(s);
        ++valid;
      }
    }
    if (valid == 0) {
      continue;
    }
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (int m = 0; m < a.modes; ++m) {
      double total = 0.0;
      for (nn::Index s = 0; s < t; ++s) {
        if (a.mask[static_cast<std::size_t>(s)] != 0) {
          const auto & g = a.gt[static_cast<std::size_t>(s)];
          total += std::hypot(a.trajs(m * t + s, 0) - g.x, a.trajs(m * t + s, 1) - g.y);
        }
      }
      best_ade = std::min(best_ade, total / valid);
      const auto & g = a.gt[static_cast<std::size_t>(last)];
      best_fde = std::min(best_fde, std::hypot(a.trajs(m * t + last, 0) - g.x, a.trajs(m * t + last, 1) - g.y));
    }
    sums.add({best_ade, best_fde, best_fde > kMissThreshold ? 1.0 : 0.0, 1});
  }
  return sums.mean();
}

double nns_score(bool collided, double v_i, double v_r)
{
  if (!collided) {
    return 5.0;
  }
  if (!(v_r > 0.0)) {
    throw std::invalid_argument("nns_score: reference impact speed must be positive when collided");
  }
  return 4.0 * std::max(0.0, 1.0 - v_i / v_r);
}

OpenLoopReport evaluate_open_loop(const BridgeModel & model, const std::vector<LabeledSequence> & data,
                                  const AblationFlags & flags, const Footprint & ego)
{
  OpenLoopReport report;
  std::array<double, 3> l2_sum{};
  std::array<double, 3> l2_at_sum{};
  std::array<double, 3> col_sum{};
  MotionSums motion_all;
  for (const auto & seq : data) {
    ScenarioOpenLoop sc;
    sc.scenario_id = seq.scenario_id;
    MotionSums motion_sc;
    StreamState state(static_cast<std::size_t>(model.config().history_frames));
    for (const auto & frame : seq.frames) {
      nn::Tape tape(false);
      const auto out = run_frame(tape, model, frame, state, flags);
      motion_sc.add(motion_metrics(matched_predictions(out, frame)));
      const auto boxes = agent_future_boxes(frame, model.config().plan_steps);
      for (std::size_t h = 0; h < kHorizonSteps.size(); ++h) {
        const int steps = kHorizonSteps[h];
        if (steps > static_cast<int>(out.selected_plan.size()) || !mask_covers(frame.gt_ego_mask, steps)) {
          continue;
        }
        sc.l2[h] += l2_error(out.selected_plan, frame.gt_ego_future, steps);
        sc.l2_at[h] += l2_error(out.selected_plan, frame.gt_ego_future, steps, L2Convention::kAtStep);
        sc.collision[h] += plan_collides(out.selected_plan, ego, boxes, steps) ? 1.0 : 0.0;
        ++sc.frames[h];
      }
    }
    for (std::size_t h = 0; h < 3; ++h) {
      l2_sum[h] += sc.l2[h];
      l2_at_sum[h] += sc.l2_at[h];
      col_sum[h] += sc.collision[h];
      report.frames[h] += sc.frames[h];
      if (sc.frames[h] > 0) {
        sc.l2[h] /= sc.frames[h];
        sc.l2_at[h] /= sc.frames[h];
        sc.collision[h] /= sc.frames[h];
      }
    }
    sc.motion = motion_sc.mean();
    motion_all.add(sc.motion);
    report.scenarios.push_back(sc);
  }
  for (std::size_t h = 0; h < 3; ++h) {
    if (report.frames[h] > 0) {
      report.l2[h] = l2_sum[h] / report.frames[h];
      report.l2_at[h] = l2_at_sum[h] / report.frames[h];
      report.collision[h] = col_sum[h] / report.frames[h];
    }
  }
  report.l2_avg = mean_of(report.l2, report.frames);
  report.l2_at_avg = mean_of(report.l2_at, report.frames);
  report.collision_avg = mean_of(report.collision, report.frames);
  report.motion = motion_all.mean();
  return report;
}

std::vector<Vec2> NoActionPolicy::plan(const scene::ObservationFrame &, const scene::EgoState & ego)
{
  std::vector<Vec2> out;
  for (int k = 1; k <= 6; ++k) {
    out.push_back({ego.speed * k * scene::kFrameDt, 0.0});
  }
  return out;
}

std::vector<Vec2> BrakingPolicy::plan(const scene::ObservationFrame &, const scene::EgoState & ego)
{
  std::vector<Vec2> out;
  const double v = ego.speed;
  const double t_stop = v / decel_;
  for (int k = 1; k <= steps_; ++k) {
    const double t = std::min(k * scene::kFrameDt, t_stop);
    out.push_back({v * t - 0.5 * decel_ * t * t, 0.0});
  }
  return out;
}

ModelPolicy::ModelPolicy(const BridgeModel & model, const AblationFlags & flags)
: model_(model), flags_(flags), state_(static_cast<std::size_t>(model.config().history_frames))
{
}

void ModelPolicy::reset() { state_.reset(); }

std::vector<Vec2> ModelPolicy::plan(const scene::ObservationFrame & frame, const scene::EgoState &)
{
  nn::Tape tape(false);
  return run_frame(tape, model_, frame, state_, flags_).selected_plan;
}

RolloutResult simulate(Policy & policy, const scene::Scenario & scenario, const ClosedLoopConfig & cfg)
{
  const double per_frame = scene::kFrameDt / cfg.control_dt;
  const int substeps = static_cast<int>(std::llround(per_frame));
  if (substeps < 1 || std::abs(per_frame - substeps) > 1e-9) {
    throw std::invalid_argument("simulate: control_dt must divide the frame interval");
  }
  const int total_steps = static_cast<int>(std::llround(scenario.duration_s / cfg.control_dt));
  policy.reset();
  auto world = scene::initial_world(scenario, scene::EgoMode::kExternal);
  RolloutResult result;
  result.trace.push_back({world.time, world.ego.pose, world.ego.speed});

  std::vector<Vec2> waypoints;  // world frame
  int plan_step = 0;
  std::size_t frame_index = 0;
  for (int step = 0; step < total_steps; ++step) {
    if (step % substeps == 0) {
      const auto frame = scene::observe(world, cfg.noise, scene::observation_seed(scenario.seed, frame_index, cfg.stream));
      const auto local = policy.plan(frame, world.ego);
      if (local.empty()) {
        throw std::runtime_error("closed loop: policy returned an empty plan");
      }
      waypoints.clear();
      for (const auto & p : local) {
        waypoints.push_back(transform_point(world.ego.pose, checked(p)));
      }
      plan_step = step;
      ++frame_index;
    }
    auto ego = world.ego;
    const double dt = cfg.control_dt;
    double accel = 0.0;
    double yaw_rate = 0.0;
    if (!policy.holds_velocity()) {
      const double elapsed = (step - plan_step) * dt;
      const auto k = std::min(waypoints.size() - 1,
                              static_cast<std::size_t>(std::floor(elapsed / scene::kFrameDt + 1e-9)));
      const double tau = (static_cast<double>(k) + 1.0) * scene::kFrameDt - elapsed;
      const Vec2 rel = inverse_transform_point(ego.pose, waypoints[k]);
      accel = std::clamp(2.0 * (rel.x - ego.speed * tau) / (tau * tau), -cfg.accel_limit, cfg.accel_limit);
      const double dist2 = rel.dot(rel);
      if (dist2 > 0.25) {
        yaw_rate = std::clamp(2.0 * ego.speed * rel.y / dist2, -cfg.yaw_rate_limit, cfg.yaw_rate_limit);
      }
    }
    const double v_next = std::max(0.0, ego.speed + accel * dt);
    const double v_avg = 0.5 * (ego.speed + v_next);
    const double yaw_mid = ego.pose.yaw + 0.5 * yaw_rate * dt;
    ego.pose = Pose2(ego.pose.x + v_avg * std::cos(yaw_mid) * dt, ego.pose.y + v_avg * std::sin(yaw_mid) * dt,
                     ego.pose.yaw + yaw_rate * dt);
    ego.speed = v_next;

    world = scene::step_world(world, dt);
    world.ego = ego;
    result.trace.push_back({world.time, world.ego.pose, world.ego.speed});

    const auto ego_fp = scene::ego_box(world.ego);
    const Vec2 ego_vel{ego.speed * std::cos(ego.pose.yaw), ego.speed * std::sin(ego.pose.yaw)};
    for (const auto & agent : world.agents) {
      if (boxes_overlap(ego_fp, scene::agent_box(agent))) {
        result.collided = true;
        result.collided_with = agent.agent_id;
        result.impact_speed = (ego_vel - scene::agent_velocity(agent)).norm();
        return result;
      }
    }
  }
  return result;
}

ClosedLoopResult run_closed_loop(Policy & policy, const scene::Scenario & scenario, const ClosedLoopConfig & cfg)
{
  ClosedLoopResult out;
  out.rollout = simulate(policy, scenario, cfg);
  NoActionPolicy reference;
  const auto ref = simulate(reference, scenario, cfg);
  out.collided = out.rollout.collided;
  out.v_i = out.rollout.impact_speed;
  out.reference_collided = ref.collided;
  out.v_r = ref.impact_speed;
  if (!out.collided) {
    out.nns = 5.0;
  } else if (out.v_r > 0.0) {
    out.nns = nns_score(true, out.v_i, out.v_r);
  } else {
    out.nns = 0.0;
  }
  return out;
}

nlohmann::json to_json(const OpenLoopReport & report)
{
  using nlohmann::json;
  auto arr = [](const std::array<double, 3> & a) { return json::array({a[0], a[1], a[2]}); };
  json scenarios = json::array();
  for (const auto & sc : report.scenarios) {
    scenarios.push_back({{"scenario_id", sc.scenario_id},
                         {"l2", arr(sc.l2)},
                         {"l2_at", arr(sc.l2_at)},
                         {"collision", arr(sc.collision)},
                         {"frames", sc.frames},
                         {"ade", sc.motion.ade},
                         {"fde", sc.motion.fde},
                         {"mr", sc.motion.mr},
                         {"agents", sc.motion.agents}});
  }
  return {{"horizons_s", {1.0, 2.0, 3.0}},
          {"l2", arr(report.l2)},
          {"l2_avg", report.l2_avg},
          {"l2_convention", "average"},
          {"l2_at", arr(report.l2_at)},
          {"l2_at_avg", report.l2_at_avg},
          {"collision", arr(report.collision)},
          {"collision_avg", report.collision_avg},
          {"collision_counting", "per_frame"},
          {"frames", report.frames},
          {"ade", report.motion.ade},
          {"fde", report.motion.fde},
          {"mr", report.motion.mr},
          {"agents", report.motion.agents},
          {"scenarios", scenarios}};
}

nlohmann::json to_json(const ClosedLoopResult & result, bool with_trace)
{
  nlohmann::json out = {{"nns", result.nns},
                        {"collided", result.collided},
                        {"v_i", result.v_i},
                        {"v_r", result.v_r},
                        {"reference_collided", result.reference_collided},
                        {"collided_with", result.rollout.collided_with}};
  if (with_trace) {
    auto trace = nlohmann::json::array();
    for (const auto & t : result.rollout.trace) {
      trace.push_back({t.time, t.ego_pose.x, t.ego_pose.y, t.ego_pose.yaw, t.speed});
    }
    out["trace"] = trace;
  }
  return out;
}

namespace
{

std::ofstream open_csv(const std::filesystem::path & path, const std::string & config_hash)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out.precision(17);
  out << "# config_hash: " << config_hash << "\n";
  out << "scenario_id,metric,horizon,value\n";
  return out;
}

}  // namespace

void write_open_loop_csv(const OpenLoopReport & report, const std::filesystem::path & path,
                         const std::string & config_hash)
{
  auto out = open_csv(path, config_hash);
  const char * horizons[] = {"1s", "2s", "3s"};
  for (const auto & sc : report.scenarios) {
    for (std::size_t h = 0; h < 3; ++h) {
      if (sc.frames[h] == 0) {
        continue;
      }
      out << sc.scenario_id << ",l2," << horizons[h] << "," << sc.l2[h] << "\n";
      out << sc.scenario_id << ",l2_at," << horizons[h] << "," << sc.l2_at[h] << "\n";
      out << sc.scenario_id << ",collision_rate," << horizons[h] << "," << sc.collision[h] << "\n";
    }
    if (sc.motion.agents > 0) {
      out << sc.scenario_id << ",ade,all," << sc.motion.ade << "\n";
      out << sc.scenario_id << ",fde,all," << sc.motion.fde << "\n";
      out << sc.scenario_id << ",mr,all," << sc.motion.mr << "\n";
    }
  }
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

void write_closed_loop_csv(const std::vector<std::pair<std::string, ClosedLoopResult>> & results,
                           const std::filesystem::path & path, const std::string & config_hash)
{
  auto out = open_csv(path, config_hash);
  for (const auto & [id, r] : results) {
    out << id << ",nns,episode," << r.nns << "\n";
    out << id << ",collided,episode," << (r.collided ? 1 : 0) << "\n";
    out << id << ",v_i,episode," << r.v_i << "\n";
    out << id << ",v_r,episode," << r.v_r << "\n";
  }
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

}  // namespace bridgead::evaluation
