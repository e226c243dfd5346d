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

#include "bridgead/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace bridgead::scene
{
namespace
{

constexpr double kPi = std::numbers::pi;
constexpr double kCarSpeedMax = 20.0;
constexpr double kPedSpeedMax = 3.0;
constexpr double kCarHeight = 1.6;
constexpr double kPedHeight = 1.75;
constexpr double kEgoSubstep = 0.1;
constexpr double kRouteStart = -40.0;
constexpr double kPolylineSpacing = 5.0;

// IDM parameters for the expert ego.
constexpr double kIdmMaxAccel = 2.0;
constexpr double kIdmComfortDecel = 3.0;
constexpr double kIdmMinGap = 3.0;
constexpr double kIdmHeadway = 1.2;
constexpr double kIdmHardBrake = 8.0;

template <typename E>
struct EnumName
{
  E value;
  const char * name;
};

constexpr EnumName<AgentClass> kAgentClassNames[] = {{AgentClass::kCar, "car"}, {AgentClass::kPedestrian, "pedestrian"}};
constexpr EnumName<Behavior> kBehaviorNames[] = {{Behavior::kConstantVelocity, "constant_velocity"},
                                                 {Behavior::kLaneFollow, "lane_follow"},
                                                 {Behavior::kScriptedAdversary, "scripted_adversary"}};
constexpr EnumName<MapClass> kMapClassNames[] = {
  {MapClass::kDivider, "divider"}, {MapClass::kCrossing, "crossing"}, {MapClass::kBoundary, "boundary"}};
constexpr EnumName<DrivingCommand> kCommandNames[] = {
  {DrivingCommand::kLeft, "left"}, {DrivingCommand::kRight, "right"}, {DrivingCommand::kStraight, "straight"}};
constexpr EnumName<ScenarioTemplate> kTemplateNames[] = {{ScenarioTemplate::kOpenLoopRandom, "open_loop_random"},
                                                         {ScenarioTemplate::kFrontalAdversary, "frontal_adversary"},
                                                         {ScenarioTemplate::kSideAdversary, "side_adversary"},
                                                         {ScenarioTemplate::kStationaryBlockage, "stationary_blockage"}};

template <typename E, std::size_t N>
std::string name_of(const EnumName<E> (&table)[N], E value)
{
  for (const auto & entry : table) {
    if (entry.value == value) {
      return entry.name;
    }
  }
  throw ConfigError("enum value out of range");
}

template <typename E, std::size_t N>
E value_of(const EnumName<E> (&table)[N], const std::string & name, const char * what)
{
  for (const auto & entry : table) {
    if (name == entry.name) {
      return entry.value;
    }
  }
  throw ConfigError(std::string("unknown ") + what + " '" + name + "'");
}

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  double normal(double stddev)
  {
    if (stddev <= 0.0) {
      return 0.0;
    }
    return std::normal_distribution<double>(0.0, stddev)(engine_);
  }
  std::uint64_t bits() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

// Exact integration of piecewise-constant acceleration with the speed
// clamped to [0, v_max]. Returns distance travelled and the final speed.
std::pair<double, double> integrate_speed(double v, double accel, double duration, double v_max)
{
  double distance = 0.0;
  double remaining = duration;
  if (accel > 0.0 && v < v_max) {
    const double t_sat = (v_max - v) / accel;
    if (t_sat < remaining) {
      distance += v * t_sat + 0.5 * accel * t_sat * t_sat;
      remaining -= t_sat;
      return {distance + v_max * remaining, v_max};
    }
  } else if (accel < 0.0 && v > 0.0) {
    const double t_stop = v / -accel;
    if (t_stop < remaining) {
      return {v * t_stop * 0.5, 0.0};
    }
  } else {
    return {v * remaining, v};
  }
  return {v * remaining + 0.5 * accel * remaining * remaining, v + accel * remaining};
}

double accel_at(const std::vector<AccelSegment> & profile, double t)
{
  double accel = 0.0;
  for (const auto & seg : profile) {
    if (seg.t_start <= t) {
      accel = seg.accel;
    }
  }
  return accel;
}

AgentTruth advance_agent(const AgentTruth & agent, const RoadSpec & road, double t0, double dt)
{
  AgentTruth out = agent;
  switch (agent.behavior) {
    case Behavior::kConstantVelocity: {
      const double step = agent.speed * dt;
      out.pose = Pose2(agent.pose.x + step * std::cos(agent.pose.yaw), agent.pose.y + step * std::sin(agent.pose.yaw),
                       agent.pose.yaw);
      break;
    }
    case Behavior::kLaneFollow: {
      const double v_max = agent.cls == AgentClass::kCar ? kCarSpeedMax : kPedSpeedMax;
      std::vector<double> cuts{t0};
      for (const auto & seg : agent.accel_profile) {
        if (seg.t_start > t0 && seg.t_start < t0 + dt) {
          cuts.push_back(seg.t_start);
        }
      }
      cuts.push_back(t0 + dt);
      double v = agent.speed;
      double distance = 0.0;
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const auto [ds, v_end] = integrate_speed(v, accel_at(agent.accel_profile, cuts[i]), cuts[i + 1] - cuts[i], v_max);
        distance += ds;
        v = v_end;
      }
      out.speed = v;
      out.station = agent.station + agent.direction * distance;
      const auto lane = road.pose_at(out.station, agent.lane_offset);
      out.pose = Pose2(lane.x, lane.y, agent.direction > 0 ? lane.yaw : lane.yaw + kPi);
      break;
    }
    case Behavior::kScriptedAdversary: {
      const double t = t0 + dt;
      const double v = agent.cruise_speed;
      const double a = agent.stop_decel;
      const double brake_distance = v * v / (2.0 * a);
      const double t_brake = v > 0.0 ? (agent.stop_distance - brake_distance) / v : 0.0;
      double travelled = 0.0;
      double speed = 0.0;
      if (t <= t_brake) {
        travelled = v * t;
        speed = v;
      } else {
        const double tau = std::min(t - t_brake, v / a);
        travelled = (agent.stop_distance - brake_distance) + v * tau - 0.5 * a * tau * tau;
        speed = std::max(0.0, v - a * tau);
      }
      const auto p = transform_point(agent.path_origin, {travelled, 0.0});
      out.pose = Pose2(p.x, p.y, agent.path_origin.yaw);
      out.speed = speed;
      break;
    }
  }
  return out;
}

double idm_accel(const EgoState & ego, const RoadSpec & road, const std::vector<AgentTruth> & agents)
{
  double gap = std::numeric_limits<double>::infinity();
  double lead_speed = 0.0;
  auto consider = [&](const Vec2 & position, double speed, double yaw, const AgentTruth & agent) {
    const auto sd = road.project(position);
    if (std::abs(sd.y - ego.lane_offset) > 0.5 * road.lane_width + 0.5 * agent.width) {
      return;
    }
    const double g = sd.x - ego.station - 0.5 * (ego.length + agent.length);
    if (sd.x <= ego.station || g >= gap) {
      return;
    }
    gap = g;
    lead_speed = speed * std::cos(yaw - road.heading_at(sd.x));
  };
  for (const auto & agent : agents) {
    consider(agent.pose.translation(), agent.speed, agent.pose.yaw, agent);
    // The expert knows where a scripted agent will come to rest.
    if (agent.behavior == Behavior::kScriptedAdversary) {
      consider(transform_point(agent.path_origin, {agent.stop_distance, 0.0}), 0.0, agent.path_origin.yaw, agent);
    }
  }
  const double v = ego.speed;
  double accel = kIdmMaxAccel * (1.0 - std::pow(v / std::max(ego.desired_speed, 0.1), 4));
  if (std::isfinite(gap)) {
    const double dv = v - lead_speed;
    const double s_star =
      kIdmMinGap + std::max(0.0, v * kIdmHeadway + v * dv / (2.0 * std::sqrt(kIdmMaxAccel * kIdmComfortDecel)));
    const double ratio = s_star / std::max(gap, 0.1);
    accel -= kIdmMaxAccel * ratio * ratio;
  }
  return std::clamp(accel, -kIdmHardBrake, kIdmMaxAccel);
}

DrivingCommand command_for(double curvature)
{
  if (curvature > 1e-4) {
    return DrivingCommand::kLeft;
  }
  if (curvature < -1e-4) {
    return DrivingCommand::kRight;
  }
  return DrivingCommand::kStraight;
}

std::vector<Vec2> sample_line(const RoadSpec & road, double offset, double s0, double s1)
{
  std::vector<Vec2> pts;
  for (double s = s0; s <= s1 + 1e-9; s += kPolylineSpacing) {
    pts.push_back(road.pose_at(s, offset).translation());
  }
  return pts;
}

VectorMap build_map(const RoadSpec & road)
{
  const double w = road.lane_width;
  VectorMap map;
  map.polylines.push_back({MapClass::kBoundary, sample_line(road, -w, kRouteStart, road.length)});
  map.polylines.push_back({MapClass::kBoundary, sample_line(road, 2.0 * w, kRouteStart, road.length)});
  map.polylines.push_back({MapClass::kDivider, sample_line(road, 0.0, kRouteStart, road.length)});
  map.polylines.push_back({MapClass::kDivider, sample_line(road, w, kRouteStart, road.length)});
  if (road.crossing_station) {
    const double s = *road.crossing_station;
    for (const double edge : {s - 2.0, s + 2.0}) {
      map.polylines.push_back(
        {MapClass::kCrossing, {road.pose_at(edge, -w).translation(), road.pose_at(edge, 2.0 * w).translation()}});
    }
  }
  return map;
}

std::vector<AccelSegment> random_profile(Rng & rng, double duration)
{
  std::vector<AccelSegment> profile;
  for (double t = 0.0; t < duration; t += 2.0) {
    profile.push_back({t, rng.uniform(-1.5, 1.5)});
  }
  return profile;
}

AgentTruth lane_agent(const RoadSpec & road, int id, double station, double offset, int direction, double speed)
{
  AgentTruth agent;
  agent.agent_id = id;
  agent.cls = AgentClass::kCar;
  agent.behavior = Behavior::kLaneFollow;
  agent.lane_offset = offset;
  agent.direction = direction;
  agent.station = station;
  agent.speed = speed;
  const auto lane = road.pose_at(station, offset);
  agent.pose = Pose2(lane.x, lane.y, direction > 0 ? lane.yaw : lane.yaw + kPi);
  return agent;
}

AgentTruth pedestrian(int id, const Pose2 & pose, double speed)
{
  AgentTruth agent;
  agent.agent_id = id;
  agent.cls = AgentClass::kPedestrian;
  agent.behavior = Behavior::kConstantVelocity;
  agent.pose = pose;
  agent.speed = speed;
  agent.length = 0.6;
  agent.width = 0.6;
  return agent;
}

void add_sidewalk_pedestrians(Rng & rng, const RoadSpec & road, Scenario & sc, int count, bool same_direction_only)
{
  for (int i = 0; i < count; ++i) {
    const double offset = rng.bernoulli(0.5) ? -road.lane_width - 1.5 : 2.0 * road.lane_width + 1.5;
    const auto p = road.pose_at(rng.uniform(-10.0, 60.0), offset);
    const bool reverse = !same_direction_only && rng.bernoulli(0.5);
    sc.agents.push_back(pedestrian(static_cast<int>(sc.agents.size()) + 1,
                                   Pose2(p.x, p.y, reverse ? p.yaw + kPi : p.yaw), rng.uniform(0.5, 1.8)));
  }
}

void finalize(Scenario & sc)
{
  sc.map = build_map(sc.road);
  const auto start = sc.road.pose_at(0.0, sc.ego.lane_offset);
  sc.ego.pose = start;
  sc.ego.route = sample_line(sc.road, sc.ego.lane_offset, 0.0, sc.road.length);
  sc.commands.assign(sc.frame_count(), command_for(sc.road.curvature));
  sc.validate();
}

Scenario make_open_loop(Rng & rng, const SceneConfig & config)
{
  Scenario sc;
  sc.duration_s = config.duration_s;
  const double sign = static_cast<double>(rng.uniform_int(-1, 1));
  sc.road.curvature = sign * rng.uniform(1.0 / 150.0, 1.0 / 80.0);
  sc.road.origin = Pose2(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0), rng.uniform(-kPi, kPi));
  sc.road.length = 250.0;
  if (rng.bernoulli(0.5)) {
    sc.road.crossing_station = rng.uniform(35.0, 80.0);
  }
  sc.ego.speed = rng.uniform(4.0, 14.0);
  sc.ego.desired_speed = rng.uniform(6.0, 14.0);
  sc.ego.lane_offset = -0.5 * sc.road.lane_width;

  const int n = rng.uniform_int(config.min_agents, config.max_agents);
  const double w = sc.road.lane_width;
  auto next_id = [&sc]() { return static_cast<int>(sc.agents.size()) + 1; };
  if (rng.bernoulli(0.6)) {
    auto lead = lane_agent(sc.road, next_id(), rng.uniform(12.0, 35.0), -0.5 * w, 1, rng.uniform(3.0, 12.0));
    lead.accel_profile = random_profile(rng, sc.duration_s + 10.0);
    sc.agents.push_back(lead);
  } else if (rng.bernoulli(0.15 / 0.4)) {
    sc.agents.push_back(lane_agent(sc.road, next_id(), rng.uniform(30.0, 60.0), -0.5 * w, 1, 0.0));
  }
  while (static_cast<int>(sc.agents.size()) < n) {
    const int kind = rng.uniform_int(0, 3);
    if (kind == 0) {
      auto car = lane_agent(sc.road, next_id(), rng.uniform(-25.0, 50.0), 0.5 * w, 1, rng.uniform(4.0, 14.0));
      car.accel_profile = random_profile(rng, sc.duration_s + 10.0);
      sc.agents.push_back(car);
    } else if (kind == 1) {
      auto car = lane_agent(sc.road, next_id(), rng.uniform(20.0, 110.0), 1.5 * w, -1, rng.uniform(4.0, 14.0));
      car.accel_profile = random_profile(rng, sc.duration_s + 10.0);
      sc.agents.push_back(car);
    } else if (kind == 2 && sc.road.crossing_station) {
      const bool from_right = rng.bernoulli(0.5);
      const double offset = from_right ? -w - rng.uniform(1.0, 6.0) : 2.0 * w + rng.uniform(1.0, 6.0);
      const auto p = sc.road.pose_at(*sc.road.crossing_station + rng.uniform(-1.5, 1.5), offset);
      const double yaw = from_right ? p.yaw + 0.5 * kPi : p.yaw - 0.5 * kPi;
      sc.agents.push_back(pedestrian(next_id(), Pose2(p.x, p.y, yaw), rng.uniform(0.8, 1.6)));
    } else {
      add_sidewalk_pedestrians(rng, sc.road, sc, 1, false);
    }
  }
  return sc;
}

Scenario make_frontal(Rng & rng, const SceneConfig & config)
{
  Scenario sc;
  sc.duration_s = config.adversary_duration_s;
  sc.road.origin = Pose2(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0), rng.uniform(-kPi, kPi));
  sc.road.length = 200.0;
  sc.ego.speed = rng.uniform(6.0, 12.0);
  sc.ego.desired_speed = sc.ego.speed;
  sc.ego.lane_offset = -0.5 * sc.road.lane_width;

  const double v_ego = sc.ego.speed;
  const double stop_station = rng.uniform(v_ego * v_ego / 4.0 + 20.0, v_ego * v_ego / 4.0 + 35.0);
  const double cruise = rng.uniform(3.0, 8.0);
  const double decel = 3.0;
  const double stop_distance = cruise * cruise / (2.0 * decel) + rng.uniform(5.0, 25.0);
  auto adversary = lane_agent(sc.road, 1, stop_station + stop_distance, sc.ego.lane_offset, -1, cruise);
  adversary.behavior = Behavior::kScriptedAdversary;
  adversary.path_origin = adversary.pose;
  adversary.cruise_speed = cruise;
  adversary.stop_distance = stop_distance;
  adversary.stop_decel = decel;
  sc.agents.push_back(adversary);
  add_sidewalk_pedestrians(rng, sc.road, sc, rng.uniform_int(0, 2), true);
  return sc;
}

Scenario make_side(Rng & rng, const SceneConfig & config)
{
  Scenario sc;
  sc.duration_s = config.adversary_duration_s;
  sc.road.origin = Pose2(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0), rng.uniform(-kPi, kPi));
  sc.road.length = 200.0;
  sc.ego.speed = rng.uniform(6.0, 12.0);
  sc.ego.desired_speed = sc.ego.speed;
  sc.ego.lane_offset = -0.5 * sc.road.lane_width;

  const double v_ego = sc.ego.speed;
  const double station = rng.uniform(v_ego * v_ego / 8.0 + 12.0, v_ego * v_ego / 8.0 + 30.0);
  const double start_offset = -sc.road.lane_width - rng.uniform(6.0, 12.0);
  const auto spawn = sc.road.pose_at(station, start_offset);
  AgentTruth adversary;
  adversary.agent_id = 1;
  adversary.behavior = Behavior::kScriptedAdversary;
  adversary.pose = Pose2(spawn.x, spawn.y, spawn.yaw + 0.5 * kPi);
  adversary.path_origin = adversary.pose;
  adversary.cruise_speed = rng.uniform(3.0, 7.0);
  adversary.speed = adversary.cruise_speed;
  adversary.stop_decel = 3.0;
  adversary.stop_distance = sc.ego.lane_offset - start_offset + rng.uniform(-0.5, 0.5);
  adversary.stop_distance =
    std::max(adversary.stop_distance, adversary.cruise_speed * adversary.cruise_speed / (2.0 * adversary.stop_decel));
  sc.agents.push_back(adversary);
  add_sidewalk_pedestrians(rng, sc.road, sc, rng.uniform_int(0, 2), true);
  return sc;
}

Scenario make_blockage(Rng & rng, const SceneConfig & config)
{
  Scenario sc;
  sc.duration_s = config.adversary_duration_s;
  sc.road.origin = Pose2(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0), rng.uniform(-kPi, kPi));
  sc.road.length = 200.0;
  sc.ego.speed = rng.uniform(6.0, 12.0);
  sc.ego.desired_speed = sc.ego.speed;
  sc.ego.lane_offset = -0.5 * sc.road.lane_width;

  const double v_ego = sc.ego.speed;
  const double station = rng.uniform(v_ego * v_ego / 8.0 + 15.0, v_ego * v_ego / 8.0 + 40.0);
  sc.agents.push_back(lane_agent(sc.road, 1, station, sc.ego.lane_offset, 1, 0.0));
  if (rng.bernoulli(0.5)) {
    auto car = lane_agent(sc.road, 2, rng.uniform(30.0, 90.0), 1.5 * sc.road.lane_width, -1, rng.uniform(4.0, 12.0));
    sc.agents.push_back(car);
  }
  add_sidewalk_pedestrians(rng, sc.road, sc, rng.uniform_int(0, 2), false);
  return sc;
}

void add_noise(Box11 & box, AgentClass cls, const NoiseConfig & noise, Rng & rng)
{
  const bool car = cls == AgentClass::kCar;
  const double pos_std = car ? noise.pos_std_car : noise.pos_std_ped;
  const double vel_std = car ? noise.vel_std_car : noise.vel_std_ped;
  box[0] += rng.normal(pos_std);
  box[1] += rng.normal(pos_std);
  box[3] += rng.normal(noise.size_std);
  box[5] += rng.normal(noise.size_std);
  if (noise.yaw_std > 0.0) {
    const double s = box[6] + rng.normal(noise.yaw_std);
    const double c = box[7] + rng.normal(noise.yaw_std);
    const double n = std::hypot(s, c);
    if (n > 1e-9) {
      box[6] = s / n;
      box[7] = c / n;
    }
  }
  box[8] += rng.normal(vel_std);
  box[9] += rng.normal(vel_std);
}

double height_of(AgentClass cls) { return cls == AgentClass::kCar ? kCarHeight : kPedHeight; }

}  // namespace

std::string to_string(AgentClass c) { return name_of(kAgentClassNames, c); }
std::string to_string(Behavior b) { return name_of(kBehaviorNames, b); }
std::string to_string(MapClass c) { return name_of(kMapClassNames, c); }
std::string to_string(DrivingCommand c) { return name_of(kCommandNames, c); }
std::string to_string(ScenarioTemplate t) { return name_of(kTemplateNames, t); }
AgentClass agent_class_from_string(const std::string & s) { return value_of(kAgentClassNames, s, "agent class"); }
Behavior behavior_from_string(const std::string & s) { return value_of(kBehaviorNames, s, "behavior"); }
MapClass map_class_from_string(const std::string & s) { return value_of(kMapClassNames, s, "map class"); }
DrivingCommand command_from_string(const std::string & s) { return value_of(kCommandNames, s, "command"); }
ScenarioTemplate template_from_string(const std::string & s) { return value_of(kTemplateNames, s, "template"); }

Pose2 RoadSpec::pose_at(double station, double offset) const
{
  if (std::abs(curvature) < 1e-12) {
    return compose_se2(origin, Pose2(station, offset, 0.0));
  }
  const double r = 1.0 / curvature;
  const double theta = origin.yaw + curvature * station;
  const Vec2 n0{-std::sin(origin.yaw), std::cos(origin.yaw)};
  const Vec2 n{-std::sin(theta), std::cos(theta)};
  const Vec2 center = origin.translation() + r * n0;
  const Vec2 p = center - (r - offset) * n;
  return {p.x, p.y, theta};
}

Vec2 RoadSpec::project(const Vec2 & p) const
{
  if (std::abs(curvature) < 1e-12) {
    return inverse_transform_point(origin, p);
  }
  const double r = 1.0 / curvature;
  const Vec2 n0{-std::sin(origin.yaw), std::cos(origin.yaw)};
  const Vec2 v = p - (origin.translation() + r * n0);
  const double rho = v.norm();
  if (rho < 1e-9) {
    return {0.0, r};
  }
  // n(theta) points from the reference line towards the centre for left turns.
  const Vec2 n = curvature > 0.0 ? (-1.0 / rho) * v : (1.0 / rho) * v;
  const double theta = std::atan2(-n.x, n.y);
  const double offset = curvature > 0.0 ? r - rho : rho + r;
  return {normalize_angle(theta - origin.yaw) / curvature, offset};
}

std::size_t Scenario::frame_count() const { return static_cast<std::size_t>(std::llround(duration_s / frame_dt)); }

void Scenario::validate() const
{
  if (std::abs(frame_dt - kFrameDt) > 1e-12) {
    throw ConfigError("frame_dt must be 0.5 s");
  }
  if (!(duration_s > 0.0) || std::abs(duration_s / frame_dt - std::round(duration_s / frame_dt)) > 1e-9) {
    throw ConfigError("duration_s must be a positive multiple of frame_dt");
  }
  if (commands.size() != frame_count()) {
    throw ConfigError("commands must have one entry per frame");
  }
  std::set<int> ids;
  for (const auto & agent : agents) {
    if (!ids.insert(agent.agent_id).second) {
      throw ConfigError("duplicate agent_id " + std::to_string(agent.agent_id));
    }
    const double v_max = agent.cls == AgentClass::kCar ? kCarSpeedMax : kPedSpeedMax;
    if (!(agent.speed >= 0.0) || agent.speed > v_max) {
      throw ConfigError("agent speed out of range");
    }
    if (!(agent.length > 0.0) || !(agent.width > 0.0)) {
      throw ConfigError("agent size must be positive");
    }
  }
  for (const auto & line : map.polylines) {
    if (line.points.size() < 2) {
      throw ConfigError("polyline needs at least 2 points");
    }
    for (std::size_t i = 1; i < line.points.size(); ++i) {
      if (line.points[i] == line.points[i - 1]) {
        throw ConfigError("polyline has repeated consecutive points");
      }
    }
  }
}

Scenario generate_scenario(std::uint64_t seed, ScenarioTemplate templ, const SceneConfig & config)
{
  if (config.min_agents < 1 || config.max_agents < config.min_agents) {
    throw ConfigError("agent count range is empty");
  }
  Rng rng(seed ^ (static_cast<std::uint64_t>(templ) << 56));
  Scenario sc;
  switch (templ) {
    case ScenarioTemplate::kOpenLoopRandom:
      sc = make_open_loop(rng, config);
      break;
    case ScenarioTemplate::kFrontalAdversary:
      sc = make_frontal(rng, config);
      break;
    case ScenarioTemplate::kSideAdversary:
      sc = make_side(rng, config);
      break;
    case ScenarioTemplate::kStationaryBlockage:
      sc = make_blockage(rng, config);
      break;
    default:
      throw ConfigError("unknown scenario template");
  }
  sc.seed = seed;
  sc.templ = templ;
  finalize(sc);
  return sc;
}

WorldState initial_world(const Scenario & scenario, EgoMode mode)
{
  WorldState state;
  state.road = scenario.road;
  state.agents = scenario.agents;
  state.ego.pose = scenario.ego.pose;
  state.ego.speed = scenario.ego.speed;
  state.ego.station = scenario.road.project(scenario.ego.pose.translation()).x;
  state.ego.lane_offset = scenario.ego.lane_offset;
  state.ego.desired_speed = scenario.ego.desired_speed;
  state.ego.length = scenario.ego.length;
  state.ego.width = scenario.ego.width;
  state.ego_mode = mode;
  return state;
}

WorldState step_world(const WorldState & state, double dt)
{
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step_world: dt must be positive");
  }
  WorldState next = state;
  next.time = state.time + dt;
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    next.agents[i] = advance_agent(state.agents[i], state.road, state.time, dt);
  }
  if (state.ego_mode == EgoMode::kExpert) {
    const int substeps = std::max(1, static_cast<int>(std::ceil(dt / kEgoSubstep - 1e-9)));
    const double h = dt / substeps;
    EgoState ego = state.ego;
    std::vector<AgentTruth> agents = state.agents;
    for (int k = 0; k < substeps; ++k) {
      if (k > 0) {
        for (std::size_t i = 0; i < agents.size(); ++i) {
          agents[i] = advance_agent(state.agents[i], state.road, state.time, k * h);
        }
      }
      const double accel = idm_accel(ego, state.road, agents);
      const auto [ds, v] = integrate_speed(ego.speed, accel, h, kCarSpeedMax);
      ego.station += ds;
      ego.speed = v;
    }
    ego.pose = state.road.pose_at(ego.station, ego.lane_offset);
    next.ego = ego;
  }
  return next;
}

std::vector<WorldState> rollout(const Scenario & scenario)
{
  std::vector<WorldState> frames;
  frames.reserve(scenario.frame_count());
  frames.push_back(initial_world(scenario));
  while (frames.size() < scenario.frame_count()) {
    frames.push_back(step_world(frames.back(), scenario.frame_dt));
  }
  return frames;
}

OrientedBox2 agent_box(const AgentTruth & agent)
{
  return {agent.pose.translation(), agent.length, agent.width, agent.pose.yaw};
}

Vec2 agent_velocity(const AgentTruth & agent)
{
  return {agent.speed * std::cos(agent.pose.yaw), agent.speed * std::sin(agent.pose.yaw)};
}

OrientedBox2 ego_box(const EgoState & ego) { return {ego.pose.translation(), ego.length, ego.width, ego.pose.yaw}; }

NoiseConfig NoiseConfig::none()
{
  NoiseConfig n;
  n.pos_std_car = n.pos_std_ped = n.yaw_std = n.vel_std_car = n.vel_std_ped = n.size_std = n.map_std = 0.0;
  n.dropout = n.clutter_rate = 0.0;
  return n;
}

Box11 box_from_pose(const Pose2 & pose, const Vec2 & velocity, double length, double width, double height)
{
  return {pose.x,           pose.y,           0.5 * height, std::log(width), std::log(height), std::log(length),
          std::sin(pose.yaw), std::cos(pose.yaw), velocity.x,   velocity.y,      0.0};
}

ObservationFrame observe(const WorldState & state, const NoiseConfig & noise, std::uint64_t rng_seed)
{
  Rng rng(rng_seed);
  ObservationFrame frame;
  frame.timestamp = state.time;
  frame.frame_index = static_cast<int>(std::llround(state.time / kFrameDt));
  frame.ego_pose = state.ego.pose;
  frame.command = command_for(state.road.curvature);

  for (const auto & agent : state.agents) {
    const auto rel = relative_pose(state.ego.pose, agent.pose);
    if (rel.translation().norm() > noise.range) {
      continue;
    }
    const auto vel = rotate(agent_velocity(agent), -state.ego.pose.yaw);
    AgentGroundTruth gt;
    gt.agent_id = agent.agent_id;
    gt.cls = agent.cls;
    gt.box = box_from_pose(rel, vel, agent.length, agent.width, height_of(agent.cls));
    gt.length = agent.length;
    gt.width = agent.width;
    frame.gt_agents.push_back(gt);

    const bool dropped = rng.bernoulli(noise.dropout);
    Box11 box = gt.box;
    add_noise(box, agent.cls, noise, rng);
    if (!dropped) {
      frame.agents.push_back({agent.agent_id, agent.cls, box});
    }
  }
  if (rng.bernoulli(noise.clutter_rate)) {
    const double r = noise.range * std::sqrt(rng.uniform(0.0, 1.0));
    const double phi = rng.uniform(-kPi, kPi);
    const Pose2 pose(r * std::cos(phi), r * std::sin(phi), rng.uniform(-kPi, kPi));
    ObservedAgent clutter;
    clutter.agent_id = 1000000 + static_cast<int>(rng.bits() % 1000000);
    clutter.cls = AgentClass::kCar;
    clutter.box = box_from_pose(pose, {0.0, 0.0}, 4.5, 1.9, kCarHeight);
    add_noise(clutter.box, clutter.cls, noise, rng);
    frame.agents.push_back(clutter);
  }

  const auto map = build_map(state.road);
  for (const auto & line : map.polylines) {
    MapPolyline gt{line.cls, {}};
    for (const auto & p : line.points) {
      const auto q = inverse_transform_point(state.ego.pose, p);
      if (q.norm() <= noise.range) {
        gt.points.push_back(q);
      }
    }
    if (gt.points.size() < 2) {
      continue;
    }
    MapPolyline obs = gt;
    for (auto & p : obs.points) {
      p.x += rng.normal(noise.map_std);
      p.y += rng.normal(noise.map_std);
    }
    frame.gt_map.push_back(std::move(gt));
    frame.map.push_back(std::move(obs));
  }
  return frame;
}

void attach_futures(ObservationFrame & frame, const std::vector<WorldState> & frames, std::size_t index,
                    int agent_steps, int ego_steps)
{
  if (index >= frames.size()) {
    throw std::out_of_range("attach_futures: frame index past rollout");
  }
  const Pose2 & ego = frames[index].ego.pose;
  for (auto & gt : frame.gt_agents) {
    gt.future.assign(agent_steps, Vec2{});
    gt.future_yaw.assign(agent_steps, 0.0);
    gt.future_mask.assign(agent_steps, 0);
    for (int s = 1; s <= agent_steps; ++s) {
      if (index + s >= frames.size()) {
        break;
      }
      for (const auto & agent : frames[index + s].agents) {
        if (agent.agent_id == gt.agent_id) {
          const auto rel = relative_pose(ego, agent.pose);
          gt.future[s - 1] = rel.translation();
          gt.future_yaw[s - 1] = rel.yaw;
          gt.future_mask[s - 1] = 1;
        }
      }
    }
  }
  frame.gt_ego_future.assign(ego_steps, Vec2{});
  frame.gt_ego_mask.assign(ego_steps, 0);
  for (int s = 1; s <= ego_steps && index + s < frames.size(); ++s) {
    frame.gt_ego_future[s - 1] = inverse_transform_point(ego, frames[index + s].ego.pose.translation());
    frame.gt_ego_mask[s - 1] = 1;
  }
}

std::uint64_t observation_seed(std::uint64_t scenario_seed, std::size_t index, std::uint64_t stream)
{
  return splitmix64(scenario_seed ^ splitmix64(static_cast<std::uint64_t>(index) + (stream << 32)));
}

std::vector<ObservationFrame> observe_scenario(const Scenario & scenario, const NoiseConfig & noise, int agent_steps,
                                               int ego_steps, std::uint64_t stream)
{
  const auto frames = rollout(scenario);
  std::vector<ObservationFrame> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto obs = observe(frames[i], noise, observation_seed(scenario.seed, i, stream));
    obs.frame_index = static_cast<int>(i);
    obs.command = scenario.commands[i];
    attach_futures(obs, frames, i, agent_steps, ego_steps);
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace bridgead::scene
