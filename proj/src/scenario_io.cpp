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

#include "bridgead/scenario_io.hpp"

#include <fstream>
#include <set>

namespace bridgead::scene
{
namespace
{

using nlohmann::json;

json pose_json(const Pose2 & p) { return json::array({p.x, p.y, p.yaw}); }
json point_json(const Vec2 & p) { return json::array({p.x, p.y}); }

json points_json(const std::vector<Vec2> & pts)
{
  json out = json::array();
  for (const auto & p : pts) {
    out.push_back(point_json(p));
  }
  return out;
}

void require_keys(const json & obj, const std::set<std::string> & required, const std::set<std::string> & optional,
                  const std::string & where)
{
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto & key : required) {
    if (!obj.contains(key)) {
      throw ConfigError(where + ": missing key '" + key + "'");
    }
  }
  for (const auto & item : obj.items()) {
    if (!required.count(item.key()) && !optional.count(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

Pose2 pose_from(const json & j)
{
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("pose must be [x, y, yaw]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 point_from(const json & j)
{
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("point must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Vec2> points_from(const json & j)
{
  std::vector<Vec2> out;
  for (const auto & p : j) {
    out.push_back(point_from(p));
  }
  return out;
}

json agent_json(const AgentTruth & a)
{
  json j{{"agent_id", a.agent_id},
         {"class", to_string(a.cls)},
         {"pose", pose_json(a.pose)},
         {"speed", a.speed},
         {"size", json::array({a.length, a.width})},
         {"behavior", to_string(a.behavior)}};
  json profile = json::array();
  for (const auto & seg : a.accel_profile) {
    profile.push_back(json::array({seg.t_start, seg.accel}));
  }
  j["lane_offset"] = a.lane_offset;
  j["direction"] = a.direction;
  j["station"] = a.station;
  j["accel_profile"] = profile;
  j["path_origin"] = pose_json(a.path_origin);
  j["cruise_speed"] = a.cruise_speed;
  j["stop_distance"] = a.stop_distance;
  j["stop_decel"] = a.stop_decel;
  return j;
}

AgentTruth agent_from(const json & j)
{
  require_keys(j, {"agent_id", "class", "pose", "speed", "size", "behavior"},
               {"lane_offset", "direction", "station", "accel_profile", "path_origin", "cruise_speed",
                "stop_distance", "stop_decel"},
               "agent");
  AgentTruth a;
  a.agent_id = j.at("agent_id").get<int>();
  a.cls = agent_class_from_string(j.at("class").get<std::string>());
  a.pose = pose_from(j.at("pose"));
  a.speed = j.at("speed").get<double>();
  const auto size = point_from(j.at("size"));
  a.length = size.x;
  a.width = size.y;
  a.behavior = behavior_from_string(j.at("behavior").get<std::string>());
  if (j.contains("lane_offset")) {
    a.lane_offset = j.at("lane_offset").get<double>();
    a.direction = j.at("direction").get<int>();
    a.station = j.at("station").get<double>();
    for (const auto & seg : j.at("accel_profile")) {
      const auto p = point_from(seg);
      a.accel_profile.push_back({p.x, p.y});
    }
  } else if (a.behavior == Behavior::kLaneFollow) {
    throw ConfigError("lane_follow agent needs lane_offset, direction, station and accel_profile");
  }
  if (j.contains("path_origin")) {
    a.path_origin = pose_from(j.at("path_origin"));
    a.cruise_speed = j.at("cruise_speed").get<double>();
    a.stop_distance = j.at("stop_distance").get<double>();
    a.stop_decel = j.at("stop_decel").get<double>();
  } else if (a.behavior == Behavior::kScriptedAdversary) {
    throw ConfigError("scripted_adversary agent needs path_origin, cruise_speed, stop_distance and stop_decel");
  }
  if (a.direction != 1 && a.direction != -1) {
    throw ConfigError("agent direction must be +1 or -1");
  }
  if (a.behavior == Behavior::kScriptedAdversary && !(a.stop_decel > 0.0)) {
    throw ConfigError("stop_decel must be positive");
  }
  return a;
}

}  // namespace

json to_json(const Scenario & sc)
{
  json road{{"origin", pose_json(sc.road.origin)},
            {"curvature", sc.road.curvature},
            {"lane_width", sc.road.lane_width},
            {"length", sc.road.length},
            {"crossing_station", sc.road.crossing_station ? json(*sc.road.crossing_station) : json(nullptr)}};
  json polylines = json::array();
  for (const auto & line : sc.map.polylines) {
    polylines.push_back({{"class", to_string(line.cls)}, {"points", points_json(line.points)}});
  }
  json agents = json::array();
  for (const auto & a : sc.agents) {
    agents.push_back(agent_json(a));
  }
  json commands = json::array();
  for (const auto c : sc.commands) {
    commands.push_back(to_string(c));
  }
  return json{{"seed", sc.seed},
              {"template", to_string(sc.templ)},
              {"frame_dt", sc.frame_dt},
              {"duration_s", sc.duration_s},
              {"map", {{"road", road}, {"polylines", polylines}}},
              {"agents", agents},
              {"ego",
               {{"pose", pose_json(sc.ego.pose)},
                {"speed", sc.ego.speed},
                {"desired_speed", sc.ego.desired_speed},
                {"lane_offset", sc.ego.lane_offset},
                {"size", json::array({sc.ego.length, sc.ego.width})},
                {"route", points_json(sc.ego.route)}}},
              {"commands", commands}};
}

Scenario scenario_from_json(const json & doc)
{
  try {
    require_keys(doc, {"seed", "template", "frame_dt", "duration_s", "map", "agents", "ego", "commands"}, {},
                 "scenario");
    Scenario sc;
    sc.seed = doc.at("seed").get<std::uint64_t>();
    sc.templ = template_from_string(doc.at("template").get<std::string>());
    sc.frame_dt = doc.at("frame_dt").get<double>();
    sc.duration_s = doc.at("duration_s").get<double>();

    const auto & map = doc.at("map");
    require_keys(map, {"road", "polylines"}, {}, "map");
    const auto & road = map.at("road");
    require_keys(road, {"origin", "curvature", "lane_width", "length"}, {"crossing_station"}, "road");
    sc.road.origin = pose_from(road.at("origin"));
    sc.road.curvature = road.at("curvature").get<double>();
    sc.road.lane_width = road.at("lane_width").get<double>();
    sc.road.length = road.at("length").get<double>();
    if (road.contains("crossing_station") && !road.at("crossing_station").is_null()) {
      sc.road.crossing_station = road.at("crossing_station").get<double>();
    }
    for (const auto & line : map.at("polylines")) {
      require_keys(line, {"class", "points"}, {}, "polyline");
      sc.map.polylines.push_back({map_class_from_string(line.at("class").get<std::string>()), points_from(line.at("points"))});
    }
    for (const auto & a : doc.at("agents")) {
      sc.agents.push_back(agent_from(a));
    }
    const auto & ego = doc.at("ego");
    require_keys(ego, {"pose", "speed", "desired_speed", "lane_offset", "size", "route"}, {}, "ego");
    sc.ego.pose = pose_from(ego.at("pose"));
    sc.ego.speed = ego.at("speed").get<double>();
    sc.ego.desired_speed = ego.at("desired_speed").get<double>();
    sc.ego.lane_offset = ego.at("lane_offset").get<double>();
    const auto size = point_from(ego.at("size"));
    sc.ego.length = size.x;
    sc.ego.width = size.y;
    sc.ego.route = points_from(ego.at("route"));
    for (const auto & c : doc.at("commands")) {
      sc.commands.push_back(command_from_string(c.get<std::string>()));
    }
    sc.validate();
    return sc;
  } catch (const json::exception & e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

void save_scenario(const Scenario & scenario, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << to_json(scenario).dump(2) << '\n';
}

Scenario load_scenario(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  try {
    return scenario_from_json(json::parse(in));
  } catch (const nlohmann::json::parse_error & e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace bridgead::scene
