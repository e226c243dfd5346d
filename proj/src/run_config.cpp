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


#include "bridgead/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

extern char ** environ;

namespace bridgead
{
namespace
{

using nlohmann::json;

json model_json(const ModelConfig & m)
{
  return {{"channels", m.channels},
          {"max_objects", m.max_objects},
          {"map_queries", m.map_queries},
          {"map_points", m.map_points},
          {"decoder_layers", m.decoder_layers},
          {"heads", m.heads},
          {"motion_modes", m.motion_modes},
          {"motion_steps", m.motion_steps},
          {"plan_modes", m.plan_modes},
          {"plan_steps", m.plan_steps},
          {"history_frames", m.history_frames},
          {"t_m2m", m.t_m2m},
          {"t_p2p", m.t_p2p},
          {"track_score_threshold", m.track_score_threshold}};
}

json train_json(const training::TrainConfig & t)
{
  const auto & w = t.weights;
  return {{"weights",
           {{"det_reg", w.det_reg},
            {"det_cls", w.det_cls},
            {"map_reg", w.map_reg},
            {"map_cls", w.map_cls},
            {"mot_reg", w.mot_reg},
            {"mot_cls", w.mot_cls},
            {"plan_reg", w.plan_reg},
            {"plan_cls", w.plan_cls}}},
          {"focal_gamma", t.focal_gamma},
          {"focal_alpha", t.focal_alpha},
          {"match_radius", t.match_radius},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"min_lr_ratio", t.min_lr_ratio},
          {"grad_clip", t.grad_clip},
          {"epochs", t.epochs},
          {"perception_epochs", t.perception_epochs},
          {"stage", to_string(t.stage)},
          {"from_scratch", t.from_scratch},
          {"init_checkpoint", t.init_checkpoint}};
}

json noise_json(const scene::NoiseConfig & n)
{
  return {{"pos_std_car", n.pos_std_car}, {"pos_std_ped", n.pos_std_ped}, {"yaw_std", n.yaw_std},
          {"vel_std_car", n.vel_std_car}, {"vel_std_ped", n.vel_std_ped}, {"size_std", n.size_std},
          {"map_std", n.map_std},         {"dropout", n.dropout},         {"clutter_rate", n.clutter_rate},
          {"range", n.range}};
}

json sim_json(const SimConfig & s)
{
  return {{"template", scene::to_string(s.templ)},
          {"train_scenarios", s.train_scenarios},
          {"eval_scenarios", s.eval_scenarios},
          {"min_agents", s.scene.min_agents},
          {"max_agents", s.scene.max_agents},
          {"duration_s", s.scene.duration_s},
          {"adversary_duration_s", s.scene.adversary_duration_s},
          {"control_dt", s.control_dt},
          {"noise", noise_json(s.noise)}};
}

json ablation_json(const AblationFlags & f)
{
  return {{"mot2det", f.mot2det},     {"his_mot", f.his_mot},
          {"his_plan", f.his_plan},   {"mot2plan", f.mot2plan},
          {"step_self_attn", f.step_self_attn}, {"mode_self_attn", f.mode_self_attn}};
}

std::string join(const std::vector<std::string> & path)
{
  std::string out;
  for (const auto & p : path) {
    out += (out.empty() ? "" : ".") + p;
  }
  return out;
}

/// Every key of `doc` must exist in `schema` with the same kind.
void check_keys(const json & doc, const json & schema, std::vector<std::string> & path)
{
  if (!doc.is_object()) {
    throw ConfigError((path.empty() ? std::string("config") : join(path)) + ": expected an object");
  }
  for (const auto & [key, value] : doc.items()) {
    path.push_back(key);
    if (!schema.contains(key)) {
      throw ConfigError(join(path) + ": unknown key");
    }
    const auto & ref = schema.at(key);
    if (ref.is_object()) {
      check_keys(value, ref, path);
    } else if (value.is_object() || value.is_array()) {
      throw ConfigError(join(path) + ": expected a scalar value");
    }
    path.pop_back();
  }
}

void merge_into(json & base, const json & doc)
{
  for (const auto & [key, value] : doc.items()) {
    if (value.is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

class Section
{
public:
  Section(const json & obj, std::string name) : obj_(obj), name_(std::move(name)) {}

  template <typename T>
  void get(const char * key, T & out) const
  {
    const auto & v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) {
          throw ConfigError("expected a boolean");
        }
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
          throw ConfigError("expected an integer");
        }
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.template get<std::int64_t>() < 0) {
            throw ConfigError("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) {
          throw ConfigError("expected a number");
        }
      } else {
        if (!v.is_string()) {
          throw ConfigError("expected a string");
        }
      }
      out = v.template get<T>();
    } catch (const ConfigError & e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }
  Section sub(const char * key) const { return {obj_.at(key), name_ + "." + key}; }
  const std::string & name() const { return name_; }

private:
  const json & obj_;
  std::string name_;
};

RunConfig parse_full(const json & doc)
{
  RunConfig cfg;
  Section root(doc, "config");
  root.get("schema", cfg.schema);
  root.get("paper_preset", cfg.paper_preset);

  auto m = root.sub("model");
  auto & mc = cfg.model;
  m.get("channels", mc.channels);
  m.get("max_objects", mc.max_objects);
  m.get("map_queries", mc.map_queries);
  m.get("map_points", mc.map_points);
  m.get("decoder_layers", mc.decoder_layers);
  m.get("heads", mc.heads);
  m.get("motion_modes", mc.motion_modes);
  m.get("motion_steps", mc.motion_steps);
  m.get("plan_modes", mc.plan_modes);
  m.get("plan_steps", mc.plan_steps);
  m.get("history_frames", mc.history_frames);
  m.get("t_m2m", mc.t_m2m);
  m.get("t_p2p", mc.t_p2p);
  m.get("track_score_threshold", mc.track_score_threshold);

  auto t = root.sub("train");
  auto & tc = cfg.train;
  auto w = t.sub("weights");
  w.get("det_reg", tc.weights.det_reg);
  w.get("det_cls", tc.weights.det_cls);
  w.get("map_reg", tc.weights.map_reg);
  w.get("map_cls", tc.weights.map_cls);
  w.get("mot_reg", tc.weights.mot_reg);
  w.get("mot_cls", tc.weights.mot_cls);
  w.get("plan_reg", tc.weights.plan_reg);
  w.get("plan_cls", tc.weights.plan_cls);
  t.get("focal_gamma", tc.focal_gamma);
  t.get("focal_alpha", tc.focal_alpha);
  t.get("match_radius", tc.match_radius);
  t.get("lr", tc.lr);
  t.get("weight_decay", tc.weight_decay);
  t.get("beta1", tc.beta1);
  t.get("beta2", tc.beta2);
  t.get("adam_eps", tc.adam_eps);
  t.get("min_lr_ratio", tc.min_lr_ratio);
  t.get("grad_clip", tc.grad_clip);
  t.get("epochs", tc.epochs);
  t.get("perception_epochs", tc.perception_epochs);
  std::string stage;
  t.get("stage", stage);
  tc.stage = stage_from_string(stage);
  t.get("from_scratch", tc.from_scratch);
  t.get("init_checkpoint", tc.init_checkpoint);

  auto s = root.sub("sim");
  auto & sc = cfg.sim;
  std::string templ;
  s.get("template", templ);
  sc.templ = scene::template_from_string(templ);
  s.get("train_scenarios", sc.train_scenarios);
  s.get("eval_scenarios", sc.eval_scenarios);
  s.get("min_agents", sc.scene.min_agents);
  s.get("max_agents", sc.scene.max_agents);
  s.get("duration_s", sc.scene.duration_s);
  s.get("adversary_duration_s", sc.scene.adversary_duration_s);
  s.get("control_dt", sc.control_dt);
  auto n = s.sub("noise");
  n.get("pos_std_car", sc.noise.pos_std_car);
  n.get("pos_std_ped", sc.noise.pos_std_ped);
  n.get("yaw_std", sc.noise.yaw_std);
  n.get("vel_std_car", sc.noise.vel_std_car);
  n.get("vel_std_ped", sc.noise.vel_std_ped);
  n.get("size_std", sc.noise.size_std);
  n.get("map_std", sc.noise.map_std);
  n.get("dropout", sc.noise.dropout);
  n.get("clutter_rate", sc.noise.clutter_rate);
  n.get("range", sc.noise.range);

  auto a = root.sub("ablation");
  a.get("mot2det", cfg.ablation.mot2det);
  a.get("his_mot", cfg.ablation.his_mot);
  a.get("his_plan", cfg.ablation.his_plan);
  a.get("mot2plan", cfg.ablation.mot2plan);
  a.get("step_self_attn", cfg.ablation.step_self_attn);
  a.get("mode_self_attn", cfg.ablation.mode_self_attn);

  auto seeds = root.sub("seeds");
  seeds.get("model", cfg.seeds.model);
  seeds.get("train", cfg.seeds.train);
  seeds.get("data", cfg.seeds.data);
  seeds.get("eval", cfg.seeds.eval);
  cfg.train.seed = cfg.seeds.train;

  auto p = root.sub("paths");
  p.get("data_dir", cfg.paths.data_dir);
  p.get("output_dir", cfg.paths.output_dir);
  return cfg;
}

void collect_leaves(const json & doc, std::vector<std::string> & path, std::map<std::string, std::string> & out)
{
  for (const auto & [key, value] : doc.items()) {
    path.push_back(key);
    if (value.is_object()) {
      collect_leaves(value, path, out);
    } else {
      std::string name = "BRIDGEAD";
      std::string dotted;
      for (const auto & part : path) {
        name += "_";
        for (const char ch : part) {
          name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        }
        dotted += (dotted.empty() ? "" : ".") + part;
      }
      out.emplace(name, dotted);
    }
    path.pop_back();
  }
}

json parse_env_value(const std::string & name, const std::string & text, const json & like)
{
  try {
    if (like.is_boolean()) {
      if (text == "true" || text == "1") {
        return true;
      }
      if (text == "false" || text == "0") {
        return false;
      }
      throw ConfigError("expected true/false");
    }
    std::size_t used = 0;
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') {
        throw ConfigError("expected a non-negative integer");
      }
      const auto v = std::stoull(text, &used);
      if (used != text.size()) {
        throw ConfigError("expected an integer");
      }
      return v;
    }
    if (like.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      if (used != text.size()) {
        throw ConfigError("expected an integer");
      }
      return v;
    }
    if (like.is_number()) {
      const auto v = std::stod(text, &used);
      if (used != text.size()) {
        throw ConfigError("expected a number");
      }
      return v;
    }
    return text;
  } catch (const std::logic_error &) {
    throw ConfigError(name + ": cannot parse '" + text + "'");
  } catch (const ConfigError & e) {
    throw ConfigError(name + ": " + e.what());
  }
}

json defaults_document(bool paper_preset)
{
  RunConfig d;
  d.paper_preset = paper_preset;
  if (paper_preset) {
    d.model.apply_paper_preset();
  }
  return to_json(d);
}

}  // namespace

void RunConfig::validate() const
{
  if (schema != kConfigSchema) {
    throw ConfigError("schema: unsupported version " + std::to_string(schema) + " (expected " +
                      std::to_string(kConfigSchema) + ")");
  }
  model.validate();
  if (paper_preset) {
    ModelConfig preset = model;
    preset.apply_paper_preset();
    const std::pair<const char *, std::pair<int, int>> fields[] = {
      {"motion_steps", {model.motion_steps, preset.motion_steps}},
      {"plan_steps", {model.plan_steps, preset.plan_steps}},
      {"history_frames", {model.history_frames, preset.history_frames}},
      {"t_m2m", {model.t_m2m, preset.t_m2m}},
      {"t_p2p", {model.t_p2p, preset.t_p2p}},
      {"motion_modes", {model.motion_modes, preset.motion_modes}}};
    for (const auto & [name, values] : fields) {
      if (values.first != values.second) {
        throw ConfigError(std::string("model.") + name + ": paper_preset requires " + std::to_string(values.second) +
                          ", got " + std::to_string(values.first));
      }
    }
    if (model.motion_steps != 2 * model.plan_steps) {
      throw ConfigError("model.motion_steps: paper_preset requires motion_steps = 2 * plan_steps");
    }
  }
  train.validate();
  if (train.seed != seeds.train) {
    throw ConfigError("seeds.train: does not match the training seed");
  }
  if (sim.train_scenarios < 0 || sim.eval_scenarios < 0) {
    throw ConfigError("sim.train_scenarios/eval_scenarios: must be >= 0");
  }
  if (sim.scene.min_agents < 0 || sim.scene.max_agents < sim.scene.min_agents) {
    throw ConfigError("sim.max_agents: must be >= min_agents >= 0");
  }
  if (!(sim.scene.duration_s > 0.0) || !(sim.scene.adversary_duration_s > 0.0)) {
    throw ConfigError("sim.duration_s: must be > 0");
  }
  if (!(sim.control_dt > 0.0) || sim.control_dt > scene::kFrameDt) {
    throw ConfigError("sim.control_dt: must lie in (0, 0.5]");
  }
  const auto & n = sim.noise;
  for (const double v : {n.pos_std_car, n.pos_std_ped, n.yaw_std, n.vel_std_car, n.vel_std_ped, n.size_std, n.map_std}) {
    if (!(v >= 0.0)) {
      throw ConfigError("sim.noise: standard deviations must be >= 0");
    }
  }
  if (!(n.dropout >= 0.0 && n.dropout < 1.0) || !(n.clutter_rate >= 0.0 && n.clutter_rate <= 1.0)) {
    throw ConfigError("sim.noise.dropout/clutter_rate: must be probabilities");
  }
  if (!(n.range > 0.0)) {
    throw ConfigError("sim.noise.range: must be > 0");
  }
}

nlohmann::json to_json(const RunConfig & cfg)
{
  return {{"schema", cfg.schema},
          {"paper_preset", cfg.paper_preset},
          {"model", model_json(cfg.model)},
          {"train", train_json(cfg.train)},
          {"sim", sim_json(cfg.sim)},
          {"ablation", ablation_json(cfg.ablation)},
          {"seeds", {{"model", cfg.seeds.model}, {"train", cfg.seeds.train}, {"data", cfg.seeds.data},
                     {"eval", cfg.seeds.eval}}},
          {"paths", {{"data_dir", cfg.paths.data_dir}, {"output_dir", cfg.paths.output_dir}}}};
}

RunConfig run_config_from_json(const nlohmann::json & doc)
{
  std::vector<std::string> path;
  const json schema = defaults_document(false);
  check_keys(doc, schema, path);
  bool preset = false;
  if (doc.contains("paper_preset")) {
    if (!doc.at("paper_preset").is_boolean()) {
      throw ConfigError("paper_preset: expected a boolean");
    }
    preset = doc.at("paper_preset").get<bool>();
  }
  json full = defaults_document(preset);
  merge_into(full, doc);
  return parse_full(full);
}

std::map<std::string, std::string> env_override_names()
{
  std::map<std::string, std::string> out;
  std::vector<std::string> path;
  collect_leaves(defaults_document(false), path, out);
  return out;
}

void apply_env_overrides(nlohmann::json & doc, const std::map<std::string, std::string> & env)
{
  const auto names = env_override_names();
  const json schema = defaults_document(false);
  for (const auto & [name, value] : env) {
    const auto it = names.find(name);
    if (it == names.end()) {
      throw ConfigError(name + ": environment override does not name a config key");
    }
    const json::json_pointer ptr("/" + [&] {
      std::string s = it->second;
      std::replace(s.begin(), s.end(), '.', '/');
      return s;
    }());
    doc[ptr] = parse_env_value(name, value, schema.at(ptr));
  }
}

std::map<std::string, std::string> process_env_overrides()
{
  std::map<std::string, std::string> out;
  for (char ** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    if (entry.rfind("BRIDGEAD_", 0) != 0) {
      continue;
    }
    const auto eq = entry.find('=');
    out.emplace(entry.substr(0, eq), eq == std::string::npos ? "" : entry.substr(eq + 1));
  }
  return out;
}

RunConfig load_config(const std::filesystem::path & path, bool use_env)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception & e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (use_env) {
    apply_env_overrides(doc, process_env_overrides());
  }
  auto cfg = run_config_from_json(doc);
  cfg.validate();
  return cfg;
}

void save_config(const RunConfig & cfg, const std::filesystem::path & path)
{
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << to_json(cfg).dump(2) << "\n";
  if (!out) {
    throw std::runtime_error("failed writing " + path.string());
  }
}

std::uint64_t fnv1a64(const std::string & bytes)
{
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const RunConfig & cfg)
{
  auto doc = to_json(cfg);
  doc.erase("paths");
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(doc.dump());
  return os.str();
}

}  // namespace bridgead
