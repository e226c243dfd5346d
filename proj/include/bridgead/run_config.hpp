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


#ifndef BRIDGEAD__RUN_CONFIG_HPP_
#define BRIDGEAD__RUN_CONFIG_HPP_

#include "bridgead/model_config.hpp"
#include "bridgead/scene.hpp"
#include "bridgead/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace bridgead
{

inline constexpr int kConfigSchema = 1;

struct SimConfig
{
  scene::ScenarioTemplate templ{scene::ScenarioTemplate::kOpenLoopRandom};
  int train_scenarios{200};
  int eval_scenarios{50};
  scene::SceneConfig scene;
  scene::NoiseConfig noise;
  /// Closed-loop integration step (s).
  double control_dt{0.1};

  friend bool operator==(const SimConfig &, const SimConfig &) = default;
};

struct Seeds
{
  std::uint64_t model{1};
  std::uint64_t train{2};
  std::uint64_t data{3};
  std::uint64_t eval{4};

  friend bool operator==(const Seeds &, const Seeds &) = default;
};

struct Paths
{
  std::string data_dir{"data"};
  std::string output_dir{"runs"};

  friend bool operator==(const Paths &, const Paths &) = default;
};

struct RunConfig
{
  int schema{kConfigSchema};
  bool paper_preset{false};
  ModelConfig model;
  training::TrainConfig train;
  SimConfig sim;
  AblationFlags ablation;
  Seeds seeds;
  Paths paths;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const RunConfig &, const RunConfig &) = default;
};

nlohmann::json to_json(const RunConfig & cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json & doc);

/// Environment names (BRIDGEAD_<SECTION>_<KEY>, upper case) of every leaf key.
std::map<std::string, std::string> env_override_names();
/// Applies BRIDGEAD_* overrides from `env` (name -> value) onto a config document.
void apply_env_overrides(nlohmann::json & doc, const std::map<std::string, std::string> & env);
/// BRIDGEAD_* entries of the process environment.
std::map<std::string, std::string> process_env_overrides();

/// Parse, apply environment overrides and validate.
RunConfig load_config(const std::filesystem::path & path, bool use_env = true);
void save_config(const RunConfig & cfg, const std::filesystem::path & path);

/// 16 hex digit FNV-1a hash of the canonical config (paths excluded).
std::string config_hash(const RunConfig & cfg);
std::uint64_t fnv1a64(const std::string & bytes);

}  // namespace bridgead

#endif  // BRIDGEAD__RUN_CONFIG_HPP_
