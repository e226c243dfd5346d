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


#include "bridgead/dataset.hpp"

#include "bridgead/scenario_io.hpp"

#include <algorithm>
#include <cstdio>

namespace bridgead
{

std::uint64_t scenario_seed(std::uint64_t base, std::size_t index)
{
  // Distinct stream from the observation noise seeds.
  return scene::observation_seed(base, index, 0x5ce7a510ull);
}

std::string scenario_name(std::uint64_t base, std::size_t index)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "scenario_%04llu_%03zu", static_cast<unsigned long long>(base), index);
  return buf;
}

std::vector<NamedScenario> generate_scenarios(scene::ScenarioTemplate templ, std::size_t count, std::uint64_t base_seed,
                                              const scene::SceneConfig & cfg)
{
  std::vector<NamedScenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({scenario_name(base_seed, i), scene::generate_scenario(scenario_seed(base_seed, i), templ, cfg)});
  }
  return out;
}

std::vector<NamedScenario> load_scenario_dir(const std::filesystem::path & dir)
{
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("scenario directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto & entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && entry.path().extension() == ".json" && name.front() != '_') {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedScenario> out;
  for (const auto & f : files) {
    out.push_back({f.stem().string(), scene::load_scenario(f)});
  }
  return out;
}

evaluation::LabeledSequence make_sequence(const NamedScenario & sc, const scene::NoiseConfig & noise,
                                          const ModelConfig & model, std::uint64_t stream)
{
  return {sc.name, scene::observe_scenario(sc.scenario, noise, model.motion_steps, model.plan_steps, stream)};
}

std::vector<evaluation::LabeledSequence> make_sequences(const std::vector<NamedScenario> & scenarios,
                                                        const scene::NoiseConfig & noise, const ModelConfig & model,
                                                        std::uint64_t stream)
{
  std::vector<evaluation::LabeledSequence> out;
  out.reserve(scenarios.size());
  for (const auto & sc : scenarios) {
    out.push_back(make_sequence(sc, noise, model, stream));
  }
  return out;
}

std::vector<std::vector<scene::ObservationFrame>> frames_only(const std::vector<evaluation::LabeledSequence> & data)
{
  std::vector<std::vector<scene::ObservationFrame>> out;
  out.reserve(data.size());
  for (const auto & d : data) {
    out.push_back(d.frames);
  }
  return out;
}

}  // namespace bridgead
