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


#ifndef BRIDGEAD__DATASET_HPP_
#define BRIDGEAD__DATASET_HPP_

#include "bridgead/evaluation.hpp"
#include "bridgead/model_config.hpp"
#include "bridgead/scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bridgead
{

/// Seed of the `index`-th scenario generated from `base`.
std::uint64_t scenario_seed(std::uint64_t base, std::size_t index);

/// "scenario_<base>_<index>" with 4 and 3 digit zero padding.
std::string scenario_name(std::uint64_t base, std::size_t index);

struct NamedScenario
{
  std::string name;
  scene::Scenario scenario;
};

std::vector<NamedScenario> generate_scenarios(scene::ScenarioTemplate templ, std::size_t count, std::uint64_t base_seed,
                                              const scene::SceneConfig & cfg = {});

/// Every *.json scenario file of a directory, in file-name order. Names
/// starting with '_' (manifests) are skipped.
std::vector<NamedScenario> load_scenario_dir(const std::filesystem::path & dir);

/// Observation frames with ground truth at the model's horizons.
evaluation::LabeledSequence make_sequence(const NamedScenario & sc, const scene::NoiseConfig & noise,
                                          const ModelConfig & model, std::uint64_t stream = 0);
std::vector<evaluation::LabeledSequence> make_sequences(const std::vector<NamedScenario> & scenarios,
                                                        const scene::NoiseConfig & noise, const ModelConfig & model,
                                                        std::uint64_t stream = 0);
std::vector<std::vector<scene::ObservationFrame>> frames_only(const std::vector<evaluation::LabeledSequence> & data);

}  // namespace bridgead

#endif  // BRIDGEAD__DATASET_HPP_
