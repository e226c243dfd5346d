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

#ifndef BRIDGEAD__SCENARIO_IO_HPP_
#define BRIDGEAD__SCENARIO_IO_HPP_

#include "bridgead/scene.hpp"

#include <json.hpp>

#include <filesystem>

namespace bridgead::scene
{

nlohmann::json to_json(const Scenario & scenario);
/// Throws ConfigError on missing/unknown keys or violated invariants.
Scenario scenario_from_json(const nlohmann::json & doc);

void save_scenario(const Scenario & scenario, const std::filesystem::path & path);
Scenario load_scenario(const std::filesystem::path & path);

}  // namespace bridgead::scene

#endif  // BRIDGEAD__SCENARIO_IO_HPP_
