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


#ifndef BRIDGEAD__EXPERIMENT_HPP_
#define BRIDGEAD__EXPERIMENT_HPP_

#include "bridgead/evaluation.hpp"
#include "bridgead/run_config.hpp"
#include "bridgead/training.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace bridgead::experiment
{

using Logger = std::function<void(const std::string &)>;

struct StagedResult
{
  training::TrainResult perception;
  training::TrainResult end_to_end;
};

/// Runs the perception stage (train.perception_epochs, checkpointed into
/// `work_dir`) and then the configured stage. `cfg.model` must match the model.
StagedResult train_staged(BridgeModel & model, const std::vector<training::Sequence> & data, const RunConfig & cfg,
                          const std::filesystem::path & work_dir, const Logger & log = {});

/// Flag names accepted by ablation_grid ("a+b" toggles both together).
bool set_flag(AblationFlags & flags, const std::string & name, bool value);

/// All 2^k on/off combinations of the named dimensions, starting from
/// `base`. Row r disables dimension i when bit (k - 1 - i) of r is set.
std::vector<AblationFlags> ablation_grid(const std::vector<std::string> & dims, const AblationFlags & base = {});

struct AblationRow
{
  AblationFlags flags;
  std::vector<double> l2_avg;  // per seed
  std::vector<double> collision_avg;
  std::vector<double> final_loss;

  double mean_l2() const;
  double mean_collision() const;
};

/// For each seed, one shared perception stage followed by an end-to-end run
/// per flag set; every run is evaluated open loop on `eval`.
std::vector<AblationRow> run_ablation(const RunConfig & base, const std::vector<AblationFlags> & grid, int num_seeds,
                                      const std::vector<training::Sequence> & train_data,
                                      const std::vector<evaluation::LabeledSequence> & eval,
                                      const std::filesystem::path & work_dir, const Logger & log = {});

}  // namespace bridgead::experiment

#endif  // BRIDGEAD__EXPERIMENT_HPP_
