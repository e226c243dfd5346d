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


#include "bridgead/experiment.hpp"

#include "bridgead/checkpoint.hpp"

#include <numeric>
#include <sstream>

namespace bridgead::experiment
{
namespace
{

double mean(const std::vector<double> & v)
{
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string describe(const training::EpochLog & e, const char * stage)
{
  std::ostringstream os;
  os.precision(5);
  os << stage << " epoch " << e.epoch << " lr " << e.lr << " loss " << e.loss.total;
  return os.str();
}

}  // namespace

StagedResult train_staged(BridgeModel & model, const std::vector<training::Sequence> & data, const RunConfig & cfg,
                          const std::filesystem::path & work_dir, const Logger & log)
{
  StagedResult out;
  auto e2e = cfg.train;
  if (cfg.train.stage == Stage::kEndToEnd && cfg.train.perception_epochs > 0) {
    RunConfig pcfg = cfg;
    pcfg.train.stage = Stage::kPerception;
    pcfg.train.epochs = cfg.train.perception_epochs;
    pcfg.train.init_checkpoint.clear();
    out.perception = training::train(model, data, pcfg.train, cfg.ablation, [&](const training::EpochLog & e) {
      if (log) {
        log(describe(e, "perception"));
      }
    });
    std::filesystem::create_directories(work_dir);
    const auto ckpt = work_dir / "perception.ckpt";
    save_checkpoint(ckpt, model, pcfg);
    e2e.init_checkpoint = ckpt.string();
  }
  out.end_to_end = training::train(model, data, e2e, cfg.ablation, [&](const training::EpochLog & e) {
    if (log) {
      log(describe(e, to_string(e2e.stage).c_str()));
    }
  });
  return out;
}

bool set_flag(AblationFlags & flags, const std::string & name, bool value)
{
  const auto plus = name.find('+');
  if (plus != std::string::npos) {
    AblationFlags copy = flags;
    if (!set_flag(copy, name.substr(0, plus), value) || !set_flag(copy, name.substr(plus + 1), value)) {
      return false;
    }
    flags = copy;
    return true;
  }
  if (name == "mot2det") {
    flags.mot2det = value;
  } else if (name == "his_mot") {
    flags.his_mot = value;
  } else if (name == "his_plan") {
    flags.his_plan = value;
  } else if (name == "mot2plan") {
    flags.mot2plan = value;
  } else if (name == "step_self_attn") {
    flags.step_self_attn = value;
  } else if (name == "mode_self_attn") {
    flags.mode_self_attn = value;
  } else {
    return false;
  }
  return true;
}

std::vector<AblationFlags> ablation_grid(const std::vector<std::string> & dims, const AblationFlags & base)
{
  if (dims.size() > 6) {
    throw ConfigError("ablate: at most 6 flag dimensions");
  }
  const std::size_t k = dims.size();
  std::vector<AblationFlags> out;
  for (std::size_t r = 0; r < (std::size_t{1} << k); ++r) {
    AblationFlags f = base;
    for (std::size_t i = 0; i < k; ++i) {
      const bool off = ((r >> (k - 1 - i)) & 1u) != 0;
      if (!set_flag(f, dims[i], !off)) {
        throw ConfigError("ablate: unknown flag '" + dims[i] + "'");
      }
    }
    out.push_back(f);
  }
  return out;
}

double AblationRow::mean_l2() const { return mean(l2_avg); }
double AblationRow::mean_collision() const { return mean(collision_avg); }

std::vector<AblationRow> run_ablation(const RunConfig & base, const std::vector<AblationFlags> & grid, int num_seeds,
                                      const std::vector<training::Sequence> & train_data,
                                      const std::vector<evaluation::LabeledSequence> & eval,
                                      const std::filesystem::path & work_dir, const Logger & log)
{
  std::vector<AblationRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    rows[g].flags = grid[g];
  }
  for (int s = 0; s < num_seeds; ++s) {
    RunConfig cfg = base;
    cfg.seeds.model = base.seeds.model + static_cast<std::uint64_t>(s);
    cfg.seeds.train = base.seeds.train + static_cast<std::uint64_t>(s);
    cfg.train.seed = cfg.seeds.train;
    const auto seed_dir = work_dir / ("seed_" + std::to_string(s));
    std::filesystem::create_directories(seed_dir);

    // Shared perception stage.
    std::string perception_ckpt;
    if (cfg.train.perception_epochs > 0) {
      BridgeModel model(cfg.model, cfg.seeds.model);
      RunConfig pcfg = cfg;
      pcfg.train.stage = Stage::kPerception;
      pcfg.train.epochs = cfg.train.perception_epochs;
      pcfg.train.init_checkpoint.clear();
      training::train(model, train_data, pcfg.train, cfg.ablation);
      perception_ckpt = (seed_dir / "perception.ckpt").string();
      save_checkpoint(perception_ckpt, model, pcfg);
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      RunConfig rcfg = cfg;
      rcfg.ablation = grid[g];
      rcfg.train.stage = Stage::kEndToEnd;
      rcfg.train.init_checkpoint = perception_ckpt;
      rcfg.train.from_scratch = perception_ckpt.empty();
      BridgeModel model(rcfg.model, rcfg.seeds.model);
      const auto result = training::train(model, train_data, rcfg.train, rcfg.ablation);
      const auto report = evaluation::evaluate_open_loop(model, eval, rcfg.ablation);
      rows[g].l2_avg.push_back(report.l2_avg);
      rows[g].collision_avg.push_back(report.collision_avg);
      rows[g].final_loss.push_back(result.epochs.empty() ? 0.0 : result.epochs.back().loss.total);
      if (log) {
        std::ostringstream os;
        os.precision(5);
        os << "seed " << s << " flags " << grid[g].mask_string() << " l2_avg " << report.l2_avg << " col_avg "
           << report.collision_avg;
        log(os.str());
      }
    }
  }
  return rows;
}

}  // namespace bridgead::experiment
