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


#ifndef BRIDGEAD__TRAINING_HPP_
#define BRIDGEAD__TRAINING_HPP_

#include "bridgead/model.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bridgead::training
{

struct LossWeights
{
  double det_reg{0.25};
  double det_cls{2.0};
  double map_reg{10.0};
  double map_cls{1.0};
  double mot_reg{0.05};
  double mot_cls{0.1};
  double plan_reg{1.0};
  double plan_cls{0.5};

  friend bool operator==(const LossWeights &, const LossWeights &) = default;
};

struct TrainConfig
{
  LossWeights weights;
  double focal_gamma{2.0};
  double focal_alpha{0.25};
  /// Detection and map matching radius (metres, centre distance).
  double match_radius{2.0};
  double lr{1e-4};
  double weight_decay{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double adam_eps{1e-8};
  /// Cosine schedule floor as a fraction of `lr`.
  double min_lr_ratio{1e-3};
  /// Global gradient-norm clip; 0 disables.
  double grad_clip{35.0};
  int epochs{1};
  /// Perception-stage epochs run before end_to_end by the two-stage driver.
  int perception_epochs{0};
  Stage stage{Stage::kEndToEnd};
  std::uint64_t seed{0};
  /// Allows stage=end_to_end without a perception checkpoint.
  bool from_scratch{false};
  /// Checkpoint loaded before training (typically the perception stage).
  std::string init_checkpoint;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

/// Unweighted per-task terms plus the weighted total.
struct LossBreakdown
{
  double det_reg{0.0};
  double det_cls{0.0};
  double map_reg{0.0};
  double map_cls{0.0};
  double mot_reg{0.0};
  double mot_cls{0.0};
  double plan_reg{0.0};
  double plan_cls{0.0};
  double total{0.0};

  double weighted_sum(const LossWeights & w) const;
  LossBreakdown & operator+=(const LossBreakdown & o);
  LossBreakdown scaled(double s) const;
};

/// Differentiable loss terms of one frame.
struct LossTerms
{
  nn::Var det_reg;
  nn::Var det_cls;
  nn::Var map_reg;
  nn::Var map_cls;
  nn::Var mot_reg;
  nn::Var mot_cls;
  nn::Var plan_reg;
  nn::Var plan_cls;
  nn::Var total;

  LossBreakdown values() const;
};

class TrainingDiverged : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Mode with the lowest mean masked L2 displacement to `gt` (lowest index on
/// ties). `pred` holds M*T rows of (x, y), row m * T + s. Throws when every
/// step is masked.
int wta_assign(const nn::Mat & pred, int modes, const std::vector<Vec2> & gt, const std::vector<std::uint8_t> & mask);

double focal_loss(double p, bool positive, double alpha, double gamma, double eps = 1e-7);

/// Mean absolute error over entries with mask != 0. Throws on an empty mask.
double regression_loss(const nn::Mat & pred, const nn::Mat & gt, const nn::Mat & mask);

/// Greedy class-aware nearest-centre assignment: pairs sorted by distance
/// (then prediction, then target index), each side used once, distance <= radius.
std::vector<std::pair<int, int>> greedy_match(const std::vector<Vec2> & pred, const std::vector<int> & pred_class,
                                              const std::vector<Vec2> & target, const std::vector<int> & target_class,
                                              double radius);

/// Loss of one frame. Motion/plan terms are zero in the perception stage.
LossTerms total_loss(nn::Tape & tape, const FrameOutput & out, const scene::ObservationFrame & frame,
                     const TrainConfig & cfg, Stage stage);

class AdamW
{
public:
  AdamW(std::vector<nn::Parameter *> params, const TrainConfig & cfg);

  /// Clips, applies decoupled weight decay and the Adam update at rate `lr`.
  /// Returns the pre-clip gradient norm.
  double step(double lr);
  std::size_t steps() const { return steps_; }
  const std::vector<nn::Parameter *> & params() const { return params_; }

private:
  std::vector<nn::Parameter *> params_;
  std::vector<nn::Mat> m_;
  std::vector<nn::Mat> v_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  double grad_clip_;
  std::size_t steps_{0};
};

/// Cosine annealing from `base` to `base * min_ratio` over `total` steps.
double cosine_lr(double base, double min_ratio, std::size_t step, std::size_t total);

/// One scenario as a stream of observation frames with ground truth.
using Sequence = std::vector<scene::ObservationFrame>;

struct EpochLog
{
  int epoch{0};
  double lr{0.0};
  LossBreakdown loss;  // mean over frames
};

struct TrainResult
{
  std::vector<EpochLog> epochs;
  std::size_t steps{0};
};

/// Parameters the optimizer updates in `stage`.
std::vector<nn::Parameter *> trainable_parameters(BridgeModel & model, Stage stage);

/// Sequential streaming training: one optimizer step per scenario, memory
/// reset between scenarios, scenario order shuffled per epoch from the seed.
TrainResult train(BridgeModel & model, const std::vector<Sequence> & dataset, const TrainConfig & cfg,
                  const AblationFlags & flags, const std::function<void(const EpochLog &)> & on_epoch = {});

}  // namespace bridgead::training

#endif  // BRIDGEAD__TRAINING_HPP_
