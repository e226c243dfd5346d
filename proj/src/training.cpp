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


#include "bridgead/training.hpp"

#include "bridgead/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace bridgead::training
{
namespace
{

nn::Var zero(nn::Tape & tape) { return tape.constant(nn::Mat::Zero(1, 1)); }

nn::Var gather(const nn::Var & x, const std::vector<int> & rows) { return nn::gather_rows(x, rows); }

Vec2 box_centre(const nn::Mat & boxes, nn::Index row) { return {boxes(row, 0), boxes(row, 1)}; }

std::vector<Vec2> polyline_centres(const nn::Mat & points)
{
  std::vector<Vec2> out;
  const auto p = points.cols() / 2;
  for (nn::Index r = 0; r < points.rows(); ++r) {
    Vec2 c;
    for (nn::Index j = 0; j < p; ++j) {
      c.x += points(r, 2 * j);
      c.y += points(r, 2 * j + 1);
    }
    out.push_back({c.x / static_cast<double>(p), c.y / static_cast<double>(p)});
  }
  return out;
}

void detection_loss(const FrameOutput & out, const scene::ObservationFrame & frame,
                    const TrainConfig & cfg, LossTerms & terms, std::vector<std::pair<int, int>> & matches)
{
  const auto & objects = out.objects;
  const nn::Mat & boxes = objects.boxes.value();
  std::vector<Vec2> pred;
  std::vector<int> pred_cls;
  for (int i = 0; i < objects.size(); ++i) {
    pred.push_back(box_centre(boxes, i));
    pred_cls.push_back(static_cast<int>(objects.classes[static_cast<std::size_t>(i)]));
  }
  std::vector<Vec2> gt;
  std::vector<int> gt_cls;
  for (const auto & a : frame.gt_agents) {
    gt.push_back({a.box[0], a.box[1]});
    gt_cls.push_back(static_cast<int>(a.cls));
  }
  matches = greedy_match(pred, pred_cls, gt, gt_cls, cfg.match_radius);

  nn::Mat cls_target = nn::Mat::Zero(objects.size(), 1);
  for (const auto & [i, j] : matches) {
    cls_target(i, 0) = 1.0;
  }
  if (objects.size() > 0) {
    const double norm = 1.0 / std::max<double>(1.0, static_cast<double>(matches.size()));
    terms.det_cls = nn::scale(
      nn::focal_loss_sum(objects.scores, cls_target, cfg.focal_alpha, cfg.focal_gamma), norm);
  }
  if (!matches.empty()) {
    std::vector<int> rows;
    nn::Mat target(static_cast<nn::Index>(matches.size()), static_cast<nn::Index>(scene::kBoxDim));
    for (std::size_t k = 0; k < matches.size(); ++k) {
      rows.push_back(matches[k].first);
      const auto & b = frame.gt_agents[static_cast<std::size_t>(matches[k].second)].box;
      for (std::size_t c = 0; c < scene::kBoxDim; ++c) {
        target(static_cast<nn::Index>(k), static_cast<nn::Index>(c)) = b[c];
      }
    }
    terms.det_reg =
      nn::l1_masked_mean(gather(objects.boxes, rows), target, nn::Mat::Ones(target.rows(), target.cols()));
  }
}

void map_loss(const FrameOutput & out, const scene::ObservationFrame & frame, const TrainConfig & cfg,
              LossTerms & terms)
{
  const auto & map = out.map;
  if (map.size() == 0) {
    return;
  }
  const nn::Mat & points = map.points.value();
  const int p = static_cast<int>(points.cols() / 2);
  std::vector<int> pred_cls;
  for (const auto c : map.observed_classes) {
    pred_cls.push_back(static_cast<int>(c));
  }
  nn::Mat gt_points(static_cast<nn::Index>(frame.gt_map.size()), 2 * p);
  std::vector<int> gt_cls;
  for (std::size_t g = 0; g < frame.gt_map.size(); ++g) {
    const auto samples = perception::resample_polyline(frame.gt_map[g].points, p);
    for (int j = 0; j < p; ++j) {
      gt_points(static_cast<nn::Index>(g), 2 * j) = samples[static_cast<std::size_t>(j)].x;
      gt_points(static_cast<nn::Index>(g), 2 * j + 1) = samples[static_cast<std::size_t>(j)].y;
    }
    gt_cls.push_back(static_cast<int>(frame.gt_map[g].cls));
  }
  const auto matches =
    greedy_match(polyline_centres(points), pred_cls, polyline_centres(gt_points), gt_cls, cfg.match_radius);

  nn::Mat cls_target = nn::Mat::Zero(map.size(), scene::kNumMapClasses);
  for (const auto & [i, j] : matches) {
    cls_target(i, gt_cls[static_cast<std::size_t>(j)]) = 1.0;
  }
  const double norm = 1.0 / std::max<double>(1.0, static_cast<double>(matches.size()));
  terms.map_cls =
    nn::scale(nn::focal_loss_sum(map.class_scores, cls_target, cfg.focal_alpha, cfg.focal_gamma), norm);
  if (!matches.empty()) {
    std::vector<int> rows;
    nn::Mat target(static_cast<nn::Index>(matches.size()), 2 * p);
    for (std::size_t k = 0; k < matches.size(); ++k) {
      rows.push_back(matches[k].first);
      target.row(static_cast<nn::Index>(k)) = gt_points.row(matches[k].second);
    }
    terms.map_reg =
      nn::l1_masked_mean(gather(map.points, rows), target, nn::Mat::Ones(target.rows(), target.cols()));
  }
}

void motion_loss(const FrameOutput & out, const scene::ObservationFrame & frame, const TrainConfig & cfg,
                 const std::vector<std::pair<int, int>> & matches, LossTerms & terms)
{
  const auto & mot = out.motion;
  const int m = mot.modes;
  const int t = mot.steps;
  const nn::Mat & trajs = mot.trajs.value();
  std::vector<int> reg_rows;
  std::vector<double> reg_target;
  std::vector<double> reg_mask;
  std::vector<int> cls_rows;
  std::vector<double> cls_target;
  int counted = 0;
  for (const auto & [i, j] : matches) {
    const auto & gt = frame.gt_agents[static_cast<std::size_t>(j)];
    if (std::none_of(gt.future_mask.begin(), gt.future_mask.end(), [](auto v) { return v != 0; })) {
      continue;
    }
    if (static_cast<int>(gt.future.size()) != t) {
      throw std::invalid_argument("total_loss: agent future length does not match the motion horizon");
    }
    const nn::Mat pred = trajs.block(static_cast<nn::Index>(i) * m * t, 0, static_cast<nn::Index>(m) * t, 2);
    const int w = wta_assign(pred, m, gt.future, gt.future_mask);
    for (int s = 0; s < t; ++s) {
      reg_rows.push_back((i * m + w) * t + s);
      const auto & g = gt.future[static_cast<std::size_t>(s)];
      const double valid = gt.future_mask[static_cast<std::size_t>(s)] != 0 ? 1.0 : 0.0;
      reg_target.insert(reg_target.end(), {valid != 0.0 ? g.x : 0.0, valid != 0.0 ? g.y : 0.0});
      reg_mask.insert(reg_mask.end(), {valid, valid});
    }
    for (int k = 0; k < m; ++k) {
      cls_rows.push_back(i * m + k);
      cls_target.push_back(k == w ? 1.0 : 0.0);
    }
    ++counted;
  }
  if (counted == 0) {
    return;
  }
  const auto n = static_cast<nn::Index>(reg_rows.size());
  terms.mot_reg = nn::l1_masked_mean(gather(mot.trajs, reg_rows), Eigen::Map<const nn::Mat>(reg_target.data(), n, 2),
                                     Eigen::Map<const nn::Mat>(reg_mask.data(), n, 2));
  const nn::Mat target = Eigen::Map<const nn::Mat>(cls_target.data(), static_cast<nn::Index>(cls_target.size()), 1);
  terms.mot_cls = nn::scale(nn::focal_loss_sum(gather(mot.probs, cls_rows), target, cfg.focal_alpha, cfg.focal_gamma),
                            1.0 / static_cast<double>(counted));
}

void plan_loss(const FrameOutput & out, const scene::ObservationFrame & frame, const TrainConfig & cfg,
               LossTerms & terms)
{
  const auto & plan = out.plan;
  if (std::none_of(frame.gt_ego_mask.begin(), frame.gt_ego_mask.end(), [](auto v) { return v != 0; })) {
    return;
  }
  const int t = plan.steps;
  if (static_cast<int>(frame.gt_ego_future.size()) != t) {
    throw std::invalid_argument("total_loss: ego future length does not match the plan horizon");
  }
  const int group = static_cast<int>(frame.command);
  std::vector<int> modes;
  for (int k = 0; k < plan.modes; ++k) {
    if (plan.command_group[static_cast<std::size_t>(k)] == group) {
      modes.push_back(k);
    }
  }
  if (modes.empty()) {
    throw std::invalid_argument("total_loss: command group has no plan modes");
  }
  const nn::Mat & trajs = plan.trajs.value();
  nn::Mat pred(static_cast<nn::Index>(modes.size()) * t, 2);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    pred.block(static_cast<nn::Index>(k) * t, 0, t, 2) = trajs.block(static_cast<nn::Index>(modes[k]) * t, 0, t, 2);
  }
  const int w = wta_assign(pred, static_cast<int>(modes.size()), frame.gt_ego_future, frame.gt_ego_mask);
  const int winner = modes[static_cast<std::size_t>(w)];

  std::vector<int> rows;
  nn::Mat target = nn::Mat::Zero(t, 2);
  nn::Mat mask = nn::Mat::Zero(t, 2);
  for (int s = 0; s < t; ++s) {
    rows.push_back(winner * t + s);
    if (frame.gt_ego_mask[static_cast<std::size_t>(s)] != 0) {
      target(s, 0) = frame.gt_ego_future[static_cast<std::size_t>(s)].x;
      target(s, 1) = frame.gt_ego_future[static_cast<std::size_t>(s)].y;
      mask.row(s).setOnes();
    }
  }
  terms.plan_reg = nn::l1_masked_mean(gather(plan.trajs, rows), target, mask);
  nn::Mat cls_target = nn::Mat::Zero(static_cast<nn::Index>(modes.size()), 1);
  cls_target(w, 0) = 1.0;
  terms.plan_cls = nn::focal_loss_sum(gather(plan.probs, modes), cls_target, cfg.focal_alpha, cfg.focal_gamma);
}

}  // namespace

void TrainConfig::validate() const
{
  const std::pair<const char *, double> lambdas[] = {
    {"train.weights.det_reg", weights.det_reg},   {"train.weights.det_cls", weights.det_cls},
    {"train.weights.map_reg", weights.map_reg},   {"train.weights.map_cls", weights.map_cls},
    {"train.weights.mot_reg", weights.mot_reg},   {"train.weights.mot_cls", weights.mot_cls},
    {"train.weights.plan_reg", weights.plan_reg}, {"train.weights.plan_cls", weights.plan_cls}};
  for (const auto & [name, value] : lambdas) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ConfigError(std::string(name) + ": must be a finite value >= 0");
    }
  }
  if (!(focal_gamma >= 0.0)) {
    throw ConfigError("train.focal_gamma: must be >= 0");
  }
  if (!(focal_alpha >= 0.0 && focal_alpha <= 1.0)) {
    throw ConfigError("train.focal_alpha: must lie in [0, 1]");
  }
  if (!(match_radius > 0.0)) {
    throw ConfigError("train.match_radius: must be > 0");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("train.lr: must be > 0");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("train.weight_decay: must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1/beta2: must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) {
    throw ConfigError("train.adam_eps: must be > 0");
  }
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) {
    throw ConfigError("train.min_lr_ratio: must lie in [0, 1]");
  }
  if (!(grad_clip >= 0.0)) {
    throw ConfigError("train.grad_clip: must be >= 0");
  }
  if (epochs < 0) {
    throw ConfigError("train.epochs: must be >= 0");
  }
  if (perception_epochs < 0) {
    throw ConfigError("train.perception_epochs: must be >= 0");
  }
}

double LossBreakdown::weighted_sum(const LossWeights & w) const
{
  return w.det_reg * det_reg + w.det_cls * det_cls + w.map_reg * map_reg + w.map_cls * map_cls +
         w.mot_reg * mot_reg + w.mot_cls * mot_cls + w.plan_reg * plan_reg + w.plan_cls * plan_cls;
}

LossBreakdown & LossBreakdown::operator+=(const LossBreakdown & o)
{
  det_reg += o.det_reg;
  det_cls += o.det_cls;
  map_reg += o.map_reg;
  map_cls += o.map_cls;
  mot_reg += o.mot_reg;
  mot_cls += o.mot_cls;
  plan_reg += o.plan_reg;
  plan_cls += o.plan_cls;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const
{
  LossBreakdown out = *this;
  for (double * v : {&out.det_reg, &out.det_cls, &out.map_reg, &out.map_cls, &out.mot_reg, &out.mot_cls,
                     &out.plan_reg, &out.plan_cls, &out.total}) {
    *v *= s;
  }
  return out;
}

LossBreakdown LossTerms::values() const
{
  auto v = [](const nn::Var & x) { return x.value()(0, 0); };
  return {v(det_reg), v(det_cls), v(map_reg), v(map_cls), v(mot_reg), v(mot_cls), v(plan_reg), v(plan_cls), v(total)};
}

int wta_assign(const nn::Mat & pred, int modes, const std::vector<Vec2> & gt, const std::vector<std::uint8_t> & mask)
{
  const auto t = static_cast<nn::Index>(gt.size());
  if (modes <= 0 || pred.cols() != 2 || pred.rows() != modes * t || mask.size() != gt.size()) {
    throw std::invalid_argument("wta_assign: prediction shape does not match the target");
  }
  const auto valid = std::count_if(mask.begin(), mask.end(), [](auto v) { return v != 0; });
  if (valid == 0) {
    throw std::invalid_argument("wta_assign: every target step is masked");
  }
  int best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int m = 0; m < modes; ++m) {
    double err = 0.0;
    for (nn::Index s = 0; s < t; ++s) {
      if (mask[static_cast<std::size_t>(s)] != 0) {
        const auto & g = gt[static_cast<std::size_t>(s)];
        err += std::hypot(pred(m * t + s, 0) - g.x, pred(m * t + s, 1) - g.y);
      }
    }
    err /= static_cast<double>(valid);
    if (err < best_err) {
      best_err = err;
      best = m;
    }
  }
  return best;
}

double focal_loss(double p, bool positive, double alpha, double gamma, double eps)
{
  const double q = std::clamp(p, eps, 1.0 - eps);
  if (positive) {
    return -alpha * std::pow(1.0 - q, gamma) * std::log(q);
  }
  return -(1.0 - alpha) * std::pow(q, gamma) * std::log(1.0 - q);
}

double regression_loss(const nn::Mat & pred, const nn::Mat & gt, const nn::Mat & mask)
{
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || mask.rows() != gt.rows() || mask.cols() != gt.cols()) {
    throw std::invalid_argument("regression_loss: shape mismatch");
  }
  double total = 0.0;
  double count = 0.0;
  for (nn::Index i = 0; i < gt.size(); ++i) {
    if (mask.data()[i] != 0.0) {
      total += std::abs(pred.data()[i] - gt.data()[i]);
      count += 1.0;
    }
  }
  if (count == 0.0) {
    throw std::invalid_argument("regression_loss: empty mask");
  }
  return total / count;
}

std::vector<std::pair<int, int>> greedy_match(const std::vector<Vec2> & pred, const std::vector<int> & pred_class,
                                              const std::vector<Vec2> & target, const std::vector<int> & target_class,
                                              double radius)
{
  if (pred.size() != pred_class.size() || target.size() != target_class.size()) {
    throw std::invalid_argument("greedy_match: class lists do not match the centre lists");
  }
  struct Candidate
  {
    double dist;
    int i;
    int j;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) {
      if (pred_class[i] != target_class[j]) {
        continue;
      }
      const double d = (pred[i] - target[j]).norm();
      if (d <= radius) {
        cands.push_back({d, static_cast<int>(i), static_cast<int>(j)});
      }
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate & a, const Candidate & b) {
    return std::tie(a.dist, a.i, a.j) < std::tie(b.dist, b.i, b.j);
  });
  std::vector<std::uint8_t> used_p(pred.size(), 0);
  std::vector<std::uint8_t> used_t(target.size(), 0);
  std::vector<std::pair<int, int>> out;
  for (const auto & c : cands) {
    if (used_p[static_cast<std::size_t>(c.i)] || used_t[static_cast<std::size_t>(c.j)]) {
      continue;
    }
    used_p[static_cast<std::size_t>(c.i)] = 1;
    used_t[static_cast<std::size_t>(c.j)] = 1;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

LossTerms total_loss(nn::Tape & tape, const FrameOutput & out, const scene::ObservationFrame & frame,
                     const TrainConfig & cfg, Stage stage)
{
  LossTerms terms;
  for (nn::Var * v : {&terms.det_reg, &terms.det_cls, &terms.map_reg, &terms.map_cls, &terms.mot_reg,
                      &terms.mot_cls, &terms.plan_reg, &terms.plan_cls}) {
    *v = zero(tape);
  }
  std::vector<std::pair<int, int>> matches;
  detection_loss(out, frame, cfg, terms, matches);
  map_loss(out, frame, cfg, terms);
  if (stage == Stage::kEndToEnd) {
    if (!out.has_planning) {
      throw std::invalid_argument("total_loss: end_to_end stage needs motion and planning outputs");
    }
    motion_loss(out, frame, cfg, matches, terms);
    plan_loss(out, frame, cfg, terms);
  }
  const auto & w = cfg.weights;
  const std::vector<nn::Var> weighted{
    nn::scale(terms.det_reg, w.det_reg),   nn::scale(terms.det_cls, w.det_cls), nn::scale(terms.map_reg, w.map_reg),
    nn::scale(terms.map_cls, w.map_cls),   nn::scale(terms.mot_reg, w.mot_reg), nn::scale(terms.mot_cls, w.mot_cls),
    nn::scale(terms.plan_reg, w.plan_reg), nn::scale(terms.plan_cls, w.plan_cls)};
  terms.total = weighted[0];
  for (std::size_t k = 1; k < weighted.size(); ++k) {
    terms.total = nn::add(terms.total, weighted[k]);
  }
  return terms;
}

AdamW::AdamW(std::vector<nn::Parameter *> params, const TrainConfig & cfg)
: params_(std::move(params)),
  beta1_(cfg.beta1),
  beta2_(cfg.beta2),
  eps_(cfg.adam_eps),
  weight_decay_(cfg.weight_decay),
  grad_clip_(cfg.grad_clip)
{
  for (const auto * p : params_) {
    m_.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(nn::Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

double AdamW::step(double lr)
{
  double sq = 0.0;
  for (const auto * p : params_) {
    if (p->grad.size() == p->value.size()) {
      sq += p->grad.squaredNorm();
    }
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw TrainingDiverged("AdamW: non-finite gradient norm");
  }
  const double clip = grad_clip_ > 0.0 && norm > grad_clip_ ? grad_clip_ / norm : 1.0;
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto & p = *params_[k];
    const nn::Mat g = p.grad.size() == p.value.size() ? nn::Mat(clip * p.grad)
                                                       : nn::Mat(nn::Mat::Zero(p.value.rows(), p.value.cols()));
    p.value *= 1.0 - lr * weight_decay_;
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    p.value.array() -= lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + eps_);
  }
  return norm;
}

double cosine_lr(double base, double min_ratio, std::size_t step, std::size_t total)
{
  if (total == 0) {
    return base;
  }
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  const double floor = base * min_ratio;
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<nn::Parameter *> trainable_parameters(BridgeModel & model, Stage stage)
{
  if (stage == Stage::kPerception) {
    return model.store().with_prefix("perception.");
  }
  std::vector<nn::Parameter *> out;
  for (const auto & p : model.store().parameters()) {
    out.push_back(p.get());
  }
  return out;
}

TrainResult train(BridgeModel & model, const std::vector<Sequence> & dataset, const TrainConfig & cfg,
                  const AblationFlags & flags, const std::function<void(const EpochLog &)> & on_epoch)
{
  cfg.validate();
  if (cfg.stage == Stage::kEndToEnd && !cfg.from_scratch && cfg.init_checkpoint.empty()) {
    throw ConfigError(
      "train.init_checkpoint: the end_to_end stage needs a perception checkpoint or train.from_scratch = true");
  }
  if (!cfg.init_checkpoint.empty()) {
    const auto info = load_checkpoint(cfg.init_checkpoint, model);
    if (cfg.stage == Stage::kEndToEnd && info.stage != Stage::kPerception && !cfg.from_scratch) {
      throw ConfigError("train.init_checkpoint: '" + cfg.init_checkpoint + "' is not a perception-stage checkpoint");
    }
  }
  AdamW opt(trainable_parameters(model, cfg.stage), cfg);
  const std::size_t total_steps = static_cast<std::size_t>(cfg.epochs) * dataset.size();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t frames = 0;
    for (const auto idx : order) {
      const auto & seq = dataset[idx];
      if (seq.empty()) {
        continue;
      }
      model.store().zero_grad();
      StreamState state(static_cast<std::size_t>(model.config().history_frames));
      const double weight = 1.0 / static_cast<double>(seq.size());
      for (const auto & frame : seq) {
        nn::Tape tape;
        const auto out = run_frame(tape, model, frame, state, flags, cfg.stage);
        const auto terms = total_loss(tape, out, frame, cfg, cfg.stage);
        const auto values = terms.values();
        if (!std::isfinite(values.total)) {
          throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", frame " + std::to_string(frame.frame_index));
        }
        tape.backward(nn::scale(terms.total, weight));
        log.loss += values;
        ++frames;
      }
      log.lr = cosine_lr(cfg.lr, cfg.min_lr_ratio, opt.steps(), total_steps);
      opt.step(log.lr);
    }
    if (frames > 0) {
      log.loss = log.loss.scaled(1.0 / static_cast<double>(frames));
    }
    result.epochs.push_back(log);
    if (on_epoch) {
      on_epoch(log);
    }
  }
  result.steps = opt.steps();
  return result;
}

}  // namespace bridgead::training
