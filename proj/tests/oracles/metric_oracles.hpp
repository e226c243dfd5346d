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


#ifndef ORACLES__METRIC_ORACLES_HPP_
#define ORACLES__METRIC_ORACLES_HPP_

#include "bridgead/evaluation.hpp"
#include "oracles/geometry_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace bridgead::testing
{

inline std::vector<Vec2> random_path(std::mt19937_64 & rng, int n, double spread = 3.0)
{
  std::normal_distribution<double> step(0.0, spread);
  std::vector<Vec2> out;
  Vec2 p{0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    p = p + Vec2{std::abs(step(rng)), step(rng) * 0.3};
    out.push_back(p);
  }
  return out;
}

inline double l2_oracle(const std::vector<Vec2> & plan, const std::vector<Vec2> & gt, int h, bool at_step)
{
  auto dist = [&](int k) {
    const double dx = plan[k].x - gt[k].x;
    const double dy = plan[k].y - gt[k].y;
    return std::sqrt(dx * dx + dy * dy);
  };
  if (at_step) {
    return dist(h - 1);
  }
  double sum = 0.0;
  for (int k = 0; k < h; ++k) {
    sum += dist(k);
  }
  return sum / h;
}

/// Ego footprint along the plan overlaps an agent box with positive area.
/// Headings follow the next segment and hold through stops.
inline bool collides_by_area(const std::vector<Vec2> & plan, const evaluation::Footprint & ego,
                             const evaluation::FutureBoxes & agents, int h)
{
  double heading = 0.0;
  for (int k = 0; k < h; ++k) {
    if (k + 1 < static_cast<int>(plan.size())) {
      const double dx = plan[k + 1].x - plan[k].x;
      const double dy = plan[k + 1].y - plan[k].y;
      if (dx != 0.0 || dy != 0.0) {
        heading = std::atan2(dy, dx);
      }
    }
    const OrientedBox2 box{plan[k], ego.length, ego.width, heading};
    for (const auto & other : agents[k]) {
      if (boxes_intersect_by_area(box, other)) {
        return true;
      }
    }
  }
  return false;
}

/// Random plan with 0 or 1 agent boxes scattered around each waypoint.
inline evaluation::FutureBoxes random_agents_near(const std::vector<Vec2> & plan, std::mt19937_64 & rng)
{
  std::uniform_real_distribution<double> jitter(-7.0, 7.0);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  std::bernoulli_distribution present(0.5);
  evaluation::FutureBoxes agents(plan.size());
  for (std::size_t k = 0; k < plan.size(); ++k) {
    if (present(rng)) {
      agents[k].push_back({plan[k] + Vec2{jitter(rng), jitter(rng)}, 4.5, 1.9, yaw(rng)});
    }
  }
  return agents;
}

inline evaluation::AgentPrediction random_prediction(std::mt19937_64 & rng, int modes, int steps)
{
  std::normal_distribution<double> n(0.0, 3.0);
  std::bernoulli_distribution keep(0.8);
  evaluation::AgentPrediction p;
  p.modes = modes;
  p.trajs = nn::Mat(modes * steps, 2);
  for (nn::Index r = 0; r < p.trajs.rows(); ++r) {
    p.trajs(r, 0) = n(rng);
    p.trajs(r, 1) = n(rng);
  }
  for (int s = 0; s < steps; ++s) {
    p.gt.push_back({n(rng), n(rng)});
    p.mask.push_back(keep(rng) ? 1 : 0);
  }
  return p;
}

/// minADE / minFDE / miss rate by enumerating modes.
inline evaluation::MotionMetrics motion_metrics_oracle(const std::vector<evaluation::AgentPrediction> & agents)
{
  double ade = 0.0;
  double fde = 0.0;
  double mr = 0.0;
  int counted = 0;
  for (const auto & a : agents) {
    const int steps = static_cast<int>(a.gt.size());
    std::vector<int> valid;
    for (int s = 0; s < steps; ++s) {
      if (a.mask[s] != 0) {
        valid.push_back(s);
      }
    }
    if (valid.empty()) {
      continue;
    }
    std::vector<double> ades;
    std::vector<double> fdes;
    for (int m = 0; m < a.modes; ++m) {
      double total = 0.0;
      for (int s : valid) {
        total += std::hypot(a.trajs(m * steps + s, 0) - a.gt[s].x, a.trajs(m * steps + s, 1) - a.gt[s].y);
      }
      ades.push_back(total / static_cast<double>(valid.size()));
      const int s = valid.back();
      fdes.push_back(std::hypot(a.trajs(m * steps + s, 0) - a.gt[s].x, a.trajs(m * steps + s, 1) - a.gt[s].y));
    }
    const double best_fde = *std::min_element(fdes.begin(), fdes.end());
    ade += *std::min_element(ades.begin(), ades.end());
    fde += best_fde;
    mr += best_fde > 2.0 ? 1.0 : 0.0;
    ++counted;
  }
  evaluation::MotionMetrics out;
  out.agents = counted;
  if (counted > 0) {
    out.ade = ade / counted;
    out.fde = fde / counted;
    out.mr = mr / counted;
  }
  return out;
}

inline double nns_oracle(bool collided, double v_i, double v_r)
{
  return collided ? 4.0 * std::max(0.0, 1.0 - v_i / v_r) : 5.0;
}

}  // namespace bridgead::testing

#endif  // ORACLES__METRIC_ORACLES_HPP_
