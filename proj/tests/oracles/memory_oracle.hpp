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

#ifndef ORACLES__MEMORY_ORACLE_HPP_
#define ORACLES__MEMORY_ORACLE_HPP_

#include "bridgead/memory_bank.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bridgead::testing
{

struct MemoryDims
{
  int agents{4};
  int modes{3};
  int t_mot{8};
  int modes_plan{4};
  int t_plan{6};
  int channels{5};
};

/// Cache with random contents. Every stored double is distinct with
/// overwhelming probability, so a block can be traced back to its origin.
inline memory::FrameCache random_frame(int frame_index, const std::vector<int> & ids, const MemoryDims & d,
                                       std::mt19937_64 & rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (auto & v : t.values()) {
      v = normal(rng);
    }
    return t;
  };
  const auto n = ids.size();
  const auto m = static_cast<std::size_t>(d.modes);
  const auto t = static_cast<std::size_t>(d.t_mot);
  const auto c = static_cast<std::size_t>(d.channels);
  const auto mp = static_cast<std::size_t>(d.modes_plan);
  const auto tp = static_cast<std::size_t>(d.t_plan);
  memory::FrameCache f;
  f.frame_index = frame_index;
  f.ego_pose = Pose2(normal(rng) * 20.0, normal(rng) * 20.0, normal(rng));
  f.agent_ids = ids;
  f.motion_queries = fill({n, m, t, c});
  f.motion_trajs = fill({n, m, t, 2});
  f.motion_scores = fill({n, m});
  f.plan_queries = fill({mp, tp, c});
  f.plan_trajs = fill({mp, tp, 2});
  f.plan_scores = fill({mp});
  return f;
}

/// Random subset of ids in [0, pool) in random order.
inline std::vector<int> random_ids(int pool, std::mt19937_64 & rng)
{
  std::vector<int> ids;
  std::bernoulli_distribution keep(0.6);
  for (int i = 0; i < pool; ++i) {
    if (keep(rng)) {
      ids.push_back(i);
    }
  }
  std::shuffle(ids.begin(), ids.end(), rng);
  return ids;
}

/// Locates a C-vector among every cached motion (or plan) step by brute force
/// and returns the absolute timestamp of the step it came from.
inline std::optional<double> traced_timestamp(const memory::MemoryQueue & queue, std::span<const double> value,
                                              bool plan)
{
  for (const auto & f : queue.entries()) {
    const Tensor & q = plan ? f.plan_queries : f.motion_queries;
    const std::size_t c = q.shape().back();
    const std::size_t steps = q.shape()[q.rank() - 2];
    for (std::size_t off = 0; off < q.size(); off += c) {
      if (std::equal(value.begin(), value.end(), q.data() + off)) {
        const std::size_t step = (off / c) % steps + 1;
        return static_cast<double>(f.frame_index + static_cast<int>(step)) * f.frame_dt;
      }
    }
  }
  return std::nullopt;
}

/// Checks every valid entry of `slice` against brute-force timestamp tracing
/// and that presence in the queue determines validity. Returns an empty string
/// on success, else a description of the first violation.
inline std::string check_alignment(const memory::MemoryQueue & queue, const memory::HistorySlice & slice,
                                   int current_frame, const std::vector<int> & ids, double frame_dt = 0.5)
{
  const std::size_t c = slice.channels();
  const std::size_t per_lead = static_cast<std::size_t>(slice.lags * slice.steps);
  const bool plan = slice.kind == memory::SliceKind::kPlan2Plan;
  for (std::size_t e = 0; e < slice.num_entries(); ++e) {
    const std::size_t lead = e / per_lead;
    const int lag = static_cast<int>((e % per_lead) / static_cast<std::size_t>(slice.steps));
    const int slot = static_cast<int>(e % static_cast<std::size_t>(slice.steps));
    // Expected validity: source frame cached and (for motion) the agent present in it.
    const memory::FrameCache * src = nullptr;
    for (const auto & f : queue.entries()) {
      if (f.frame_index == current_frame - lag - 1) {
        src = &f;
      }
    }
    bool expect_valid = src != nullptr;
    if (src && !plan) {
      const std::size_t agent = lead / static_cast<std::size_t>(slice.mask_group);
      expect_valid = std::find(src->agent_ids.begin(), src->agent_ids.end(), ids[agent]) != src->agent_ids.end();
    }
    if (slice.entry_valid(e) != expect_valid) {
      return "validity mismatch at entry " + std::to_string(e);
    }
    const std::span<const double> value(slice.queries.data() + e * c, c);
    if (!expect_valid) {
      if (std::any_of(value.begin(), value.end(), [](double v) { return v != 0.0; })) {
        return "invalid entry not zero-filled at " + std::to_string(e);
      }
      continue;
    }
    // m2d targets the current time, m2m/p2p the current future steps 1..T.
    const int target_step = slice.kind == memory::SliceKind::kMot2Det ? 0 : slot + 1;
    const double target = static_cast<double>(current_frame + target_step) * frame_dt;
    const auto traced = traced_timestamp(queue, value, plan);
    if (!traced || *traced != target) {
      return "timestamp mismatch at entry " + std::to_string(e);
    }
    if (slice.timestamps.at({static_cast<std::size_t>(lag), static_cast<std::size_t>(slot)}) != target) {
      return "recorded timestamp mismatch at entry " + std::to_string(e);
    }
  }
  return {};
}

}  // namespace bridgead::testing

#endif  // ORACLES__MEMORY_ORACLE_HPP_
