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

#include "bridgead/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace bridgead::memory
{
namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_shape(const Tensor & t, const Shape & shape, const char * what)
{
  if (t.shape() != shape) {
    throw std::invalid_argument(std::string("FrameCache: ") + what + " has shape " + shape_to_string(t.shape()) +
                                ", expected " + shape_to_string(shape));
  }
}

std::unordered_map<int, std::size_t> row_index(const std::vector<int> & ids)
{
  std::unordered_map<int, std::size_t> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rows.emplace(ids[i], i);
  }
  return rows;
}

std::size_t best_mode(const Tensor & scores, std::size_t row)
{
  const auto s = scores.block({row});
  std::size_t best = 0;
  for (std::size_t m = 1; m < s.size(); ++m) {
    if (s[m] > s[best]) {
      best = m;
    }
  }
  return best;
}

HistorySlice empty_slice(SliceKind kind, int lags, int steps)
{
  HistorySlice slice;
  slice.kind = kind;
  slice.lags = lags;
  slice.steps = steps;
  slice.timestamps = Tensor({static_cast<std::size_t>(lags), static_cast<std::size_t>(steps)}, kNaN);
  slice.source_frames.assign(static_cast<std::size_t>(lags), -1);
  slice.source_steps.resize(static_cast<std::size_t>(lags * steps));
  return slice;
}

void copy_block(std::span<const double> src, std::span<double> dst) { std::copy(src.begin(), src.end(), dst.begin()); }

nn::Mat gather_valid(const HistorySlice & slice, std::vector<int> & entry_rows)
{
  const std::size_t n = slice.num_entries();
  const std::size_t c = slice.channels();
  entry_rows.assign(n, -1);
  int count = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (slice.entry_valid(e)) {
      entry_rows[e] = count++;
    }
  }
  nn::Mat out(count, static_cast<nn::Index>(c));
  for (std::size_t e = 0; e < n; ++e) {
    if (entry_rows[e] >= 0) {
      for (std::size_t j = 0; j < c; ++j) {
        out(entry_rows[e], static_cast<nn::Index>(j)) = slice.queries.values()[e * c + j];
      }
    }
  }
  return out;
}

}  // namespace

void FrameCache::validate() const
{
  const std::size_t n = agent_ids.size();
  if (motion_queries.rank() != 4 || plan_queries.rank() != 3) {
    throw std::invalid_argument("FrameCache: query arrays have the wrong rank");
  }
  const std::size_t m = motion_queries.dim(1);
  const std::size_t t = motion_queries.dim(2);
  const std::size_t c = motion_queries.dim(3);
  require_shape(motion_queries, {n, m, t, c}, "motion_queries");
  require_shape(motion_trajs, {n, m, t, 2}, "motion_trajs");
  require_shape(motion_scores, {n, m}, "motion_scores");
  const std::size_t mp = plan_queries.dim(0);
  const std::size_t tp = plan_queries.dim(1);
  require_shape(plan_queries, {mp, tp, c}, "plan_queries");
  require_shape(plan_trajs, {mp, tp, 2}, "plan_trajs");
  require_shape(plan_scores, {mp}, "plan_scores");
  for (const double v : motion_scores.values()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("FrameCache: non-finite motion score");
    }
  }
  if (row_index(agent_ids).size() != n) {
    throw std::invalid_argument("FrameCache: duplicate agent id");
  }
}

MemoryQueue::MemoryQueue(std::size_t capacity) : capacity_(capacity)
{
  if (capacity_ == 0) {
    throw std::invalid_argument("MemoryQueue: capacity must be positive");
  }
}

void MemoryQueue::push(FrameCache frame)
{
  if (!entries_.empty() && frame.frame_index <= entries_.back().frame_index) {
    throw SequencingError("MemoryQueue: frame " + std::to_string(frame.frame_index) + " does not follow frame " +
                          std::to_string(entries_.back().frame_index));
  }
  entries_.push_back(std::move(frame));
  while (entries_.size() > capacity_) {
    entries_.pop_front();
  }
}

const FrameCache * MemoryQueue::find(int frame_index) const
{
  for (const auto & entry : entries_) {
    if (entry.frame_index == frame_index) {
      return &entry;
    }
  }
  return nullptr;
}

bool HistorySlice::any_valid() const
{
  return std::any_of(mask.values().begin(), mask.values().end(), [](std::uint8_t v) { return v != 0; });
}

std::size_t HistorySlice::num_entries() const
{
  const std::size_t c = channels();
  return c == 0 ? 0 : queries.size() / c;
}

bool HistorySlice::entry_valid(std::size_t entry) const
{
  const std::size_t per_lead = static_cast<std::size_t>(lags * steps);
  const std::size_t lead = entry / per_lead;
  const std::size_t lag = (entry % per_lead) / static_cast<std::size_t>(steps);
  return mask.at({lead / static_cast<std::size_t>(mask_group), lag}) != 0;
}

HistorySlice slice_m2d(const MemoryQueue & queue, int current_frame, const std::vector<int> & agent_ids, int lags,
                       std::size_t channels)
{
  const std::size_t n = agent_ids.size();
  const auto k_count = static_cast<std::size_t>(lags);
  HistorySlice slice = empty_slice(SliceKind::kMot2Det, lags, 1);
  slice.queries = Tensor({n, k_count, channels});
  slice.positions = Tensor({n, k_count, 2});
  slice.mask = Mask({n, k_count});
  for (int k = 1; k <= lags; ++k) {
    const std::size_t li = static_cast<std::size_t>(k - 1);
    slice.source_steps[li] = k;
    const FrameCache * entry = queue.find(current_frame - k);
    if (entry == nullptr || static_cast<std::size_t>(k) > entry->motion_queries.dim(2)) {
      continue;
    }
    if (entry->motion_queries.dim(3) != channels) {
      throw std::invalid_argument("slice_m2d: cached channel count does not match");
    }
    slice.source_frames[li] = entry->frame_index;
    slice.timestamps.at({li, 0}) = entry->step_timestamp(k);
    const auto rows = row_index(entry->agent_ids);
    for (std::size_t a = 0; a < n; ++a) {
      const auto it = rows.find(agent_ids[a]);
      if (it == rows.end()) {
        continue;
      }
      const std::size_t mode = best_mode(entry->motion_scores, it->second);
      const auto step = static_cast<std::size_t>(k - 1);
      copy_block(entry->motion_queries.block({it->second, mode, step}), slice.queries.block({a, li}));
      copy_block(entry->motion_trajs.block({it->second, mode, step}), slice.positions.block({a, li}));
      slice.mask.at({a, li}) = 1;
    }
  }
  return slice;
}

HistorySlice slice_m2m(const MemoryQueue & queue, int current_frame, const std::vector<int> & agent_ids, int lags,
                       int t_m2m, int modes, int t_mot, std::size_t channels)
{
  if (t_m2m < 1 || t_m2m > t_mot - lags) {
    throw std::invalid_argument("slice_m2m: T_m2m must lie in [1, T_mot - K]");
  }
  const std::size_t n = agent_ids.size();
  const auto m_count = static_cast<std::size_t>(modes);
  const auto k_count = static_cast<std::size_t>(lags);
  const auto t_count = static_cast<std::size_t>(t_m2m);
  HistorySlice slice = empty_slice(SliceKind::kMot2Mot, lags, t_m2m);
  slice.mask_group = modes;
  slice.queries = Tensor({n, m_count, k_count, t_count, channels});
  slice.positions = Tensor({n, m_count, k_count, t_count, 2});
  slice.mask = Mask({n, k_count});
  for (int k = 1; k <= lags; ++k) {
    const std::size_t li = static_cast<std::size_t>(k - 1);
    for (int j = 1; j <= t_m2m; ++j) {
      slice.source_steps[li * t_count + static_cast<std::size_t>(j - 1)] = k + j;
    }
    const FrameCache * entry = queue.find(current_frame - k);
    if (entry == nullptr) {
      continue;
    }
    if (entry->motion_queries.dim(1) != m_count || entry->motion_queries.dim(2) != static_cast<std::size_t>(t_mot) ||
        entry->motion_queries.dim(3) != channels) {
      throw std::invalid_argument("slice_m2m: cached motion queries do not match the configured shape");
    }
    slice.source_frames[li] = entry->frame_index;
    for (int j = 1; j <= t_m2m; ++j) {
      slice.timestamps.at({li, static_cast<std::size_t>(j - 1)}) = entry->step_timestamp(k + j);
    }
    const auto rows = row_index(entry->agent_ids);
    for (std::size_t a = 0; a < n; ++a) {
      const auto it = rows.find(agent_ids[a]);
      if (it == rows.end()) {
        continue;
      }
      slice.mask.at({a, li}) = 1;
      for (std::size_t m = 0; m < m_count; ++m) {
        for (std::size_t j = 0; j < t_count; ++j) {
          const std::size_t step = static_cast<std::size_t>(k) + j;
          copy_block(entry->motion_queries.block({it->second, m, step}), slice.queries.block({a, m, li, j}));
          copy_block(entry->motion_trajs.block({it->second, m, step}), slice.positions.block({a, m, li, j}));
        }
      }
    }
  }
  return slice;
}

HistorySlice slice_p2p(const MemoryQueue & queue, int current_frame, int lags, int t_p2p, int modes, int t_plan,
                       std::size_t channels)
{
  if (t_p2p < 1 || t_p2p > t_plan - lags) {
    throw std::invalid_argument("slice_p2p: T_p2p must lie in [1, T_plan - K]");
  }
  const auto m_count = static_cast<std::size_t>(modes);
  const auto k_count = static_cast<std::size_t>(lags);
  const auto t_count = static_cast<std::size_t>(t_p2p);
  HistorySlice slice = empty_slice(SliceKind::kPlan2Plan, lags, t_p2p);
  slice.queries = Tensor({m_count, k_count, t_count, channels});
  slice.positions = Tensor({m_count, k_count, t_count, 2});
  slice.mask = Mask({m_count, k_count});
  for (int k = 1; k <= lags; ++k) {
    const std::size_t li = static_cast<std::size_t>(k - 1);
    for (int j = 1; j <= t_p2p; ++j) {
      slice.source_steps[li * t_count + static_cast<std::size_t>(j - 1)] = k + j;
    }
    const FrameCache * entry = queue.find(current_frame - k);
    if (entry == nullptr) {
      continue;
    }
    if (entry->plan_queries.dim(0) != m_count || entry->plan_queries.dim(1) != static_cast<std::size_t>(t_plan) ||
        entry->plan_queries.dim(2) != channels) {
      throw std::invalid_argument("slice_p2p: cached plan queries do not match the configured shape");
    }
    slice.source_frames[li] = entry->frame_index;
    for (int j = 1; j <= t_p2p; ++j) {
      slice.timestamps.at({li, static_cast<std::size_t>(j - 1)}) = entry->step_timestamp(k + j);
    }
    for (std::size_t m = 0; m < m_count; ++m) {
      slice.mask.at({m, li}) = 1;
      for (std::size_t j = 0; j < t_count; ++j) {
        const std::size_t step = static_cast<std::size_t>(k) + j;
        copy_block(entry->plan_queries.block({m, step}), slice.queries.block({m, li, j}));
        copy_block(entry->plan_trajs.block({m, step}), slice.positions.block({m, li, j}));
      }
    }
  }
  return slice;
}

std::vector<Pose2> lag_poses(const MemoryQueue & queue, const HistorySlice & slice)
{
  std::vector<Pose2> poses;
  for (const int frame : slice.source_frames) {
    const FrameCache * entry = frame >= 0 ? queue.find(frame) : nullptr;
    poses.push_back(entry ? entry->ego_pose : Pose2::identity());
  }
  return poses;
}

HistorySlice transform_positions(const HistorySlice & slice, const std::vector<Pose2> & history_poses,
                                 const Pose2 & current_pose)
{
  if (history_poses.size() != static_cast<std::size_t>(slice.lags)) {
    throw std::invalid_argument("compensate: expected one ego pose per history lag");
  }
  HistorySlice out = slice;
  std::vector<Pose2> to_current;
  for (const auto & pose : history_poses) {
    to_current.push_back(compose_se2(inverse_se2(current_pose), pose));
  }
  const std::size_t per_lead = static_cast<std::size_t>(slice.lags * slice.steps);
  for (std::size_t e = 0; e < slice.num_entries(); ++e) {
    const std::size_t lag = (e % per_lead) / static_cast<std::size_t>(slice.steps);
    if (!slice.entry_valid(e) || history_poses[lag] == current_pose) {
      continue;
    }
    double * p = out.positions.data() + 2 * e;
    const auto q = transform_point(to_current[lag], {p[0], p[1]});
    p[0] = q.x;
    p[1] = q.y;
  }
  return out;
}

CompensationEncoder CompensationEncoder::create(nn::ParameterStore & store, const std::string & name,
                                                nn::Index channels, int max_lag, int max_step, std::mt19937_64 & rng)
{
  CompensationEncoder enc;
  enc.mlp = nn::Mlp::create(store, name, 4, channels, channels, rng);
  enc.max_lag = std::max(1, max_lag);
  enc.max_step = std::max(1, max_step);
  return enc;
}

HistoryFeatures slice_features(nn::Tape & tape, const HistorySlice & slice)
{
  HistoryFeatures out;
  out.slice = slice;
  out.features = tape.constant(gather_valid(slice, out.entry_rows));
  return out;
}

HistoryFeatures compensate(nn::Tape & tape, const HistorySlice & slice, const std::vector<Pose2> & history_poses,
                           const Pose2 & current_pose, const CompensationEncoder & encoder)
{
  HistoryFeatures out;
  out.slice = transform_positions(slice, history_poses, current_pose);
  const nn::Mat cached = gather_valid(out.slice, out.entry_rows);
  const nn::Index rows = cached.rows();
  nn::Mat geometry(rows, 4);
  const std::size_t per_lead = static_cast<std::size_t>(slice.lags * slice.steps);
  for (std::size_t e = 0; e < out.entry_rows.size(); ++e) {
    const int r = out.entry_rows[e];
    if (r < 0) {
      continue;
    }
    const std::size_t lag = (e % per_lead) / static_cast<std::size_t>(slice.steps);
    const std::size_t slot = e % static_cast<std::size_t>(slice.steps);
    const double * p = out.slice.positions.data() + 2 * e;
    geometry(r, 0) = p[0] / encoder.position_scale;
    geometry(r, 1) = p[1] / encoder.position_scale;
    geometry(r, 2) = static_cast<double>(lag + 1) / encoder.max_lag;
    geometry(r, 3) = static_cast<double>(slice.source_step(static_cast<int>(lag), static_cast<int>(slot))) /
                     encoder.max_step;
  }
  const nn::Var base = tape.constant(cached);
  if (rows == 0) {
    out.features = base;
    return out;
  }
  out.features = nn::add(base, encoder.mlp(tape, tape.constant(geometry)));
  return out;
}

}  // namespace bridgead::memory
