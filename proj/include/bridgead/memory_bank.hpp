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

#ifndef BRIDGEAD__MEMORY_BANK_HPP_
#define BRIDGEAD__MEMORY_BANK_HPP_

#include "bridgead/geometry.hpp"
#include "bridgead/layers.hpp"
#include "bridgead/tensor.hpp"

#include <deque>
#include <stdexcept>
#include <vector>

namespace bridgead::memory
{

class SequencingError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

/// One past frame's outputs, detached from any tape.
struct FrameCache
{
  int frame_index{0};
  double frame_dt{0.5};
  Pose2 ego_pose;
  std::vector<int> agent_ids;
  Tensor motion_queries;  // [N_a, M_mot, T_mot, C]
  Tensor motion_trajs;    // [N_a, M_mot, T_mot, 2], ego frame of this frame
  Tensor motion_scores;   // [N_a, M_mot]
  Tensor plan_queries;    // [M_plan, T_plan, C]
  Tensor plan_trajs;      // [M_plan, T_plan, 2]
  Tensor plan_scores;     // [M_plan]

  /// Absolute time of 1-based future step `s` of this frame.
  double step_timestamp(int s) const { return static_cast<double>(frame_index + s) * frame_dt; }
  std::size_t num_agents() const { return agent_ids.size(); }
  /// Throws std::invalid_argument on inconsistent shapes or non-finite scores.
  void validate() const;

  friend bool operator==(const FrameCache &, const FrameCache &) = default;
};

/// FIFO of the K most recent frames, oldest first.
class MemoryQueue
{
public:
  explicit MemoryQueue(std::size_t capacity = 3);

  /// Appends `frame`, evicting the oldest entry beyond capacity.
  /// Throws SequencingError unless frame_index exceeds the newest entry's.
  void push(FrameCache frame);
  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<FrameCache> & entries() const { return entries_; }
  /// Entry for `frame_index`, or nullptr.
  const FrameCache * find(int frame_index) const;

  friend bool operator==(const MemoryQueue &, const MemoryQueue &) = default;

private:
  std::size_t capacity_;
  std::deque<FrameCache> entries_;
};

enum class SliceKind { kMot2Det, kMot2Mot, kPlan2Plan };

/// Time-aligned view of cached queries.
///  m2d: queries [N, K, C],          mask [N, K], positions [N, K, 2],          timestamps [K, 1]
///  m2m: queries [N, M, K, T, C],    mask [N, K], positions [N, M, K, T, 2],    timestamps [K, T]
///  p2p: queries [M, K, T, C],       mask [M, K], positions [M, K, T, 2],       timestamps [K, T]
/// Lag k (0-based) refers to frame t-(k+1). Invalid entries are zero-filled;
/// timestamps of missing lags are NaN.
struct HistorySlice
{
  SliceKind kind{SliceKind::kMot2Det};
  int lags{0};
  int steps{1};
  Tensor queries;
  Mask mask;
  Tensor positions;
  Tensor timestamps;
  /// 1-based source step index per (lag, slot).
  std::vector<int> source_steps;
  /// Source frame index per lag, -1 when absent.
  std::vector<int> source_frames;

  int source_step(int lag, int slot) const { return source_steps[static_cast<std::size_t>(lag * steps + slot)]; }
  bool any_valid() const;
  /// Number of query rows when the leading axes are flattened.
  std::size_t num_entries() const;
  std::size_t channels() const { return queries.rank() == 0 ? 0 : queries.shape().back(); }
  /// Size of the leading (agent, agent x mode, or mode) axis.
  std::size_t leading() const { return lags * steps == 0 ? 0 : num_entries() / static_cast<std::size_t>(lags * steps); }
  /// Entries are laid out as ((lead * lags + lag) * steps + slot).
  bool entry_valid(std::size_t entry) const;
  /// Leading modes folded into one mask row (M for m2m, else 1).
  int mask_group{1};
};

/// For each lag k, the step of frame t-k that lands on time t, taking the
/// highest-scoring mode per agent (lowest index on ties).
HistorySlice slice_m2d(const MemoryQueue & queue, int current_frame, const std::vector<int> & agent_ids, int lags,
                       std::size_t channels);
/// Steps k+1..k+t_m2m of frame t-k (aligned with current steps 1..t_m2m), modes by index.
HistorySlice slice_m2m(const MemoryQueue & queue, int current_frame, const std::vector<int> & agent_ids, int lags,
                       int t_m2m, int modes, int t_mot, std::size_t channels);
/// Plan analogue of slice_m2m.
HistorySlice slice_p2p(const MemoryQueue & queue, int current_frame, int lags, int t_p2p, int modes, int t_plan,
                       std::size_t channels);

/// Ego pose of each lag's source frame (identity where absent).
std::vector<Pose2> lag_poses(const MemoryQueue & queue, const HistorySlice & slice);

/// Re-expresses cached positions in the current ego frame. Shapes and masks
/// are preserved. Throws std::invalid_argument on pose count mismatch.
HistorySlice transform_positions(const HistorySlice & slice, const std::vector<Pose2> & history_poses,
                                 const Pose2 & current_pose);

/// Learned embedding of (position, lag, step offset) added to cached queries.
struct CompensationEncoder
{
  nn::Mlp mlp;
  double position_scale{30.0};
  int max_lag{3};
  int max_step{12};

  static CompensationEncoder create(nn::ParameterStore & store, const std::string & name, nn::Index channels,
                                    int max_lag, int max_step, std::mt19937_64 & rng);
};

/// Features of the valid entries of a slice, ready to be used as attention keys.
struct HistoryFeatures
{
  HistorySlice slice;
  nn::Var features;
  /// Row in `features` for each slice entry, -1 when invalid.
  std::vector<int> entry_rows;
};

HistoryFeatures compensate(nn::Tape & tape, const HistorySlice & slice, const std::vector<Pose2> & history_poses,
                            const Pose2 & current_pose, const CompensationEncoder & encoder);

/// Cached queries of the valid entries without compensation.
HistoryFeatures slice_features(nn::Tape & tape, const HistorySlice & slice);

}  // namespace bridgead::memory

#endif  // BRIDGEAD__MEMORY_BANK_HPP_
