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

#ifndef BRIDGEAD__PERCEPTION_HPP_
#define BRIDGEAD__PERCEPTION_HPP_

#include "bridgead/layers.hpp"
#include "bridgead/memory_bank.hpp"
#include "bridgead/model_config.hpp"
#include "bridgead/scene.hpp"

#include <vector>

namespace bridgead::perception
{

inline constexpr int kObsFeatureDim = 13;

/// Detected objects of one frame. Rows of all members align.
struct ObjectQuerySet
{
  nn::Var queries;  // N x C
  nn::Var boxes;    // N x 11 anchor boxes
  nn::Var scores;   // N x 1, in [0, 1]
  std::vector<int> track_ids;
  /// Identity reported by the observation source (clutter included).
  std::vector<int> source_ids;
  std::vector<scene::AgentClass> classes;

  int size() const { return static_cast<int>(source_ids.size()); }
};

/// Token set standing in for image features: agent tokens then map tokens.
struct ObservationFeatures
{
  nn::Var tokens;
  int agent_tokens{0};
  int map_tokens{0};
};

struct MapQuerySet
{
  nn::Var queries;       // N_map x C
  nn::Var points;        // N_map x 2P, (x0, y0, x1, y1, ...)
  nn::Var class_scores;  // N_map x 3, in [0, 1]
  std::vector<scene::MapClass> observed_classes;

  int size() const { return static_cast<int>(observed_classes.size()); }
};

struct ObservationEncoder
{
  nn::Mlp agent;
  nn::Mlp polyline;
  int points{10};

  static ObservationEncoder create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                                   std::mt19937_64 & rng);
};

struct DecoderLayer
{
  nn::AttentionBlock self_attn;
  nn::AttentionBlock cross_attn;
  nn::FeedForwardBlock ffn;
  nn::Linear offset;
};

struct DetectionDecoder
{
  std::vector<DecoderLayer> layers;
  nn::Linear score;

  static DetectionDecoder create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                                 std::mt19937_64 & rng);
};

struct Mot2DetFusion
{
  nn::AttentionBlock cross_attn;
  nn::Linear offset;
  nn::Linear score;

  static Mot2DetFusion create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                              std::mt19937_64 & rng);
};

struct MapHead
{
  std::vector<DecoderLayer> layers;
  nn::Linear cls;

  static MapHead create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                        std::mt19937_64 & rng);
};

/// Normalised 13-d input row of one observed box: scaled position and
/// velocity, log sizes, heading pair and a class one-hot.
std::array<double, kObsFeatureDim> observation_features(const scene::Box11 & box, scene::AgentClass cls);

/// Uniform arc-length resampling to `count` points.
std::vector<Vec2> resample_polyline(const std::vector<Vec2> & points, int count);

/// Observed agents kept for decoding: all of them in input order, or the
/// `max_objects` nearest (input order preserved) when there are more.
std::vector<int> select_observations(const scene::ObservationFrame & frame, int max_objects);
/// Observed polylines kept for the map head, same rule as above.
std::vector<int> select_polylines(const scene::ObservationFrame & frame, int max_polylines);

struct EncodedFrame
{
  ObjectQuerySet objects;
  ObservationFeatures features;
  /// Initial map queries and their observed point samples.
  nn::Var map_tokens;
  nn::Var map_points;
  std::vector<scene::MapClass> map_classes;
};

EncodedFrame encode_observations(nn::Tape & tape, const scene::ObservationFrame & frame,
                                 const ObservationEncoder & encoder, const ModelConfig & cfg);

ObjectQuerySet detection_decoder(nn::Tape & tape, const ObjectQuerySet & objects, const ObservationFeatures & feats,
                                 const DetectionDecoder & decoder);

/// Cross-attention from object queries to their aligned historical motion
/// queries, followed by the box/score refinement head.
ObjectQuerySet mot2det_fuse(nn::Tape & tape, const ObjectQuerySet & objects, const memory::HistoryFeatures & m2d,
                            const Mot2DetFusion & fusion);
/// Refinement head alone (used when the fusion is ablated).
ObjectQuerySet refine_detections(nn::Tape & tape, const ObjectQuerySet & objects, const Mot2DetFusion & fusion);

/// Source-id to track-id association carried between frames.
struct TrackTable
{
  std::vector<int> source_ids;
  std::vector<int> track_ids;
  int next_id{0};
};

/// Objects whose source persisted from `previous` keep their ID; new ones
/// scoring at least `threshold` get fresh IDs; the rest get -1.
TrackTable assign_track_ids(const std::vector<int> & source_ids, const std::vector<double> & scores,
                            const TrackTable & previous, double threshold);

MapQuerySet map_head(nn::Tape & tape, const EncodedFrame & encoded, const ObservationFeatures & feats,
                     const MapHead & head);

/// Pattern where each of `n` queries sees keys [key0, key0 + count).
nn::AttentionPattern dense_pattern(int n, int key0, int count);

}  // namespace bridgead::perception

#endif  // BRIDGEAD__PERCEPTION_HPP_
