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

#include "bridgead/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace bridgead::perception
{
namespace
{

constexpr double kPositionScale = 30.0;
constexpr double kVelocityScale = 10.0;
// Per-field step size of the additive box refinement.
constexpr double kBoxOffsetScale[scene::kBoxDim] = {1.0, 1.0, 0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 1.0, 1.0, 0.1};
constexpr int kMapClasses = scene::kNumMapClasses;

nn::Var offset_boxes(nn::Tape & tape, const nn::Var & boxes, const nn::Var & raw_offset)
{
  nn::Mat diag = nn::Mat::Zero(scene::kBoxDim, scene::kBoxDim);
  for (std::size_t i = 0; i < scene::kBoxDim; ++i) {
    diag(static_cast<nn::Index>(i), static_cast<nn::Index>(i)) = kBoxOffsetScale[i];
  }
  const nn::Var moved = nn::add(boxes, nn::matmul(raw_offset, tape.constant(diag)));
  return nn::normalize_col_pair(moved, 6, 7);
}

DecoderLayer make_layer(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg, nn::Index out,
                        std::mt19937_64 & rng)
{
  const nn::Index c = cfg.channels;
  return DecoderLayer{nn::AttentionBlock::create(store, name + ".self_attn", c, cfg.heads, rng),
                      nn::AttentionBlock::create(store, name + ".cross_attn", c, cfg.heads, rng),
                      nn::FeedForwardBlock::create(store, name + ".ffn", c, rng),
                      nn::Linear::create(store, name + ".offset", c, out, rng)};
}

nn::Var decoder_layer(nn::Tape & tape, const DecoderLayer & layer, const nn::Var & q, const ObservationFeatures & feats)
{
  const int n = static_cast<int>(q.rows());
  nn::Var x = layer.self_attn(tape, q, q, dense_pattern(n, 0, n));
  x = layer.cross_attn(tape, x, feats.tokens, dense_pattern(n, 0, static_cast<int>(feats.tokens.rows())));
  return layer.ffn(tape, x);
}

template <typename Distance>
std::vector<int> nearest_subset(int total, int limit, Distance distance)
{
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  if (total <= limit) {
    return order;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return distance(a) < distance(b); });
  order.resize(static_cast<std::size_t>(limit));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

ObservationEncoder ObservationEncoder::create(nn::ParameterStore & store, const std::string & name,
                                              const ModelConfig & cfg, std::mt19937_64 & rng)
{
  const nn::Index c = cfg.channels;
  ObservationEncoder enc;
  enc.agent = nn::Mlp::create(store, name + ".agent", kObsFeatureDim, c, c, rng);
  enc.polyline = nn::Mlp::create(store, name + ".polyline", 2 * cfg.map_points + kMapClasses, c, c, rng);
  enc.points = cfg.map_points;
  return enc;
}

DetectionDecoder DetectionDecoder::create(nn::ParameterStore & store, const std::string & name,
                                          const ModelConfig & cfg, std::mt19937_64 & rng)
{
  DetectionDecoder dec;
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    dec.layers.push_back(make_layer(store, name + ".layer" + std::to_string(l), cfg, scene::kBoxDim, rng));
  }
  dec.score = nn::Linear::create(store, name + ".score", cfg.channels, 1, rng);
  return dec;
}

Mot2DetFusion Mot2DetFusion::create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                                    std::mt19937_64 & rng)
{
  return Mot2DetFusion{nn::AttentionBlock::create(store, name + ".cross_attn", cfg.channels, cfg.heads, rng),
                       nn::Linear::create(store, name + ".offset", cfg.channels, scene::kBoxDim, rng),
                       nn::Linear::create(store, name + ".score", cfg.channels, 1, rng)};
}

MapHead MapHead::create(nn::ParameterStore & store, const std::string & name, const ModelConfig & cfg,
                        std::mt19937_64 & rng)
{
  MapHead head;
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    head.layers.push_back(make_layer(store, name + ".layer" + std::to_string(l), cfg, 2 * cfg.map_points, rng));
  }
  head.cls = nn::Linear::create(store, name + ".cls", cfg.channels, kMapClasses, rng);
  return head;
}

std::array<double, kObsFeatureDim> observation_features(const scene::Box11 & b, scene::AgentClass cls)
{
  const bool car = cls == scene::AgentClass::kCar;
  return {b[0] / kPositionScale, b[1] / kPositionScale, b[2], b[3], b[4], b[5], b[6], b[7],
          b[8] / kVelocityScale, b[9] / kVelocityScale, b[10], car ? 1.0 : 0.0, car ? 0.0 : 1.0};
}

std::vector<Vec2> resample_polyline(const std::vector<Vec2> & points, int count)
{
  if (points.size() < 2 || count < 2) {
    throw std::invalid_argument("resample_polyline: need at least 2 input and 2 output points");
  }
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < points.size(); ++i) {
    cumulative.push_back(cumulative.back() + (points[i] - points[i - 1]).norm());
  }
  const double total = cumulative.back();
  std::vector<Vec2> out;
  std::size_t seg = 1;
  for (int i = 0; i < count; ++i) {
    if (i == count - 1) {
      out.push_back(points.back());
      break;
    }
    const double target = total * static_cast<double>(i) / static_cast<double>(count - 1);
    while (seg + 1 < points.size() && cumulative[seg] < target) {
      ++seg;
    }
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double t = len > 0.0 ? (target - cumulative[seg - 1]) / len : 0.0;
    out.push_back(points[seg - 1] + t * (points[seg] - points[seg - 1]));
  }
  return out;
}

std::vector<int> select_observations(const scene::ObservationFrame & frame, int max_objects)
{
  return nearest_subset(static_cast<int>(frame.agents.size()), max_objects, [&](int i) {
    const auto & b = frame.agents[static_cast<std::size_t>(i)].box;
    return std::hypot(b[0], b[1]);
  });
}

std::vector<int> select_polylines(const scene::ObservationFrame & frame, int max_polylines)
{
  return nearest_subset(static_cast<int>(frame.map.size()), max_polylines, [&](int i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto & p : frame.map[static_cast<std::size_t>(i)].points) {
      best = std::min(best, p.norm());
    }
    return best;
  });
}

nn::AttentionPattern dense_pattern(int n, int key0, int count)
{
  std::vector<int> keys(static_cast<std::size_t>(count));
  std::iota(keys.begin(), keys.end(), key0);
  nn::AttentionPattern pattern;
  for (int i = 0; i < n; ++i) {
    pattern.add_query(keys);
  }
  return pattern;
}

EncodedFrame encode_observations(nn::Tape & tape, const scene::ObservationFrame & frame,
                                 const ObservationEncoder & encoder, const ModelConfig & cfg)
{
  EncodedFrame out;
  auto & objects = out.objects;
  const auto kept = select_observations(frame, cfg.max_objects);
  const auto n = static_cast<nn::Index>(kept.size());
  nn::Mat features(n, kObsFeatureDim);
  nn::Mat boxes(n, static_cast<nn::Index>(scene::kBoxDim));
  for (nn::Index i = 0; i < n; ++i) {
    const auto & obs = frame.agents[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])];
    const auto f = observation_features(obs.box, obs.cls);
    for (int j = 0; j < kObsFeatureDim; ++j) {
      features(i, j) = f[static_cast<std::size_t>(j)];
    }
    for (std::size_t j = 0; j < scene::kBoxDim; ++j) {
      boxes(i, static_cast<nn::Index>(j)) = obs.box[j];
    }
    objects.source_ids.push_back(obs.agent_id);
    objects.classes.push_back(obs.cls);
  }
  objects.queries = encoder.agent(tape, tape.constant(features));
  objects.boxes = tape.constant(boxes);
  objects.scores = tape.constant(nn::Mat::Zero(n, 1));
  objects.track_ids.assign(kept.size(), -1);

  const auto lines = select_polylines(frame, cfg.map_queries);
  const auto m = static_cast<nn::Index>(lines.size());
  const int p = encoder.points;
  nn::Mat line_features = nn::Mat::Zero(m, 2 * p + kMapClasses);
  nn::Mat points(m, 2 * p);
  for (nn::Index i = 0; i < m; ++i) {
    const auto & line = frame.map[static_cast<std::size_t>(lines[static_cast<std::size_t>(i)])];
    const auto samples = resample_polyline(line.points, p);
    for (int j = 0; j < p; ++j) {
      points(i, 2 * j) = samples[static_cast<std::size_t>(j)].x;
      points(i, 2 * j + 1) = samples[static_cast<std::size_t>(j)].y;
    }
    line_features.block(i, 0, 1, 2 * p) = points.row(i) / kPositionScale;
    line_features(i, 2 * p + static_cast<int>(line.cls)) = 1.0;
    out.map_classes.push_back(line.cls);
  }
  out.map_tokens = encoder.polyline(tape, tape.constant(line_features));
  out.map_points = tape.constant(points);

  const std::vector<nn::Var> parts{objects.queries, out.map_tokens};
  out.features.tokens = nn::concat_rows(parts);
  out.features.agent_tokens = static_cast<int>(n);
  out.features.map_tokens = static_cast<int>(m);
  return out;
}

ObjectQuerySet detection_decoder(nn::Tape & tape, const ObjectQuerySet & objects, const ObservationFeatures & feats,
                                 const DetectionDecoder & decoder)
{
  if (decoder.layers.empty()) {
    throw std::invalid_argument("detection_decoder: at least one layer required");
  }
  ObjectQuerySet out = objects;
  for (const auto & layer : decoder.layers) {
    out.queries = decoder_layer(tape, layer, out.queries, feats);
    out.boxes = offset_boxes(tape, out.boxes, layer.offset(tape, out.queries));
  }
  out.scores = nn::sigmoid(decoder.score(tape, out.queries));
  return out;
}

ObjectQuerySet refine_detections(nn::Tape & tape, const ObjectQuerySet & objects, const Mot2DetFusion & fusion)
{
  ObjectQuerySet out = objects;
  out.boxes = offset_boxes(tape, objects.boxes, fusion.offset(tape, objects.queries));
  out.scores = nn::sigmoid(fusion.score(tape, objects.queries));
  return out;
}

ObjectQuerySet mot2det_fuse(nn::Tape & tape, const ObjectQuerySet & objects, const memory::HistoryFeatures & m2d,
                            const Mot2DetFusion & fusion)
{
  const auto & slice = m2d.slice;
  if (slice.kind != memory::SliceKind::kMot2Det || slice.mask.dim(0) != static_cast<std::size_t>(objects.size())) {
    throw std::invalid_argument("mot2det_fuse: history slice is not aligned with the object queries");
  }
  nn::AttentionPattern pattern;
  std::vector<int> keys;
  for (int i = 0; i < objects.size(); ++i) {
    keys.clear();
    for (int k = 0; k < slice.lags; ++k) {
      const int row = m2d.entry_rows[static_cast<std::size_t>(i * slice.lags + k)];
      if (row >= 0) {
        keys.push_back(row);
      }
    }
    pattern.add_query(keys);
  }
  ObjectQuerySet fused = objects;
  fused.queries = fusion.cross_attn(tape, objects.queries, m2d.features, pattern);
  return refine_detections(tape, fused, fusion);
}

TrackTable assign_track_ids(const std::vector<int> & source_ids, const std::vector<double> & scores,
                            const TrackTable & previous, double threshold)
{
  if (source_ids.size() != scores.size()) {
    throw std::invalid_argument("assign_track_ids: ids and scores differ in length");
  }
  std::unordered_map<int, int> known;
  for (std::size_t i = 0; i < previous.source_ids.size(); ++i) {
    if (previous.track_ids[i] >= 0) {
      known.emplace(previous.source_ids[i], previous.track_ids[i]);
    }
  }
  TrackTable out;
  out.next_id = previous.next_id;
  out.source_ids = source_ids;
  for (std::size_t i = 0; i < source_ids.size(); ++i) {
    const auto it = known.find(source_ids[i]);
    if (it != known.end()) {
      out.track_ids.push_back(it->second);
      known.erase(it);
    } else if (scores[i] >= threshold) {
      out.track_ids.push_back(out.next_id++);
    } else {
      out.track_ids.push_back(-1);
    }
  }
  return out;
}

MapQuerySet map_head(nn::Tape & tape, const EncodedFrame & encoded, const ObservationFeatures & feats,
                     const MapHead & head)
{
  MapQuerySet out;
  out.queries = encoded.map_tokens;
  out.points = encoded.map_points;
  out.observed_classes = encoded.map_classes;
  for (const auto & layer : head.layers) {
    out.queries = decoder_layer(tape, layer, out.queries, feats);
    out.points = nn::add(out.points, layer.offset(tape, out.queries));
  }
  out.class_scores = nn::sigmoid(head.cls(tape, out.queries));
  return out;
}

}  // namespace bridgead::perception
