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


#include "bridgead/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace bridgead
{
namespace
{

using nlohmann::json;

struct RawCheckpoint
{
  json manifest;
  std::vector<char> payload;
};

RawCheckpoint read_raw(const std::filesystem::path & path, bool with_payload)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("checkpoint not found: " + path.string());
  }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw ConfigError(path.string() + ": not a checkpoint file");
  }
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char *>(len_bytes), 8);
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) {
    len = (len << 8) | len_bytes[i];
  }
  if (!in || len > (1ull << 32)) {
    throw ConfigError(path.string() + ": corrupt manifest length");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) {
    throw ConfigError(path.string() + ": truncated manifest");
  }
  RawCheckpoint raw;
  try {
    raw.manifest = json::parse(text);
  } catch (const json::exception & e) {
    throw ConfigError(path.string() + ": bad manifest: " + e.what());
  }
  if (with_payload) {
    raw.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return raw;
}

CheckpointInfo info_from(const json & manifest, const std::filesystem::path & path)
{
  CheckpointInfo info;
  try {
    if (manifest.at("format") != "bridgead-checkpoint" || manifest.at("version") != 1) {
      throw ConfigError("unsupported checkpoint format");
    }
    info.config = run_config_from_json(manifest.at("config"));
    info.config_hash = manifest.at("config_hash").get<std::string>();
    info.stage = stage_from_string(manifest.at("stage").get<std::string>());
  } catch (const json::exception & e) {
    throw ConfigError(path.string() + ": bad manifest: " + e.what());
  }
  info.manifest = manifest;
  return info;
}

}  // namespace

void save_checkpoint(const std::filesystem::path & path, const BridgeModel & model, const RunConfig & config)
{
  if (!(config.model == model.config())) {
    throw std::invalid_argument("save_checkpoint: config.model does not describe the model");
  }
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto & p : model.store().parameters()) {
    const auto nbytes = static_cast<std::uint64_t>(p->value.size()) * sizeof(double);
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"dtype", "float64"},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json manifest = {{"format", "bridgead-checkpoint"},
                         {"version", 1},
                         {"stage", to_string(config.train.stage)},
                         {"config_hash", config_hash(config)},
                         {"config", to_json(config)},
                         {"payload_bytes", offset},
                         {"tensors", tensors}};
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  out.write(kCheckpointMagic, 8);
  std::uint64_t len = text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) {
    len_bytes[i] = static_cast<unsigned char>(len & 0xffu);
    len >>= 8;
  }
  out.write(reinterpret_cast<const char *>(len_bytes), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  // Host byte order; load checks the manifest's dtype and sizes.
  for (const auto & p : model.store().parameters()) {
    out.write(reinterpret_cast<const char *>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) {
    throw std::runtime_error("failed writing checkpoint " + path.string());
  }
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path & path)
{
  return info_from(read_raw(path, false).manifest, path);
}

CheckpointInfo load_checkpoint(const std::filesystem::path & path, BridgeModel & model)
{
  const auto raw = read_raw(path, true);
  auto info = info_from(raw.manifest, path);
  const auto & tensors = raw.manifest.at("tensors");
  const auto & params = model.store().parameters();
  if (tensors.size() != params.size()) {
    throw ConfigError(path.string() + ": manifest lists " + std::to_string(tensors.size()) +
                      " tensors, model has " + std::to_string(params.size()));
  }
  std::map<std::string, const json *> by_name;
  for (const auto & t : tensors) {
    by_name[t.at("name").get<std::string>()] = &t;
  }
  // Validate everything before touching the model.
  for (const auto & p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw ConfigError(path.string() + ": missing tensor '" + p->name + "'");
    }
    const auto & t = *it->second;
    const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
    if (shape.size() != 2 || shape[0] != p->value.rows() || shape[1] != p->value.cols()) {
      throw ConfigError(path.string() + ": shape mismatch for '" + p->name + "'");
    }
    if (t.at("dtype") != "float64") {
      throw ConfigError(path.string() + ": unsupported dtype for '" + p->name + "'");
    }
    const auto off = t.at("offset").get<std::uint64_t>();
    const auto nbytes = t.at("nbytes").get<std::uint64_t>();
    if (nbytes != static_cast<std::uint64_t>(p->value.size()) * sizeof(double) || off + nbytes > raw.payload.size()) {
      throw ConfigError(path.string() + ": payload out of range for '" + p->name + "'");
    }
  }
  for (const auto & p : params) {
    const auto & t = *by_name.at(p->name);
    const auto off = t.at("offset").get<std::uint64_t>();
    std::memcpy(p->value.data(), raw.payload.data() + off, static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return info;
}

}  // namespace bridgead
