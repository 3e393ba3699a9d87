/*
 * Copyright 2026 The Prerank Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <sstream>
#include <string>

#include "prerank/core/binary_io.hpp"
#include "prerank/core/config_file.hpp"
#include "prerank/core/error.hpp"
#include "prerank/model/two_tower.hpp"

namespace prerank::model {

inline constexpr std::string_view kCheckpointMagic = "PRCKPT\x01\n";
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: magic, version, config text, tensor count, then per tensor
// name, rows, cols and rows*cols float32 values, all little-endian.
inline std::string SerializeCheckpoint(const Model& model) {
  ByteWriter w;
  w.Raw(kCheckpointMagic);
  w.U32(kCheckpointVersion);
  w.Str(model.config().ToKeyValue().Serialize());
  const auto& tensors = model.params().tensors();
  w.U32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.Str(t.name);
    w.U32(static_cast<std::uint32_t>(t.rows));
    w.U32(static_cast<std::uint32_t>(t.cols));
    for (float v : t.value) w.F32(v);
  }
  return w.Take();
}

inline Model DeserializeCheckpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.Raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error(ErrorCode::kFormatError, "not a model checkpoint");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kFormatError, "unsupported checkpoint version " + std::to_string(version));
  }
  std::istringstream config_text(r.Str());
  ModelConfig config;
  config.UpdateFrom(KeyValueConfig::Parse(config_text));
  ParamSet<float> params;
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.Str();
    const std::uint32_t rows = r.U32();
    const std::uint32_t cols = r.U32();
    const std::size_t h = params.Add(std::move(name), rows, cols);
    for (float& v : params[h].value) v = r.F32();
  }
  if (!r.done()) throw Error(ErrorCode::kFormatError, "trailing bytes after checkpoint");
  return Model(config, std::move(params));
}

inline void SaveCheckpoint(const Model& model, const std::string& path) {
  WriteFileBytes(path, SerializeCheckpoint(model));
}

inline Model LoadCheckpoint(const std::string& path) { return DeserializeCheckpoint(ReadFileBytes(path)); }

inline std::uint64_t CheckpointDigest(const Model& model) { return BytesDigest(SerializeCheckpoint(model)); }

}  // namespace prerank::model
