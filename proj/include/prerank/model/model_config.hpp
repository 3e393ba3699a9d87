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
#include <cstdio>
#include <string>
#include <type_traits>
#include <vector>

#include "prerank/core/config_file.hpp"
#include "prerank/core/error.hpp"
#include "prerank/core/types.hpp"

namespace prerank::model {

constexpr std::size_t kNumTimeBuckets = 5;

// Age buckets: <1h, <1d, <7d, <30d, >=30d.
inline std::size_t TimeBucket(std::int64_t age_seconds) {
  if (age_seconds < 3600) return 0;
  if (age_seconds < kSecondsPerDay) return 1;
  if (age_seconds < 7 * kSecondsPerDay) return 2;
  if (age_seconds < 30 * kSecondsPerDay) return 3;
  return 4;
}

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t seq_max_len = 100;
  std::size_t seq_item_dim = 32;
  std::size_t action_dim = 8;
  std::size_t time_dim = 8;
  std::size_t token_buckets = 4096;
  std::size_t token_dim = 32;
  std::size_t context_dim = 4;
  std::vector<std::string> countries = {"US", "GB", "FR", "DE", "BR", "JP", "IN", "CA"};
  std::vector<std::string> languages = {"en", "fr", "de", "pt", "ja", "hi", "es"};
  std::size_t age_buckets = 6;
  std::size_t gender_buckets = 3;
  std::size_t item_id_buckets = 4096;
  std::size_t item_id_dim = 32;
  std::size_t engagement_rate_dim = 3;
  std::size_t content_dim = 32;
  std::size_t masknet_blocks = 2;
  std::size_t mask_hidden = 32;
  std::size_t block_out = 32;
  std::vector<int> query_hidden = {64};
  std::vector<int> item_hidden = {64};
  std::size_t iqp_features = 7;
  // Fixed input scale applied to IQP features ahead of the projection layer.
  double iqp_scale = 1.0;
  bool use_towers = true;
  bool use_iqp = true;
  bool use_sequence = true;
  bool use_masknet = true;
  std::uint64_t init_seed = 1;

  std::size_t entry_dim() const { return seq_item_dim + action_dim + time_dim; }
  std::size_t context_features() const { return 5; }
  std::size_t query_input_dim() const {
    return token_dim + context_features() * context_dim + (use_sequence ? 2 * entry_dim() : 0);
  }
  std::size_t item_input_dim() const { return item_id_dim + engagement_rate_dim + content_dim; }
  // Number of IQP inputs the projection layer consumes.
  std::size_t projection_features() const { return use_iqp ? iqp_features : 0; }

  void Validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must be positive");
    };
    positive(embed_dim, "embed_dim");
    positive(seq_max_len, "seq_max_len");
    positive(seq_item_dim, "seq_item_dim");
    positive(action_dim, "action_dim");
    positive(time_dim, "time_dim");
    positive(token_buckets, "token_buckets");
    positive(token_dim, "token_dim");
    positive(context_dim, "context_dim");
    positive(age_buckets, "age_buckets");
    positive(gender_buckets, "gender_buckets");
    positive(item_id_buckets, "item_id_buckets");
    positive(item_id_dim, "item_id_dim");
    positive(content_dim, "content_dim");
    positive(masknet_blocks, "masknet_blocks");
    positive(mask_hidden, "mask_hidden");
    positive(block_out, "block_out");
    for (int w : query_hidden) positive(static_cast<std::size_t>(w > 0 ? w : 0), "query_hidden");
    for (int w : item_hidden) positive(static_cast<std::size_t>(w > 0 ? w : 0), "item_hidden");
    if (!use_towers && !use_iqp) {
      throw Error(ErrorCode::kInvalidArgument, "model needs towers, IQP features or both");
    }
    if (use_iqp && iqp_features == 0) {
      throw Error(ErrorCode::kInvalidArgument, "use_iqp requires iqp_features > 0");
    }
  }

  KeyValueConfig ToKeyValue() const {
    KeyValueConfig kv;
    auto put = [&kv](const char* k, auto v) { kv.Set(k, std::to_string(v)); };
    auto join = [](const auto& list) {
      std::string out;
      for (const auto& v : list) {
        if (!out.empty()) out += ',';
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::string>) {
          out += v;
        } else {
          out += std::to_string(v);
        }
      }
      return out;
    };
    put("embed_dim", embed_dim);
    put("seq_max_len", seq_max_len);
    put("seq_item_dim", seq_item_dim);
    put("action_dim", action_dim);
    put("time_dim", time_dim);
    put("token_buckets", token_buckets);
    put("token_dim", token_dim);
    put("context_dim", context_dim);
    kv.Set("countries", join(countries));
    kv.Set("languages", join(languages));
    put("age_buckets", age_buckets);
    put("gender_buckets", gender_buckets);
    put("item_id_buckets", item_id_buckets);
    put("item_id_dim", item_id_dim);
    put("engagement_rate_dim", engagement_rate_dim);
    put("content_dim", content_dim);
    put("masknet_blocks", masknet_blocks);
    put("mask_hidden", mask_hidden);
    put("block_out", block_out);
    kv.Set("query_hidden", join(query_hidden));
    kv.Set("item_hidden", join(item_hidden));
    put("iqp_features", iqp_features);
    char scale[40];
    std::snprintf(scale, sizeof(scale), "%.17g", iqp_scale);
    kv.Set("iqp_scale", scale);
    put("use_towers", static_cast<int>(use_towers));
    put("use_iqp", static_cast<int>(use_iqp));
    put("use_sequence", static_cast<int>(use_sequence));
    put("use_masknet", static_cast<int>(use_masknet));
    put("init_seed", init_seed);
    return kv;
  }

  // Reads every key present in `kv`; absent keys keep their current values.
  void UpdateFrom(const KeyValueConfig& kv) {
    auto get = [&kv](const char* k, std::size_t& v) { v = kv.GetInt<std::size_t>(k, v); };
    auto split = [](const std::string& s) {
      std::vector<std::string> out;
      std::size_t start = 0;
      while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const std::string part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return out;
    };
    get("embed_dim", embed_dim);
    get("seq_max_len", seq_max_len);
    get("seq_item_dim", seq_item_dim);
    get("action_dim", action_dim);
    get("time_dim", time_dim);
    get("token_buckets", token_buckets);
    get("token_dim", token_dim);
    get("context_dim", context_dim);
    if (kv.Has("countries")) countries = split(kv.GetString("countries", ""));
    if (kv.Has("languages")) languages = split(kv.GetString("languages", ""));
    get("age_buckets", age_buckets);
    get("gender_buckets", gender_buckets);
    get("item_id_buckets", item_id_buckets);
    get("item_id_dim", item_id_dim);
    get("engagement_rate_dim", engagement_rate_dim);
    get("content_dim", content_dim);
    get("masknet_blocks", masknet_blocks);
    get("mask_hidden", mask_hidden);
    get("block_out", block_out);
    query_hidden = kv.GetIntList("query_hidden", query_hidden);
    item_hidden = kv.GetIntList("item_hidden", item_hidden);
    get("iqp_features", iqp_features);
    iqp_scale = kv.GetDouble("iqp_scale", iqp_scale);
    use_towers = kv.GetBool("use_towers", use_towers);
    use_iqp = kv.GetBool("use_iqp", use_iqp);
    use_sequence = kv.GetBool("use_sequence", use_sequence);
    use_masknet = kv.GetBool("use_masknet", use_masknet);
    init_seed = kv.GetInt<std::uint64_t>("init_seed", init_seed);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// The three scoring variants compared in evaluation.
enum class Variant { kFull, kTwoTower, kIqpOnly };

inline ModelConfig WithVariant(ModelConfig config, Variant variant) {
  switch (variant) {
    case Variant::kFull:
      config.use_towers = true;
      config.use_iqp = true;
      break;
    case Variant::kTwoTower:
      config.use_towers = true;
      config.use_iqp = false;
      break;
    case Variant::kIqpOnly:
      config.use_towers = false;
      config.use_iqp = true;
      break;
  }
  return config;
}

}  // namespace prerank::model
