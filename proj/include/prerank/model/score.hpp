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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/model/model_config.hpp"
#include "prerank/model/two_tower.hpp"

namespace prerank::model {

struct ScoreBreakdown {
  double raw = 0.0;
  double probability = 0.0;
  double dot = 0.0;
  std::vector<float> iqp_features;
};

inline double SigmoidD(double x) { return Sigmoid(x); }

inline double EmbeddingDot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

// Scores one pair from precomputed embeddings and projection weights.
inline ScoreBreakdown ScorePair(std::span<const float> q_emb, std::span<const float> i_emb,
                                std::span<const float> iqp, const ProjectionWeights& proj,
                                std::size_t embed_dim) {
  if (q_emb.size() != embed_dim || i_emb.size() != embed_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding width must be " + std::to_string(embed_dim));
  }
  if (iqp.size() != proj.iqp_weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(proj.iqp_weights.size()) +
                                                   " IQP features, got " + std::to_string(iqp.size()));
  }
  ScoreBreakdown out;
  out.dot = EmbeddingDot(q_emb, i_emb);
  out.raw = proj.dot_weight * out.dot + proj.bias;
  for (std::size_t k = 0; k < iqp.size(); ++k) out.raw += proj.iqp_weights[k] * iqp[k];
  out.probability = SigmoidD(out.raw);
  out.iqp_features.assign(iqp.begin(), iqp.end());
  return out;
}

inline ScoreBreakdown Score(const Model& model, std::span<const float> q_emb, std::span<const float> i_emb,
                            std::span<const float> iqp) {
  return ScorePair(q_emb, i_emb, iqp, model.EffectiveProjection(), model.config().embed_dim);
}

// Per-candidate online arithmetic with an n-dim inner product costing 2n-1
// and the bias add excluded.
inline std::uint64_t FlopCount(std::size_t embed_dim, std::size_t iqp_features, bool with_interactions) {
  if (embed_dim == 0) throw Error(ErrorCode::kInvalidArgument, "embed_dim must be positive");
  std::uint64_t flops = 2 * embed_dim - 1;
  if (with_interactions) flops += 2 * (iqp_features + 1) - 1;
  return flops;
}

inline std::uint64_t FlopCount(const ModelConfig& config, bool with_interactions) {
  return FlopCount(config.embed_dim, config.iqp_features, with_interactions);
}

}  // namespace prerank::model
