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
#include <span>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/model/two_tower.hpp"

namespace prerank::serve {

// Operator tree evaluated per candidate.
struct QueryNode {
  enum class Kind { kWeightedSum, kFeatureLeaf, kDotLeaf };

  Kind kind = Kind::kDotLeaf;
  std::vector<QueryNode> children;
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t slot = 0;

  static QueryNode Dot() { return {}; }
  static QueryNode Feature(std::size_t slot) {
    QueryNode n;
    n.kind = Kind::kFeatureLeaf;
    n.slot = slot;
    return n;
  }

  bool UsesFeatures() const {
    if (kind == Kind::kFeatureLeaf) return true;
    for (const auto& c : children) {
      if (c.UsesFeatures()) return true;
    }
    return false;
  }

  std::string DebugString() const {
    switch (kind) {
      case Kind::kDotLeaf:
        return "dot";
      case Kind::kFeatureLeaf:
        return "iqp[" + std::to_string(slot) + "]";
      case Kind::kWeightedSum: {
        std::string out = "wsum(";
        for (std::size_t i = 0; i < children.size(); ++i) {
          if (i > 0) out += ", ";
          out += std::to_string(weights[i]) + "*" + children[i].DebugString();
        }
        return out + " + " + std::to_string(bias) + ")";
      }
    }
    return {};
  }
};

// WeightedSum over [dot, iqp_1 .. iqp_F] with the projection's weights.
// `slot_count` is the F the serving index provides. A model without IQP
// inputs compiles to w_0 * dot + b.
inline QueryNode CompileProjection(const model::ProjectionWeights& proj, std::size_t slot_count) {
  if (!proj.iqp_weights.empty() && proj.iqp_weights.size() != slot_count) {
    throw Error(ErrorCode::kLayoutMismatch, "projection expects " + std::to_string(proj.iqp_weights.size()) +
                                                " IQP features, index provides " + std::to_string(slot_count));
  }
  QueryNode root;
  root.kind = QueryNode::Kind::kWeightedSum;
  root.children.push_back(QueryNode::Dot());
  root.weights.push_back(proj.dot_weight);
  for (std::size_t k = 0; k < proj.iqp_weights.size(); ++k) {
    root.children.push_back(QueryNode::Feature(k));
    root.weights.push_back(proj.iqp_weights[k]);
  }
  root.bias = proj.bias;
  return root;
}

// Plain double arithmetic.
struct PlainArith {
  double Mul(double a, double b) { return a * b; }
  double Add(double a, double b) { return a + b; }
  // Bias adds are outside the FLOP convention.
  double AddBias(double a, double b) { return a + b; }
};

// Same arithmetic with an operation counter.
struct CountingArith {
  std::uint64_t ops = 0;
  double Mul(double a, double b) {
    ++ops;
    return a * b;
  }
  double Add(double a, double b) {
    ++ops;
    return a + b;
  }
  double AddBias(double a, double b) { return a + b; }
};

struct CandidateInputs {
  std::span<const float> query_embedding;
  std::span<const float> item_embedding;
  std::span<const float> iqp;
};

template <typename Arith>
double EvaluateDot(std::span<const float> a, std::span<const float> b, Arith& arith) {
  if (a.empty()) return 0.0;
  double acc = arith.Mul(a[0], b[0]);
  for (std::size_t i = 1; i < a.size(); ++i) acc = arith.Add(acc, arith.Mul(a[i], b[i]));
  return acc;
}

template <typename Arith>
double Evaluate(const QueryNode& node, const CandidateInputs& in, Arith& arith) {
  switch (node.kind) {
    case QueryNode::Kind::kDotLeaf:
      return EvaluateDot(in.query_embedding, in.item_embedding, arith);
    case QueryNode::Kind::kFeatureLeaf:
      return in.iqp[node.slot];
    case QueryNode::Kind::kWeightedSum: {
      double acc = 0.0;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        const double term = arith.Mul(node.weights[i], Evaluate(node.children[i], in, arith));
        acc = i == 0 ? term : arith.Add(acc, term);
      }
      return arith.AddBias(acc, node.bias);
    }
  }
  return 0.0;
}

inline double Evaluate(const QueryNode& node, const CandidateInputs& in) {
  PlainArith arith;
  return Evaluate(node, in, arith);
}

}  // namespace prerank::serve
