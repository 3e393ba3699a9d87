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
#include <unordered_map>

#include "prerank/core/types.hpp"

namespace prerank::train {

// Exact streaming item frequency over the training stream.
class FrequencyEstimator {
 public:
  void Observe(ItemId item) {
    ++counts_[item];
    ++total_;
  }

  std::uint64_t total() const { return total_; }
  std::uint64_t count(ItemId item) const {
    auto it = counts_.find(item);
    return it == counts_.end() ? 0 : it->second;
  }

  // Unseen items fall back to one occurrence.
  double Probability(ItemId item) const {
    if (total_ == 0) return 1.0;
    const std::uint64_t c = count(item);
    return static_cast<double>(c == 0 ? 1 : c) / static_cast<double>(total_);
  }

  double LogProbability(ItemId item) const { return std::log(Probability(item)); }

 private:
  std::unordered_map<ItemId, std::uint64_t, ItemIdHash> counts_;
  std::uint64_t total_ = 0;
};

}  // namespace prerank::train
