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
#include <vector>

#include "prerank/core/types.hpp"

namespace prerank::model {

// One past engagement in the requesting user's history.
struct SequenceEntry {
  EmbeddingVec item;
  ActionType action = ActionType::kClick;
  std::int64_t age_seconds = 0;
};

struct QueryFeatures {
  QueryKey query;
  RequestContext context;
  // Most recent first; entries beyond the configured maximum are ignored.
  std::vector<SequenceEntry> sequence;
};

struct ItemFeatures {
  ItemId id;
  std::vector<float> engagement_rates;
  EmbeddingVec content;
};

}  // namespace prerank::model
