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

#include <array>
#include <span>

#include "prerank/core/types.hpp"

namespace prerank {

// Per-action significance weights for positive examples.
struct ActionWeights {
  std::array<float, kNumActionTypes> weight{};

  ActionWeights() { weight.fill(1.0f); }

  float operator[](ActionType a) const { return weight[static_cast<std::size_t>(a)]; }
  float& operator[](ActionType a) { return weight[static_cast<std::size_t>(a)]; }

  static ActionWeights Defaults() {
    ActionWeights w;
    w[ActionType::kSave] = 2.0f;
    w[ActionType::kLongClick] = 1.5f;
    return w;
  }
};

// Unified label of one (user, query, item) impression: positive iff any event
// falls in `action_set`. The weight of a positive is the largest weight among
// the matched actions, so a save plus a click is not counted twice.
inline UnifiedLabel ComputeUnifiedLabel(std::span<const EngagementEvent> events,
                                        ActionSet action_set,
                                        const ActionWeights& weights) {
  UnifiedLabel label;
  float best = 0.0f;
  for (const EngagementEvent& e : events) {
    if (!action_set.Contains(e.action)) continue;
    if (label.value == 0 || weights[e.action] > best) best = weights[e.action];
    label.value = 1;
  }
  label.weight = label.value ? best : 1.0f;
  return label;
}

// Same rule over a set of observed actions.
inline UnifiedLabel ComputeUnifiedLabel(ActionSet observed, ActionSet action_set,
                                        const ActionWeights& weights) {
  UnifiedLabel label;
  float best = 0.0f;
  for (ActionType a : kAllActions) {
    if (!observed.Contains(a) || !action_set.Contains(a)) continue;
    if (label.value == 0 || weights[a] > best) best = weights[a];
    label.value = 1;
  }
  label.weight = label.value ? best : 1.0f;
  return label;
}

}  // namespace prerank
