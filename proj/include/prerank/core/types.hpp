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
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prerank/core/error.hpp"

namespace prerank {

constexpr std::int64_t kSecondsPerDay = 86400;

struct ItemId {
  std::uint64_t value = 0;

  constexpr bool valid() const { return value != 0; }
  friend constexpr auto operator<=>(ItemId, ItemId) = default;
};

struct ItemIdHash {
  std::size_t operator()(ItemId id) const noexcept { return id.value * 0x9e3779b97f4a7c15ULL; }
};

// A canonical query. Construct through NormalizeQuery (core/query.hpp) so
// that key_hash always matches normalized_text.
struct QueryKey {
  std::string normalized_text;
  std::uint64_t key_hash = 0;

  friend bool operator==(const QueryKey& a, const QueryKey& b) {
    return a.key_hash == b.key_hash && a.normalized_text == b.normalized_text;
  }
};

enum class ActionType : std::uint8_t {
  kSave = 0,
  kLongClick,
  kDownload,
  kScreenshot,
  kClick,
  kHide,
  kReport,
  kImpression,
};

constexpr std::size_t kNumActionTypes = 8;

constexpr std::array<ActionType, kNumActionTypes> kAllActions = {
    ActionType::kSave,  ActionType::kLongClick, ActionType::kDownload,
    ActionType::kScreenshot, ActionType::kClick, ActionType::kHide,
    ActionType::kReport, ActionType::kImpression};

inline std::string_view ActionName(ActionType action) {
  static constexpr std::array<std::string_view, kNumActionTypes> kNames = {
      "save", "long_click", "download", "screenshot",
      "click", "hide", "report", "impression"};
  return kNames[static_cast<std::size_t>(action)];
}

inline std::optional<ActionType> ParseAction(std::string_view name) {
  for (ActionType a : kAllActions) {
    if (ActionName(a) == name) return a;
  }
  return std::nullopt;
}

// Small closed set of actions stored as a bit mask.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr ActionSet(std::initializer_list<ActionType> actions) {
    for (ActionType a : actions) Insert(a);
  }

  constexpr void Insert(ActionType a) { bits_ |= Bit(a); }
  constexpr bool Contains(ActionType a) const { return (bits_ & Bit(a)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  static constexpr ActionSet FromBits(std::uint8_t bits) {
    ActionSet s;
    s.bits_ = bits;
    return s;
  }
  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  static constexpr std::uint8_t Bit(ActionType a) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
  }
  std::uint8_t bits_ = 0;
};

// Actions that make an impression a positive training example.
inline constexpr ActionSet DefaultLabelActions() {
  return {ActionType::kSave, ActionType::kLongClick, ActionType::kDownload,
          ActionType::kScreenshot, ActionType::kClick};
}

// Actions that fulfil a search session.
inline constexpr ActionSet FulfillingActions() {
  return {ActionType::kSave, ActionType::kLongClick, ActionType::kDownload,
          ActionType::kScreenshot};
}

struct EngagementEvent {
  std::int64_t timestamp = 0;
  std::uint64_t user_id = 0;
  QueryKey query;
  ItemId item;
  ActionType action = ActionType::kImpression;
  std::string surface;
  std::uint64_t session_id = 0;

  friend bool operator==(const EngagementEvent&, const EngagementEvent&) = default;
};

// One search request as it appears in the request log. C(q) counts these.
struct SearchRequest {
  std::int64_t timestamp = 0;
  std::uint64_t user_id = 0;
  QueryKey query;
  std::uint64_t session_id = 0;

  friend bool operator==(const SearchRequest&, const SearchRequest&) = default;
};

enum class Device : std::uint8_t { kMobile = 0, kDesktop, kTablet };
constexpr std::size_t kNumDevices = 3;

inline std::string_view DeviceName(Device d) {
  static constexpr std::array<std::string_view, kNumDevices> kNames = {
      "mobile", "desktop", "tablet"};
  return kNames[static_cast<std::size_t>(d)];
}

inline std::optional<Device> ParseDevice(std::string_view name) {
  for (std::size_t i = 0; i < kNumDevices; ++i) {
    if (DeviceName(static_cast<Device>(i)) == name) return static_cast<Device>(i);
  }
  return std::nullopt;
}

struct RequestContext {
  std::uint64_t user_id = 0;
  std::string country = "US";
  Device device = Device::kMobile;
  std::string language = "en";
  std::uint32_t age_bucket = 0;
  std::uint32_t gender_bucket = 0;

  friend bool operator==(const RequestContext&, const RequestContext&) = default;
};

// Fixed-length float vector. The length is part of the value and checked at
// every boundary where two vectors meet.
class EmbeddingVec {
 public:
  EmbeddingVec() = default;
  explicit EmbeddingVec(std::size_t dim) : values_(dim, 0.0f) {}
  explicit EmbeddingVec(std::vector<float> values) : values_(std::move(values)) {}

  std::size_t dim() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }
  float& operator[](std::size_t i) { return values_[i]; }

  bool AllFinite() const {
    for (float v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const EmbeddingVec&, const EmbeddingVec&) = default;

 private:
  std::vector<float> values_;
};

struct UnifiedLabel {
  int value = 0;
  float weight = 1.0f;

  friend bool operator==(const UnifiedLabel&, const UnifiedLabel&) = default;
};

inline std::int64_t DayOf(std::int64_t timestamp) {
  return timestamp >= 0 ? timestamp / kSecondsPerDay
                        : -((-timestamp + kSecondsPerDay - 1) / kSecondsPerDay);
}

}  // namespace prerank
