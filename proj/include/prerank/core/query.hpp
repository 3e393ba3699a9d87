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

#include <string>
#include <string_view>

#include "prerank/core/error.hpp"
#include "prerank/core/hash.hpp"
#include "prerank/core/types.hpp"

namespace prerank {

namespace detail {
inline bool IsQuerySpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace detail

// Lowercases ASCII letters, collapses whitespace runs to one space and trims.
// Bytes >= 0x80 pass through untouched, so UTF-8 sequences stay intact.
inline QueryKey NormalizeQuery(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (detail::IsQuerySpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    out.push_back(static_cast<char>(c));
  }
  if (out.empty()) {
    throw Error(ErrorCode::kEmptyQuery, "query is empty after normalization");
  }
  QueryKey key;
  key.key_hash = Fnv1a64(out);
  key.normalized_text = std::move(out);
  return key;
}

// Whitespace tokens of an already normalized query.
inline std::vector<std::string_view> QueryTokens(const QueryKey& query) {
  std::vector<std::string_view> tokens;
  std::string_view text = query.normalized_text;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) tokens.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

}  // namespace prerank
