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
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prerank/core/query.hpp"

namespace prerank::eval {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
  double proximity_weight = 0.5;
};

// Lowercased whitespace tokens; empty text gives no tokens.
inline std::vector<std::string> TextTokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    current.push_back(static_cast<char>(c));
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

class CorpusStats {
 public:
  CorpusStats() = default;

  void AddDocument(const std::vector<std::string>& tokens) {
    ++docs_;
    total_length_ += tokens.size();
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end())) ++doc_freq_[t];
  }

  std::uint64_t docs() const { return docs_; }
  double average_length() const {
    return docs_ == 0 ? 0.0 : static_cast<double>(total_length_) / static_cast<double>(docs_);
  }
  std::uint64_t doc_freq(const std::string& token) const {
    auto it = doc_freq_.find(token);
    return it == doc_freq_.end() ? 0 : it->second;
  }

  // ln(1 + (N - df + 0.5) / (df + 0.5)), positive for every df <= N.
  double Idf(const std::string& token) const {
    const double n = static_cast<double>(docs_), df = static_cast<double>(doc_freq(token));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

 private:
  std::uint64_t docs_ = 0;
  std::uint64_t total_length_ = 0;
  std::unordered_map<std::string, std::uint64_t> doc_freq_;
};

// BM25 over the distinct query tokens plus proximity_weight times the number
// of query bigrams found adjacent in the document, saturated like a term
// frequency.
inline double Bm25Proximity(const QueryKey& query, const std::vector<std::string>& doc, const CorpusStats& stats,
                            const Bm25Params& params = {}) {
  const auto q_views = QueryTokens(query);
  const std::vector<std::string> q(q_views.begin(), q_views.end());
  const double avg = stats.average_length() > 0.0 ? stats.average_length() : 1.0;
  const double norm = params.k1 * (1.0 - params.b + params.b * static_cast<double>(doc.size()) / avg);
  auto saturate = [&](double tf) { return tf * (params.k1 + 1.0) / (tf + norm); };

  double score = 0.0;
  for (const auto& t : std::set<std::string>(q.begin(), q.end())) {
    double tf = 0.0;
    for (const auto& d : doc) tf += d == t ? 1.0 : 0.0;
    if (tf > 0.0) score += stats.Idf(t) * saturate(tf);
  }
  double bigrams = 0.0;
  for (std::size_t i = 0; i + 1 < q.size(); ++i) {
    for (std::size_t j = 0; j + 1 < doc.size(); ++j) {
      if (doc[j] == q[i] && doc[j + 1] == q[i + 1]) bigrams += 1.0;
    }
  }
  if (bigrams > 0.0) score += params.proximity_weight * saturate(bigrams);
  return score;
}

}  // namespace prerank::eval
