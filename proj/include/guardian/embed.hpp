// Copyright 2026 The Guardian Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GUARDIAN_EMBED_HPP_
#define GUARDIAN_EMBED_HPP_

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "guardian/error.hpp"
#include "guardian/hash.hpp"
#include "guardian/trace.hpp"

namespace guardian {

// Fixed 150-dimension feature layout. Indices 0..5 are scaled numeric
// attributes; the rest are four hashed text blocks.
inline constexpr std::size_t kFeatureDims = 150;
inline constexpr std::size_t kNumericDims = 6;
inline constexpr std::size_t kThoughtsOffset = 6;
inline constexpr std::size_t kThoughtsDims = 32;
inline constexpr std::size_t kToolTypeOffset = 38;
inline constexpr std::size_t kToolTypeDims = 16;
inline constexpr std::size_t kToolInputOffset = 54;
inline constexpr std::size_t kToolInputDims = 64;
inline constexpr std::size_t kTaskResultOffset = 118;
inline constexpr std::size_t kTaskResultDims = 32;

// Numeric slot order.
enum NumericSlot : std::size_t {
  kSlotMaxInputTokens = 0,
  kSlotMaxOutputTokens = 1,
  kSlotMinHour = 2,
  kSlotMaxHour = 3,
  kSlotMaxIdleTime = 4,
  kSlotMaxProcessingTime = 5,
};

struct FeatureVector {
  std::array<double, kFeatureDims> values{};

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct EmbedConfig {
  std::int64_t token_cap = 32768;
  std::int64_t idle_cap_ms = 600000;
  std::int64_t processing_cap_ms = 3600000;
  int timezone_offset_minutes = 0;

  void validate() const {
    if (token_cap <= 0 || idle_cap_ms <= 0 || processing_cap_ms <= 0) {
      throw Error("embed caps must be positive");
    }
  }

  friend bool operator==(const EmbedConfig&, const EmbedConfig&) = default;
};

inline double scale_numeric(double value, double cap) {
  double v = value / cap;
  if (v < 0.0) return 0.0;
  if (v > 1.0) return 1.0;
  return v;
}

// Hour of day with fractional minutes/seconds, in local time per the
// configured UTC offset. 07:33:00 -> 7.55.
inline double fractional_hour(std::int64_t timestamp_ms,
                              int timezone_offset_minutes) {
  std::int64_t local = timestamp_ms + std::int64_t{timezone_offset_minutes} * 60000;
  std::int64_t day_ms = 86400000;
  std::int64_t in_day = ((local % day_ms) + day_ms) % day_ms;
  return static_cast<double>(in_day) / 3600000.0;
}

inline int hour_of_day(std::int64_t timestamp_ms, int timezone_offset_minutes) {
  return static_cast<int>(fractional_hour(timestamp_ms, timezone_offset_minutes));
}

// Deterministic feature-hashing embedding of one prefixed text field.
// "PREFIX: text" is lowercased; features are word tokens (runs of [a-z0-9_])
// plus character trigrams of the full string; each feature lands in bucket
// fnv1a64(f) mod dims with sign from hash bit 63; the result is
// L2-normalized. Empty text maps to the all-zero block.
inline std::vector<double> hash_text_block(std::string_view prefix,
                                           std::string_view text,
                                           std::size_t dims) {
  if (dims < 1) throw Error("hash_text_block dims must be >= 1");
  std::vector<double> block(dims, 0.0);
  if (text.empty()) return block;

  std::string combined;
  combined.reserve(prefix.size() + 2 + text.size());
  for (char c : prefix) combined.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  combined += ": ";
  for (char c : text) combined.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  auto add_feature = [&](std::string_view f) {
    std::uint64_t h = fnv1a64(f);
    std::size_t bucket = static_cast<std::size_t>(h % dims);
    double sign = (h >> 63) ? -1.0 : 1.0;
    block[bucket] += sign;
  };

  auto is_word_char = [](char c) {
    unsigned char uc = static_cast<unsigned char>(c);
    return std::isalnum(uc) || c == '_';
  };
  std::size_t i = 0;
  while (i < combined.size()) {
    if (!is_word_char(combined[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < combined.size() && is_word_char(combined[j])) ++j;
    add_feature(std::string_view(combined).substr(i, j - i));
    i = j;
  }
  for (std::size_t k = 0; k + 3 <= combined.size(); ++k) {
    add_feature(std::string_view(combined).substr(k, 3));
  }

  double norm_sq = 0.0;
  for (double v : block) norm_sq += v * v;
  if (norm_sq > 0.0) {
    double norm = std::sqrt(norm_sq);
    for (double& v : block) v /= norm;
  }
  return block;
}

inline void write_block(FeatureVector& fv, std::size_t offset,
                        const std::vector<double>& block) {
  for (std::size_t i = 0; i < block.size(); ++i) fv.values[offset + i] = block[i];
}

inline FeatureVector embed_event(const TraceEvent& event,
                                 const EmbedConfig& config) {
  config.validate();
  FeatureVector fv;
  fv.values[kSlotMaxInputTokens] =
      scale_numeric(static_cast<double>(event.input_tokens),
                    static_cast<double>(config.token_cap));
  fv.values[kSlotMaxOutputTokens] =
      scale_numeric(static_cast<double>(event.output_tokens),
                    static_cast<double>(config.token_cap));
  // A single event contributes a degenerate hour window: both hour slots
  // carry the event's (integer) local hour scaled by 24.
  double hour = static_cast<double>(
      hour_of_day(event.timestamp_ms, config.timezone_offset_minutes));
  fv.values[kSlotMinHour] = hour / 24.0;
  fv.values[kSlotMaxHour] = hour / 24.0;
  fv.values[kSlotMaxIdleTime] =
      scale_numeric(static_cast<double>(event.idle_ms),
                    static_cast<double>(config.idle_cap_ms));
  fv.values[kSlotMaxProcessingTime] =
      scale_numeric(static_cast<double>(event.processing_ms),
                    static_cast<double>(config.processing_cap_ms));

  write_block(fv, kThoughtsOffset,
              hash_text_block("INTENT", event.thoughts, kThoughtsDims));
  write_block(fv, kToolTypeOffset,
              hash_text_block("ACTION", event.tool_name, kToolTypeDims));
  write_block(fv, kToolInputOffset,
              hash_text_block("PARAMETERS", event.tool_input, kToolInputDims));
  write_block(fv, kTaskResultOffset,
              hash_text_block("OUTCOME", event.task_result, kTaskResultDims));
  return fv;
}

}  // namespace guardian

#endif  // GUARDIAN_EMBED_HPP_
