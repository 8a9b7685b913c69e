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

#include "guardian/embed.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "guardian/hash.hpp"
#include "guardian/trace.hpp"

namespace guardian {
namespace {

using ::testing::HasSubstr;

// Oracle: FNV-1a written from the published decimal constants, with its own
// loop shape, to cross-check the library implementation.
std::uint64_t FnvOracle(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < s.size(); ++i) {
    h ^= static_cast<unsigned char>(s[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

// Oracle: reimplements the text block from its documented definition.
// Lowercase "prefix: text"; word tokens are maximal [a-z0-9_] runs; char
// trigrams cover the whole combined string; bucket = hash mod dims, sign
// from the top hash bit; L2-normalize at the end.
std::vector<double> HashBlockOracle(std::string prefix, std::string text,
                                    std::size_t dims) {
  std::vector<double> block(dims, 0.0);
  if (text.empty()) return block;
  for (char& c : prefix) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string combined = prefix + ": " + text;

  std::vector<std::string> features;
  std::string word;
  for (char c : combined) {
    bool wordy = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (wordy) {
      word.push_back(c);
    } else if (!word.empty()) {
      features.push_back(word);
      word.clear();
    }
  }
  if (!word.empty()) features.push_back(word);
  for (std::size_t i = 0; i + 3 <= combined.size(); ++i) {
    features.push_back(combined.substr(i, 3));
  }

  for (const std::string& f : features) {
    std::uint64_t h = FnvOracle(f);
    block[h % dims] += (h & 0x8000000000000000ULL) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double v : block) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : block) v /= norm;
  }
  return block;
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string RandomText(std::mt19937_64* rng) {
  static const std::string alphabet =
      "abcXYZ019_ ./-:~!{}\t"
      "qwert";
  std::string out;
  std::size_t len = (*rng)() % 24;
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(alphabet[(*rng)() % alphabet.size()]);
  }
  return out;
}

TraceEvent BaseEvent() {
  TraceEvent e;
  e.trace_id = "t";
  e.seq_index = 0;
  e.timestamp_ms = 27180000;  // 07:33:00 UTC
  e.agent_role = "r";
  e.thoughts = "find the report";
  e.tool_name = "read_file";
  e.tool_input = "./AI/ai-intro-2025.txt";
  e.task_result = "ok";
  e.input_tokens = 512;
  e.output_tokens = 256;
  e.idle_ms = 30000;
  e.processing_ms = 90000;
  return e;
}

TEST(Fnv, MatchesIndependentOracle) {
  EXPECT_EQ(fnv1a64(""), FnvOracle(""));
  EXPECT_EQ(fnv1a64("a"), FnvOracle("a"));
  EXPECT_EQ(fnv1a64("read_file"), FnvOracle("read_file"));
  // Pinned reference value for cross-toolchain reproducibility.
  EXPECT_EQ(fnv1a64("read_file"), 0xa216654b81c80068ULL);
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    std::string s = RandomText(&rng);
    EXPECT_EQ(fnv1a64(s), FnvOracle(s)) << s;
  }
}

TEST(Layout, BlocksTileTheVectorExactly) {
  EXPECT_EQ(kNumericDims, 6u);
  EXPECT_EQ(kThoughtsOffset, kNumericDims);
  EXPECT_EQ(kToolTypeOffset, kThoughtsOffset + kThoughtsDims);
  EXPECT_EQ(kToolInputOffset, kToolTypeOffset + kToolTypeDims);
  EXPECT_EQ(kTaskResultOffset, kToolInputOffset + kToolInputDims);
  EXPECT_EQ(kTaskResultOffset + kTaskResultDims, kFeatureDims);
  EXPECT_EQ(kFeatureDims, 150u);
  EXPECT_EQ(kThoughtsDims + kToolTypeDims + kToolInputDims + kTaskResultDims,
            144u);
}

TEST(Scaling, ClampsIntoUnitInterval) {
  EXPECT_DOUBLE_EQ(scale_numeric(0, 100), 0.0);
  EXPECT_DOUBLE_EQ(scale_numeric(50, 100), 0.5);
  EXPECT_DOUBLE_EQ(scale_numeric(100, 100), 1.0);
  EXPECT_DOUBLE_EQ(scale_numeric(250, 100), 1.0);
  EXPECT_DOUBLE_EQ(scale_numeric(-5, 100), 0.0);
}

TEST(Hours, FractionalHourHandlesOffsetsAndWrap) {
  // 07:33:00 into the day.
  EXPECT_DOUBLE_EQ(fractional_hour(27180000, 0), 7.55);
  EXPECT_EQ(hour_of_day(27180000, 0), 7);
  // Timezone shifts move the local hour.
  EXPECT_DOUBLE_EQ(fractional_hour(27180000, 60), 8.55);
  EXPECT_DOUBLE_EQ(fractional_hour(27180000, -8 * 60), 23.55);
  // Wraps across midnight and handles pre-epoch instants.
  EXPECT_DOUBLE_EQ(fractional_hour(86400000 + 3600000, 0), 1.0);
  EXPECT_DOUBLE_EQ(fractional_hour(-3600000, 0), 23.0);
  // Stays in [0, 24).
  std::mt19937_64 rng(43);
  for (int i = 0; i < 200; ++i) {
    std::int64_t ts = static_cast<std::int64_t>(rng() % (86400000LL * 400)) -
                      86400000LL * 200;
    double h = fractional_hour(ts, static_cast<int>(rng() % 1440) - 720);
    EXPECT_GE(h, 0.0);
    EXPECT_LT(h, 24.0);
  }
}

TEST(HashBlock, MatchesDocumentedOracleOnRandomInputs) {
  std::mt19937_64 rng(47);
  const std::vector<std::string> prefixes = {"INTENT", "ACTION", "PARAMETERS",
                                             "OUTCOME"};
  const std::vector<std::size_t> all_dims = {16, 32, 64};
  for (int i = 0; i < 300; ++i) {
    std::string prefix = prefixes[rng() % prefixes.size()];
    std::string text = RandomText(&rng);
    std::size_t dims = all_dims[rng() % all_dims.size()];
    EXPECT_EQ(hash_text_block(prefix, text, dims),
              HashBlockOracle(prefix, text, dims))
        << prefix << " / " << text;
  }
}

TEST(HashBlock, EmptyTextMapsToZeroAndNonEmptyToUnitNorm) {
  std::vector<double> zero = hash_text_block("INTENT", "", 32);
  for (double v : zero) EXPECT_DOUBLE_EQ(v, 0.0);

  std::mt19937_64 rng(53);
  for (int i = 0; i < 100; ++i) {
    std::string text = RandomText(&rng);
    if (text.empty()) continue;
    std::vector<double> block = hash_text_block("ACTION", text, 16);
    double norm = 0.0;
    for (double v : block) norm += v * v;
    // Signed counts can cancel to zero; otherwise the block is unit length.
    if (norm > 0.0) EXPECT_NEAR(norm, 1.0, 1e-9);
  }
  EXPECT_THROW(hash_text_block("ACTION", "x", 0), Error);
}

TEST(HashBlock, CaseInsensitiveAndPrefixSeparated) {
  EXPECT_EQ(hash_text_block("ACTION", "Read_File", 16),
            hash_text_block("action", "read_file", 16));
  // The same text under different prefixes hashes differently.
  EXPECT_NE(hash_text_block("ACTION", "read_file", 32),
            hash_text_block("INTENT", "read_file", 32));
}

TEST(HashBlock, SimilarStringsLandCloserThanUnrelatedOnes) {
  std::vector<double> a = hash_text_block("ACTION", "read_file", 16);
  std::vector<double> b = hash_text_block("ACTION", "read_files", 16);
  std::vector<double> c = hash_text_block("ACTION", "spawn_subprocess", 16);
  EXPECT_GT(Cosine(a, b), 0.5);
  EXPECT_GT(Cosine(a, b), Cosine(a, c));
}

TEST(EmbedEvent, PlacesEveryFieldInItsSlot) {
  TraceEvent e = BaseEvent();
  EmbedConfig cfg;
  FeatureVector fv = embed_event(e, cfg);

  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxInputTokens], 512.0 / 32768.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxOutputTokens], 256.0 / 32768.0);
  // Integer hour of 07:33 is 7; both hour slots carry 7/24.
  EXPECT_DOUBLE_EQ(fv.values[kSlotMinHour], 7.0 / 24.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxHour], 7.0 / 24.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxIdleTime], 30000.0 / 600000.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxProcessingTime], 90000.0 / 3600000.0);

  std::vector<double> thoughts =
      hash_text_block("INTENT", e.thoughts, kThoughtsDims);
  std::vector<double> tool = hash_text_block("ACTION", e.tool_name, kToolTypeDims);
  std::vector<double> input =
      hash_text_block("PARAMETERS", e.tool_input, kToolInputDims);
  std::vector<double> result =
      hash_text_block("OUTCOME", e.task_result, kTaskResultDims);
  for (std::size_t i = 0; i < kThoughtsDims; ++i) {
    EXPECT_DOUBLE_EQ(fv.values[kThoughtsOffset + i], thoughts[i]);
  }
  for (std::size_t i = 0; i < kToolTypeDims; ++i) {
    EXPECT_DOUBLE_EQ(fv.values[kToolTypeOffset + i], tool[i]);
  }
  for (std::size_t i = 0; i < kToolInputDims; ++i) {
    EXPECT_DOUBLE_EQ(fv.values[kToolInputOffset + i], input[i]);
  }
  for (std::size_t i = 0; i < kTaskResultDims; ++i) {
    EXPECT_DOUBLE_EQ(fv.values[kTaskResultOffset + i], result[i]);
  }
}

TEST(EmbedEvent, DeterministicAcrossCalls) {
  TraceEvent e = BaseEvent();
  EmbedConfig cfg;
  EXPECT_EQ(embed_event(e, cfg), embed_event(e, cfg));
}

TEST(EmbedEvent, EditingOneFieldPerturbsOnlyItsBlock) {
  TraceEvent e = BaseEvent();
  EmbedConfig cfg;
  FeatureVector before = embed_event(e, cfg);
  e.tool_input = "./Cars/specs.txt";
  FeatureVector after = embed_event(e, cfg);

  bool input_block_changed = false;
  for (std::size_t i = 0; i < kFeatureDims; ++i) {
    bool in_input_block =
        i >= kToolInputOffset && i < kToolInputOffset + kToolInputDims;
    if (in_input_block) {
      input_block_changed |= before.values[i] != after.values[i];
    } else {
      EXPECT_DOUBLE_EQ(before.values[i], after.values[i]) << "slot " << i;
    }
  }
  EXPECT_TRUE(input_block_changed);
}

TEST(EmbedEvent, CapsClampTokenAndTimeSlots) {
  TraceEvent e = BaseEvent();
  e.input_tokens = 10 * 32768;
  e.idle_ms = 2 * 600000;
  e.processing_ms = 2 * 3600000;
  EmbedConfig cfg;
  FeatureVector fv = embed_event(e, cfg);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxInputTokens], 1.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxIdleTime], 1.0);
  EXPECT_DOUBLE_EQ(fv.values[kSlotMaxProcessingTime], 1.0);
}

TEST(EmbedEvent, RejectsNonPositiveCaps) {
  TraceEvent e = BaseEvent();
  EmbedConfig cfg;
  cfg.token_cap = 0;
  try {
    embed_event(e, cfg);
    FAIL() << "expected guardian::Error";
  } catch (const Error& err) {
    EXPECT_THAT(std::string(err.what()),
                HasSubstr("embed caps must be positive"));
  }
}

}  // namespace
}  // namespace guardian
