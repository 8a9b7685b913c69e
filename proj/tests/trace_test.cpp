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

#include "guardian/trace.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace guardian {
namespace {

using ::testing::HasSubstr;

constexpr char kStagingFixture[] =
    GUARDIAN_DATA_DIR "/fixtures/staging_knowledge_assistant.jsonl";

// Oracle: collapse via std::unique, fully independent of collapse_path.
std::vector<std::string> CollapseOracle(std::vector<std::string> path) {
  path.erase(std::unique(path.begin(), path.end()), path.end());
  return path;
}

// Oracle: counts non-blank lines and distinct trace_id values by raw text
// scanning, never going through the JSON parser under test.
struct LogScan {
  int non_blank_lines = 0;
  std::set<std::string> trace_ids;
};

void ScanLogText(const std::string& text, LogScan* scan) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++scan->non_blank_lines;
    const std::string key = "\"trace_id\":\"";
    std::size_t at = line.find(key);
    ASSERT_NE(at, std::string::npos) << line;
    at += key.size();
    std::size_t end = line.find('"', at);
    ASSERT_NE(end, std::string::npos) << line;
    scan->trace_ids.insert(line.substr(at, end - at));
  }
}

TraceEvent MakeEvent(const std::string& trace_id, int seq, std::int64_t ts,
                     const std::string& tool,
                     const std::string& role = "researcher") {
  TraceEvent e;
  e.trace_id = trace_id;
  e.seq_index = seq;
  e.timestamp_ms = ts;
  e.agent_role = role;
  e.thoughts = "step " + std::to_string(seq);
  e.tool_name = tool;
  e.tool_input = "input for " + tool;
  e.task_result = "result " + std::to_string(seq);
  e.input_tokens = 100 + 10 * seq;
  e.output_tokens = 50 + 5 * seq;
  return e;
}

std::vector<TraceEvent> SmallCorpus() {
  return {
      MakeEvent("t-a", 0, 1000, "list_files"),
      MakeEvent("t-a", 1, 1500, "read_file"),
      MakeEvent("t-a", 2, 3000, "read_file"),
      MakeEvent("t-b", 0, 2000, "list_files"),
      MakeEvent("t-b", 1, 2600, "send_email"),
  };
}

// Runs `fn` and returns the Error message; fails the test if nothing threw.
template <typename Fn>
std::string ErrorOf(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected guardian::Error";
  return "";
}

TEST(TraceParse, RoundTripsThroughSerialize) {
  // Canonicalize timing first; serialize drops derived fields by design.
  std::vector<TraceEvent> canonical =
      parse_trace_log(serialize_trace_log(SmallCorpus()));
  std::string text = serialize_trace_log(canonical);
  EXPECT_EQ(parse_trace_log(text), canonical);
  // Idempotent: a second round trip emits identical bytes.
  EXPECT_EQ(serialize_trace_log(parse_trace_log(text)), text);
}

TEST(TraceParse, SerializeEmitsOneLinePerEvent) {
  std::vector<TraceEvent> events = SmallCorpus();
  std::string text = serialize_trace_log(events);
  LogScan scan;
  ScanLogText(text, &scan);
  EXPECT_EQ(scan.non_blank_lines, static_cast<int>(events.size()));
  EXPECT_EQ(scan.trace_ids, (std::set<std::string>{"t-a", "t-b"}));
}

TEST(TraceParse, SkipsBlankLinesAndIgnoresUnknownFields) {
  std::string text = serialize_trace_log(SmallCorpus());
  std::string padded = "\n  \t\n" + text + "\n\n";
  // Unknown fields ride along without affecting the result.
  padded +=
      R"({"trace_id":"t-c","seq_index":0,"timestamp_ms":5,"agent_role":"r",)"
      R"("thoughts":"","tool_name":"x","tool_input":"","task_result":"",)"
      R"("input_tokens":1,"output_tokens":1,"extra_field":[1,2,3]})"
      "\n";
  std::vector<TraceEvent> events = parse_trace_log(padded);
  EXPECT_EQ(events.size(), SmallCorpus().size() + 1);
  EXPECT_EQ(events.back().trace_id, "t-c");
}

TEST(TraceParse, RejectsMalformedRecordsWithLineNumbers) {
  std::string good = serialize_trace_log({MakeEvent("t", 0, 10, "a")});

  EXPECT_THAT(ErrorOf([&] { parse_trace_log(good + "[1,2,3]\n"); }),
              HasSubstr("line 2: record is not a JSON object"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(good + "not json\n"); }),
              HasSubstr("line 2: record is not a JSON object"));

  auto line_with = [&](const std::string& patch_field,
                       const std::string& patch_value) {
    nlohmann::json rec = nlohmann::json::parse(
        good.substr(0, good.find('\n')));
    if (patch_value == "\x01remove") {
      rec.erase(patch_field);
    } else {
      rec[patch_field] = nlohmann::json::parse(patch_value);
    }
    return rec.dump() + "\n";
  };

  EXPECT_THAT(
      ErrorOf([&] { parse_trace_log(line_with("trace_id", "\x01remove")); }),
      HasSubstr("line 1: field 'trace_id' is missing"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(line_with("trace_id", "7")); }),
              HasSubstr("field 'trace_id' must be a string"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(line_with("trace_id", "\"\"")); }),
              HasSubstr("field 'trace_id' must be non-empty"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(line_with("seq_index", "1.5")); }),
              HasSubstr("field 'seq_index' must be an integer"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(line_with("seq_index", "-1")); }),
              HasSubstr("field 'seq_index' must be non-negative"));
  EXPECT_THAT(
      ErrorOf([&] { parse_trace_log(line_with("input_tokens", "-3")); }),
      HasSubstr("field 'input_tokens' must be non-negative"));
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(line_with("thoughts", "null")); }),
              HasSubstr("field 'thoughts' must be a string"));

  // Empty thoughts/tool_input/task_result are fine; negative timestamps too.
  EXPECT_NO_THROW(parse_trace_log(line_with("thoughts", "\"\"")));
  EXPECT_NO_THROW(parse_trace_log(line_with("timestamp_ms", "-100")));
}

TEST(TraceParse, RejectsDuplicateTraceIdSeqIndexPairs) {
  std::vector<TraceEvent> events = {MakeEvent("t", 0, 10, "a"),
                                    MakeEvent("t", 0, 20, "b")};
  EXPECT_THAT(ErrorOf([&] { parse_trace_log(serialize_trace_log(events)); }),
              HasSubstr("line 2: duplicate (trace_id, seq_index) = ('t', 0)"));
}

TEST(TraceParse, RejectsDecreasingTimestampsWithinTrace) {
  std::vector<TraceEvent> events = {MakeEvent("t", 0, 500, "a"),
                                    MakeEvent("t", 1, 400, "b")};
  std::string msg =
      ErrorOf([&] { parse_trace_log(serialize_trace_log(events)); });
  EXPECT_THAT(msg, HasSubstr("line 2"));
  EXPECT_THAT(msg, HasSubstr("timestamp_ms decreases within trace 't'"));
}

TEST(TraceTiming, DerivesIdleAndProcessingFromTimestamps) {
  std::vector<TraceEvent> events =
      parse_trace_log(serialize_trace_log(SmallCorpus()));
  // t-a: timestamps 1000, 1500, 3000.
  EXPECT_EQ(events[0].idle_ms, 0);
  EXPECT_EQ(events[0].processing_ms, 0);
  EXPECT_EQ(events[1].idle_ms, 500);
  EXPECT_EQ(events[1].processing_ms, 500);
  EXPECT_EQ(events[2].idle_ms, 1500);
  EXPECT_EQ(events[2].processing_ms, 2000);
  // t-b starts its own clock.
  EXPECT_EQ(events[3].idle_ms, 0);
  EXPECT_EQ(events[4].idle_ms, 600);
  EXPECT_EQ(events[4].processing_ms, 600);
}

TEST(TraceTiming, IdleNeverExceedsProcessing) {
  std::mt19937_64 rng(11);
  std::vector<TraceEvent> events;
  for (int t = 0; t < 20; ++t) {
    std::int64_t ts = 1000 * t;
    int steps = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < steps; ++s) {
      ts += static_cast<std::int64_t>(rng() % 500);
      events.push_back(MakeEvent("t" + std::to_string(t), s, ts, "tool"));
    }
  }
  for (const ExecutionSequence& seq : assemble_sequences(events)) {
    for (std::size_t i = 1; i < seq.events.size(); ++i) {
      EXPECT_LE(seq.events[i].idle_ms, seq.events[i].processing_ms);
      EXPECT_GE(seq.events[i].idle_ms, 0);
    }
  }
}

TEST(TraceAssemble, GroupsSortsAndPreservesEveryEvent) {
  std::vector<TraceEvent> canonical =
      parse_trace_log(serialize_trace_log(SmallCorpus()));
  std::vector<TraceEvent> shuffled = canonical;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));

  std::vector<ExecutionSequence> sequences = assemble_sequences(shuffled);
  ASSERT_EQ(sequences.size(), 2u);
  EXPECT_EQ(sequences[0].trace_id, "t-a");
  EXPECT_EQ(sequences[1].trace_id, "t-b");
  EXPECT_EQ(sequences[0].tool_names(),
            (std::vector<std::string>{"list_files", "read_file", "read_file"}));

  // Multiset preservation: flattening gives back exactly the parsed events.
  std::vector<TraceEvent> flattened;
  for (const ExecutionSequence& s : sequences) {
    flattened.insert(flattened.end(), s.events.begin(), s.events.end());
  }
  auto by_id_seq = [](const TraceEvent& a, const TraceEvent& b) {
    return std::tie(a.trace_id, a.seq_index) < std::tie(b.trace_id, b.seq_index);
  };
  std::sort(canonical.begin(), canonical.end(), by_id_seq);
  std::sort(flattened.begin(), flattened.end(), by_id_seq);
  EXPECT_EQ(flattened, canonical);
}

TEST(TraceAssemble, RejectsGapsDuplicatesAndMixedRoles) {
  EXPECT_THAT(ErrorOf([] {
                assemble_sequences({MakeEvent("t", 0, 10, "a"),
                                    MakeEvent("t", 2, 20, "b")});
              }),
              HasSubstr("trace 't': seq_index gap, expected 1 but found 2"));
  EXPECT_THAT(ErrorOf([] {
                assemble_sequences({MakeEvent("t", 1, 10, "a")});
              }),
              HasSubstr("expected 0 but found 1"));
  EXPECT_THAT(ErrorOf([] {
                assemble_sequences({MakeEvent("t", 0, 10, "a"),
                                    MakeEvent("t", 0, 20, "b")});
              }),
              HasSubstr("trace 't': duplicate seq_index 0"));
  EXPECT_THAT(ErrorOf([] {
                assemble_sequences({MakeEvent("t", 0, 10, "a", "role1"),
                                    MakeEvent("t", 1, 20, "b", "role2")});
              }),
              HasSubstr("mixed agent_role ('role1' vs 'role2')"));
}

TEST(TraceCollapse, RemovesConsecutiveDuplicatesOnly) {
  EXPECT_EQ(collapse_path({}), (std::vector<std::string>{}));
  EXPECT_EQ(collapse_path({"a"}), (std::vector<std::string>{"a"}));
  EXPECT_EQ(collapse_path({"a", "a", "a"}), (std::vector<std::string>{"a"}));
  EXPECT_EQ(collapse_path({"a", "b", "b", "a"}),
            (std::vector<std::string>{"a", "b", "a"}));
}

TEST(TraceCollapse, AgreesWithStdUniqueOnRandomPaths) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> tools = {"a", "b", "c"};
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> path;
    std::size_t len = rng() % 10;
    for (std::size_t k = 0; k < len; ++k) path.push_back(tools[rng() % 3]);
    EXPECT_EQ(collapse_path(path), CollapseOracle(path));
  }
}

TEST(TraceFilterRare, MatchesHistogramOracle) {
  std::mt19937_64 rng(19);
  std::vector<std::vector<std::string>> shapes = {
      {"a", "b"}, {"a", "b", "c"}, {"a", "a", "b"}, {"x"}};
  std::vector<ExecutionSequence> sequences;
  for (int i = 0; i < 40; ++i) {
    const std::vector<std::string>& shape = shapes[rng() % shapes.size()];
    ExecutionSequence seq;
    seq.trace_id = "t" + std::to_string(i);
    seq.agent_role = "r";
    std::int64_t ts = 0;
    for (std::size_t s = 0; s < shape.size(); ++s) {
      seq.events.push_back(
          MakeEvent(seq.trace_id, static_cast<int>(s), ts += 100, shape[s]));
    }
    sequences.push_back(std::move(seq));
  }

  // Oracle: histogram over std::unique-collapsed paths.
  std::map<std::vector<std::string>, int> histogram;
  for (const ExecutionSequence& s : sequences) {
    ++histogram[CollapseOracle(s.tool_names())];
  }
  for (int min_freq = 1; min_freq <= 25; min_freq += 6) {
    RareFilterResult result = filter_rare(sequences, min_freq);
    std::vector<ExecutionSequence> expect_kept, expect_flagged;
    for (const ExecutionSequence& s : sequences) {
      if (histogram[CollapseOracle(s.tool_names())] < min_freq) {
        expect_flagged.push_back(s);
      } else {
        expect_kept.push_back(s);
      }
    }
    EXPECT_EQ(result.kept, expect_kept) << "min_freq " << min_freq;
    EXPECT_EQ(result.flagged, expect_flagged) << "min_freq " << min_freq;
  }
  EXPECT_EQ(filter_rare(sequences, 1).flagged.size(), 0u);
  EXPECT_THAT(ErrorOf([&] { filter_rare(sequences, 0); }),
              HasSubstr("min_frequency must be >= 1"));
}

TEST(TraceFilterRare, NoteAndShortcutPathsAreTheOnlyRareOnesInFixture) {
  std::vector<TraceEvent> events = parse_trace_file(kStagingFixture);
  std::vector<ExecutionSequence> sequences = assemble_sequences(events);
  RareFilterResult result = filter_rare(sequences, 3);
  ASSERT_EQ(result.flagged.size(), 2u);
  std::set<std::string> flagged_ids = {result.flagged[0].trace_id,
                                       result.flagged[1].trace_id};
  EXPECT_EQ(flagged_ids, (std::set<std::string>{"ka-staging-recheck-001",
                                                "ka-staging-shortcut-001"}));
  EXPECT_EQ(result.kept.size() + result.flagged.size(), sequences.size());
}

TEST(TraceFixture, StagingCorpusMatchesRawTextScan) {
  std::ifstream in(kStagingFixture);
  ASSERT_TRUE(in) << kStagingFixture;
  std::stringstream buffer;
  buffer << in.rdbuf();
  LogScan scan;
  ScanLogText(buffer.str(), &scan);

  std::vector<TraceEvent> events = parse_trace_log(buffer.str());
  EXPECT_EQ(static_cast<int>(events.size()), scan.non_blank_lines);

  std::vector<ExecutionSequence> sequences = assemble_sequences(events);
  EXPECT_EQ(sequences.size(), scan.trace_ids.size());
  EXPECT_EQ(sequences.size(), 60u);
  for (const ExecutionSequence& seq : sequences) {
    EXPECT_EQ(seq.agent_role, "Senior Data Researcher");
    for (std::size_t i = 1; i < seq.events.size(); ++i) {
      EXPECT_LE(seq.events[i].idle_ms, seq.events[i].processing_ms);
    }
  }
}

TEST(TraceToolCatalog, ContainsExactlyTheToolsSeen) {
  std::vector<ExecutionSequence> sequences =
      assemble_sequences(SmallCorpus());
  ToolCatalog catalog = ToolCatalog::from_sequences(sequences);
  EXPECT_EQ(catalog.tools(),
            (std::set<std::string>{"list_files", "read_file", "send_email"}));
  EXPECT_TRUE(catalog.contains("read_file"));
  EXPECT_FALSE(catalog.contains("delete_file"));
}

}  // namespace
}  // namespace guardian
