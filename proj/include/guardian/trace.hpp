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

#ifndef GUARDIAN_TRACE_HPP_
#define GUARDIAN_TRACE_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "guardian/error.hpp"

namespace guardian {

// One tool invocation as observed in an agent execution trace.
//
// The first ten fields are the external log schema. idle_ms and
// processing_ms are derived: they are always recomputed from timestamps
// (idle = gap to the previous event in the trace, processing = elapsed time
// since the first event), and any values stored in a log are ignored.
struct TraceEvent {
  std::string trace_id;
  int seq_index = 0;
  std::int64_t timestamp_ms = 0;
  std::string agent_role;
  std::string thoughts;
  std::string tool_name;
  std::string tool_input;
  std::string task_result;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;

  std::int64_t idle_ms = 0;
  std::int64_t processing_ms = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// A complete trace: the events of one trace_id in seq_index order, all
// sharing one agent_role.
struct ExecutionSequence {
  std::string trace_id;
  std::string agent_role;
  std::vector<TraceEvent> events;

  friend bool operator==(const ExecutionSequence&,
                         const ExecutionSequence&) = default;

  std::vector<std::string> tool_names() const {
    std::vector<std::string> out;
    out.reserve(events.size());
    for (const TraceEvent& e : events) out.push_back(e.tool_name);
    return out;
  }
};

namespace internal {

// Recomputes idle_ms/processing_ms for every event, grouping by trace_id
// and walking each trace in seq_index order. Throws if timestamps decrease
// along a trace; `line_of` maps an event's index in `events` to the input
// line used in error messages (may be null for in-memory callers).
inline void recompute_timing(std::vector<TraceEvent>& events,
                             const std::vector<int>* line_of = nullptr) {
  std::map<std::string, std::vector<std::size_t>> by_trace;
  for (std::size_t i = 0; i < events.size(); ++i) {
    by_trace[events[i].trace_id].push_back(i);
  }
  for (auto& [trace_id, idxs] : by_trace) {
    std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      return events[a].seq_index < events[b].seq_index;
    });
    std::int64_t first_ts = 0;
    std::int64_t prev_ts = 0;
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      TraceEvent& e = events[idxs[k]];
      if (k == 0) {
        first_ts = e.timestamp_ms;
        e.idle_ms = 0;
        e.processing_ms = 0;
      } else {
        if (e.timestamp_ms < prev_ts) {
          std::string where =
              line_of ? "line " + std::to_string((*line_of)[idxs[k]]) + ": "
                      : "";
          throw Error(where + "timestamp_ms decreases within trace '" +
                      trace_id + "'");
        }
        e.idle_ms = e.timestamp_ms - prev_ts;
        e.processing_ms = e.timestamp_ms - first_ts;
      }
      prev_ts = e.timestamp_ms;
    }
  }
}

}  // namespace internal

// Parses a newline-delimited JSON trace log. Returns events in file order
// with derived timing recomputed. Unknown fields are ignored. Errors name
// the offending line and field. Duplicate (trace_id, seq_index) pairs are
// an error.
inline std::vector<TraceEvent> parse_trace_log(std::istream& in) {
  using nlohmann::json;
  std::vector<TraceEvent> events;
  std::vector<int> lines;
  std::set<std::pair<std::string, int>> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw Error("line " + std::to_string(line_no) +
                  ": record is not a JSON object");
    }
    auto fail = [line_no](const std::string& field, const std::string& why) {
      throw Error("line " + std::to_string(line_no) + ": field '" + field +
                  "' " + why);
    };
    auto get_string = [&](const char* field, bool allow_empty) {
      if (!rec.contains(field)) fail(field, "is missing");
      if (!rec[field].is_string()) fail(field, "must be a string");
      std::string v = rec[field].get<std::string>();
      if (!allow_empty && v.empty()) fail(field, "must be non-empty");
      return v;
    };
    auto get_int = [&](const char* field, bool non_negative) {
      if (!rec.contains(field)) fail(field, "is missing");
      if (!rec[field].is_number_integer())
        fail(field, "must be an integer");
      std::int64_t v = rec[field].get<std::int64_t>();
      if (non_negative && v < 0) fail(field, "must be non-negative");
      return v;
    };

    TraceEvent e;
    e.trace_id = get_string("trace_id", false);
    e.seq_index = static_cast<int>(get_int("seq_index", true));
    e.timestamp_ms = get_int("timestamp_ms", false);
    e.agent_role = get_string("agent_role", false);
    e.thoughts = get_string("thoughts", true);
    e.tool_name = get_string("tool_name", false);
    e.tool_input = get_string("tool_input", true);
    e.task_result = get_string("task_result", true);
    e.input_tokens = get_int("input_tokens", true);
    e.output_tokens = get_int("output_tokens", true);

    if (!seen.emplace(e.trace_id, e.seq_index).second) {
      throw Error("line " + std::to_string(line_no) +
                  ": duplicate (trace_id, seq_index) = ('" + e.trace_id +
                  "', " + std::to_string(e.seq_index) + ")");
    }
    events.push_back(std::move(e));
    lines.push_back(line_no);
  }
  internal::recompute_timing(events, &lines);
  return events;
}

inline std::vector<TraceEvent> parse_trace_log(const std::string& text) {
  std::istringstream in(text);
  return parse_trace_log(in);
}

inline std::vector<TraceEvent> parse_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace log '" + path + "'");
  return parse_trace_log(in);
}

// Writes the ten external fields, one JSON object per line, keys sorted.
// Derived timing is intentionally not written; parse recomputes it, so
// parse(serialize(events)) round-trips events whose timing is consistent.
inline std::string serialize_trace_log(const std::vector<TraceEvent>& events) {
  using nlohmann::json;
  std::string out;
  for (const TraceEvent& e : events) {
    json rec{{"trace_id", e.trace_id},
             {"seq_index", e.seq_index},
             {"timestamp_ms", e.timestamp_ms},
             {"agent_role", e.agent_role},
             {"thoughts", e.thoughts},
             {"tool_name", e.tool_name},
             {"tool_input", e.tool_input},
             {"task_result", e.task_result},
             {"input_tokens", e.input_tokens},
             {"output_tokens", e.output_tokens}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

// Groups events into sequences. Requires seq_index to be contiguous from 0
// within each trace and agent_role to be constant per trace; either failure
// names the trace. Derived timing is recomputed so hand-built events come
// out consistent. Result is sorted by trace_id.
inline std::vector<ExecutionSequence> assemble_sequences(
    std::vector<TraceEvent> events) {
  internal::recompute_timing(events);
  std::map<std::string, std::vector<TraceEvent>> by_trace;
  for (TraceEvent& e : events) {
    by_trace[e.trace_id].push_back(std::move(e));
  }
  std::vector<ExecutionSequence> out;
  out.reserve(by_trace.size());
  for (auto& [trace_id, group] : by_trace) {
    std::sort(group.begin(), group.end(),
              [](const TraceEvent& a, const TraceEvent& b) {
                return a.seq_index < b.seq_index;
              });
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].seq_index != static_cast<int>(i)) {
        if (i > 0 && group[i].seq_index == group[i - 1].seq_index) {
          throw Error("trace '" + trace_id +
                      "': duplicate seq_index " +
                      std::to_string(group[i].seq_index));
        }
        throw Error("trace '" + trace_id + "': seq_index gap, expected " +
                    std::to_string(i) + " but found " +
                    std::to_string(group[i].seq_index));
      }
      if (group[i].agent_role != group[0].agent_role) {
        throw Error("trace '" + trace_id + "': mixed agent_role ('" +
                    group[0].agent_role + "' vs '" + group[i].agent_role +
                    "')");
      }
    }
    ExecutionSequence seq;
    seq.trace_id = trace_id;
    seq.agent_role = group[0].agent_role;
    seq.events = std::move(group);
    out.push_back(std::move(seq));
  }
  return out;
}

// Collapses consecutive duplicates: [a, a, b, a] -> [a, b, a].
inline std::vector<std::string> collapse_path(
    const std::vector<std::string>& path) {
  std::vector<std::string> out;
  for (const std::string& t : path) {
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  return out;
}

struct RareFilterResult {
  std::vector<ExecutionSequence> kept;
  // Sequences whose collapsed tool path occurs fewer than min_frequency
  // times in the corpus. Reported, never silently dropped.
  std::vector<ExecutionSequence> flagged;
};

// Partitions sequences by how often their collapsed tool path occurs.
// min_frequency == 1 keeps everything.
inline RareFilterResult filter_rare(
    const std::vector<ExecutionSequence>& sequences, int min_frequency) {
  if (min_frequency < 1) throw Error("min_frequency must be >= 1");
  auto key_of = [](const ExecutionSequence& s) {
    std::string key;
    for (const std::string& t : collapse_path(s.tool_names())) {
      key += t;
      key += '\n';
    }
    return key;
  };
  std::map<std::string, int> counts;
  for (const ExecutionSequence& s : sequences) ++counts[key_of(s)];
  RareFilterResult result;
  for (const ExecutionSequence& s : sequences) {
    if (counts[key_of(s)] < min_frequency) {
      result.flagged.push_back(s);
    } else {
      result.kept.push_back(s);
    }
  }
  return result;
}

// The set of tool names seen in a corpus.
class ToolCatalog {
 public:
  ToolCatalog() = default;

  static ToolCatalog from_sequences(
      const std::vector<ExecutionSequence>& sequences) {
    ToolCatalog c;
    for (const ExecutionSequence& s : sequences) {
      for (const TraceEvent& e : s.events) c.tools_.insert(e.tool_name);
    }
    return c;
  }

  bool contains(const std::string& tool) const {
    return tools_.count(tool) > 0;
  }
  const std::set<std::string>& tools() const { return tools_; }

 private:
  std::set<std::string> tools_;
};

}  // namespace guardian

#endif  // GUARDIAN_TRACE_HPP_
