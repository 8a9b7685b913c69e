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

#ifndef GUARDIAN_CFG_HPP_
#define GUARDIAN_CFG_HPP_

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guardian/error.hpp"
#include "guardian/trace.hpp"

namespace guardian {

// Tool-ordering graph learned from benign traces. An edge (a, b) exists iff
// b directly follows a in at least one sequence. start_tools are the tools
// observed at position 0.
struct Cfg {
  std::set<std::string> nodes;
  std::set<std::pair<std::string, std::string>> edges;
  std::set<std::string> start_tools;

  friend bool operator==(const Cfg&, const Cfg&) = default;
};

inline Cfg build_cfg(const std::vector<ExecutionSequence>& sequences) {
  if (sequences.empty()) throw Error("cannot build a flow graph from zero sequences");
  Cfg g;
  for (const ExecutionSequence& s : sequences) {
    const std::vector<std::string> tools = s.tool_names();
    for (std::size_t i = 0; i < tools.size(); ++i) {
      g.nodes.insert(tools[i]);
      if (i == 0) {
        g.start_tools.insert(tools[i]);
      } else {
        g.edges.emplace(tools[i - 1], tools[i]);
      }
    }
  }
  return g;
}

// Per-tool flow constraint: the collapsed prefixes after which the tool was
// observed, plus whether any single trace invoked it more than once.
struct ToolFlowSpec {
  std::string tool_name;
  bool repeat = false;
  std::set<std::vector<std::string>> required_leading_contexts;

  friend bool operator==(const ToolFlowSpec&, const ToolFlowSpec&) = default;
};

// Collects every collapsed leading context of `tool` across the corpus.
// A tool that starts a trace contributes the empty context. Throws if the
// tool never occurs.
inline ToolFlowSpec leading_contexts(
    const std::vector<ExecutionSequence>& sequences, const std::string& tool) {
  ToolFlowSpec spec;
  spec.tool_name = tool;
  bool seen = false;
  for (const ExecutionSequence& s : sequences) {
    const std::vector<std::string> tools = s.tool_names();
    int occurrences = 0;
    for (std::size_t i = 0; i < tools.size(); ++i) {
      if (tools[i] != tool) continue;
      seen = true;
      ++occurrences;
      spec.required_leading_contexts.insert(collapse_path(
          std::vector<std::string>(tools.begin(), tools.begin() + i)));
    }
    if (occurrences >= 2) spec.repeat = true;
  }
  if (!seen) throw Error("tool '" + tool + "' does not occur in any sequence");
  return spec;
}

// Path-mode check: the collapsed prior tool path must be one of the
// contexts the tool was learned in. Note the repetition consequence: a
// consecutive re-invocation of tool T with prior [T] is only allowed when
// [T] itself is a learned context, so tools never observed repeating are
// rejected on repetition even though collapse removes the duplicate from
// longer paths.
inline bool path_allowed(const ToolFlowSpec& spec,
                         const std::vector<std::string>& prior_tools) {
  return spec.required_leading_contexts.count(collapse_path(prior_tools)) > 0;
}

// Edge-mode check, a deliberate relaxation of path mode: only the previous
// tool (or start position) is consulted.
inline bool edge_allowed(const Cfg& g, const std::optional<std::string>& prev,
                         const std::string& tool) {
  if (!prev.has_value()) return g.start_tools.count(tool) > 0;
  return g.edges.count({*prev, tool}) > 0;
}

}  // namespace guardian

#endif  // GUARDIAN_CFG_HPP_
