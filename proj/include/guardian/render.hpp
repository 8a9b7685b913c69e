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

// Human-readable policy and verdict dumps for the `inspect` subcommand.
// Attribute constraints live per cluster rule; the dump additionally shows a
// policy-scope envelope (the union of the per-rule ranges) and flags when the
// rules actually disagree, so a reader is not misled into thinking the
// envelope is what gets enforced.

#ifndef GUARDIAN_RENDER_HPP_
#define GUARDIAN_RENDER_HPP_

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "guardian/cfg.hpp"
#include "guardian/enforce.hpp"
#include "guardian/policy.hpp"
#include "guardian/rules.hpp"

namespace guardian {

// Fractional hour to wall-clock "HH:MM", rounding to the nearest minute.
inline std::string format_hour(double fractional_hour) {
  long long total = std::llround(fractional_hour * 60.0);
  if (total < 0) total = 0;
  long long hh = total / 60;
  long long mm = total % 60;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld", hh, mm);
  return buf;
}

// One leading-context path, each step prefixed by a double dash. The empty
// context (tool may start the trace) renders as "-- (start)".
inline std::string format_context_path(const std::vector<std::string>& path) {
  if (path.empty()) return "-- (start)";
  std::string out;
  for (const std::string& step : path) {
    if (!out.empty()) out += " ";
    out += "-- " + step;
  }
  return out;
}

namespace internal {

inline std::string format_value(std::size_t attr, double v) {
  if (attr == 2 || attr == 3) return format_hour(v);
  std::ostringstream os;
  os << v;
  return os.str();
}

inline std::string format_interval(std::size_t attr, const Interval& iv) {
  return "[" + format_value(attr, iv.min_value) + ", " +
         format_value(attr, iv.max_value) + "]";
}

}  // namespace internal

// Per-attribute union of the per-rule intervals.
inline std::array<Interval, 6> policy_envelope(
    const AccessControlPolicy& policy) {
  std::array<Interval, 6> env;
  for (std::size_t a = 0; a < env.size(); ++a) {
    env[a].min_value = std::numeric_limits<double>::infinity();
    env[a].max_value = -std::numeric_limits<double>::infinity();
    for (const ClusterRule& rule : policy.rules) {
      env[a].min_value = std::min(env[a].min_value, rule.attribute[a].min_value);
      env[a].max_value = std::max(env[a].max_value, rule.attribute[a].max_value);
    }
  }
  return env;
}

inline std::string render_policy(const AccessControlPolicy& policy) {
  std::ostringstream os;
  os << "policy " << policy.rule_id << "\n";
  os << "  agent_role: " << policy.agent_role << "\n";
  os << "  tool_name: " << policy.tool_name << "\n";
  os << "  source_trace_count: " << policy.source_trace_count << "\n";

  std::array<Interval, 6> env = policy_envelope(policy);
  bool uniform = true;
  for (const ClusterRule& rule : policy.rules) {
    for (std::size_t a = 0; a < env.size(); ++a) {
      if (rule.attribute[a].min_value != env[a].min_value ||
          rule.attribute[a].max_value != env[a].max_value) {
        uniform = false;
      }
    }
  }
  os << "  attribute_envelope:";
  if (!uniform) {
    os << "  (display only: rules below differ, enforcement is per rule)";
  }
  os << "\n";
  for (std::size_t a = 0; a < env.size(); ++a) {
    os << "    " << kAttributeNames[a] << ": "
       << internal::format_interval(a, env[a]) << "\n";
  }

  for (const ClusterRule& rule : policy.rules) {
    os << "  rule " << rule.rule_index << " (support " << rule.support
       << "):\n";
    os << "    input_patterns:\n";
    for (const std::string& p : rule.textual.patterns()) {
      os << "      " << p << "\n";
    }
    os << "    attribute_constraints:\n";
    for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
      os << "      " << kAttributeNames[a] << ": "
         << internal::format_interval(a, rule.attribute[a]) << "\n";
    }
  }

  os << "  flow:\n";
  os << "    repeat: " << (policy.flow.repeat ? "true" : "false") << "\n";
  os << "    required_leading_contexts:\n";
  for (const std::vector<std::string>& path :
       policy.flow.required_leading_contexts) {
    os << "      " << format_context_path(path) << "\n";
  }
  return os.str();
}

inline std::string render_verdict(const Verdict& verdict) {
  std::ostringstream os;
  os << "decision: " << to_string(verdict.decision) << "\n";
  for (const Violation& v : verdict.violations) {
    os << "violation: " << to_string(v.kind);
    if (v.rule_index.has_value()) os << " (rule " << *v.rule_index << ")";
    os << ": " << v.detail << "\n";
  }
  return os.str();
}

}  // namespace guardian

#endif  // GUARDIAN_RENDER_HPP_
