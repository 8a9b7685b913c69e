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

#ifndef GUARDIAN_ENFORCE_HPP_
#define GUARDIAN_ENFORCE_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "guardian/cfg.hpp"
#include "guardian/embed.hpp"
#include "guardian/error.hpp"
#include "guardian/policy.hpp"
#include "guardian/rules.hpp"

namespace guardian {

// One tool invocation to judge. prior_tools excludes the invocation itself.
struct InvocationContext {
  std::string agent_role;
  std::string tool_name;
  std::string tool_input;
  std::string thoughts;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t timestamp_ms = 0;
  std::int64_t idle_ms = 0;
  std::int64_t processing_ms = 0;
  std::vector<std::string> prior_tools;
};

enum class Decision { kAllow, kAlert, kTerminate };
enum class Severity { kAdvisory, kAlert, kTerminate };
enum class ViolationKind {
  kFlow,
  kInputPattern,
  kAttribute,
  kUnknownTool,
  kNoPolicy,
};

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::kAllow: return "allow";
    case Decision::kAlert: return "alert";
    case Decision::kTerminate: return "terminate";
  }
  return "?";
}

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::kAdvisory: return "advisory";
    case Severity::kAlert: return "alert";
    case Severity::kTerminate: return "terminate";
  }
  return "?";
}

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kFlow: return "flow";
    case ViolationKind::kInputPattern: return "input_pattern";
    case ViolationKind::kAttribute: return "attribute";
    case ViolationKind::kUnknownTool: return "unknown_tool";
    case ViolationKind::kNoPolicy: return "no_policy";
  }
  return "?";
}

inline std::optional<ViolationKind> violation_kind_from_string(
    const std::string& s) {
  if (s == "flow") return ViolationKind::kFlow;
  if (s == "input_pattern") return ViolationKind::kInputPattern;
  if (s == "attribute") return ViolationKind::kAttribute;
  if (s == "unknown_tool") return ViolationKind::kUnknownTool;
  if (s == "no_policy") return ViolationKind::kNoPolicy;
  return std::nullopt;
}

struct Violation {
  ViolationKind kind = ViolationKind::kFlow;
  std::string detail;
  std::optional<int> rule_index;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// decision == kAllow iff violations is empty or every violation's kind is
// configured advisory.
struct Verdict {
  Decision decision = Decision::kAllow;
  std::vector<Violation> violations;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct EnforceConfig {
  // Non-time interval bounds stretch to [min/factor (floored at 0),
  // max * factor].
  double attribute_slack_factor = 2.0;
  // Hour-window bounds are applied exactly; deviations of any magnitude are
  // violations.
  bool time_constraints_exempt_from_slack = true;
  std::map<ViolationKind, Severity> severity = {
      {ViolationKind::kFlow, Severity::kTerminate},
      {ViolationKind::kInputPattern, Severity::kTerminate},
      {ViolationKind::kAttribute, Severity::kAlert},
      {ViolationKind::kUnknownTool, Severity::kTerminate},
      {ViolationKind::kNoPolicy, Severity::kTerminate},
  };

  void validate() const {
    if (attribute_slack_factor < 1.0) {
      throw Error("attribute_slack_factor must be >= 1");
    }
  }

  Severity severity_of(ViolationKind kind) const {
    auto it = severity.find(kind);
    return it == severity.end() ? Severity::kTerminate : it->second;
  }
};

inline bool check_input(const std::string& tool_input,
                        const TextualPredicate& predicate) {
  return predicate.matches(tool_input);
}

inline std::array<double, 6> attribute_values(const InvocationContext& ctx,
                                              const EmbedConfig& embed_cfg) {
  double hour =
      fractional_hour(ctx.timestamp_ms, embed_cfg.timezone_offset_minutes);
  return {static_cast<double>(ctx.input_tokens),
          static_cast<double>(ctx.output_tokens),
          hour,
          hour,
          static_cast<double>(ctx.idle_ms),
          static_cast<double>(ctx.processing_ms)};
}

namespace internal {

inline std::string format_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace internal

// Attribute check with the twofold tolerance: each attribute outside its
// (possibly slack-widened) interval yields one violation. min_hour/max_hour
// are the exempt time constraints under the default config.
inline std::vector<Violation> check_attributes(const InvocationContext& ctx,
                                               const ClusterRule& rule,
                                               const EnforceConfig& cfg,
                                               const EmbedConfig& embed_cfg) {
  cfg.validate();
  std::vector<Violation> out;
  std::array<double, 6> values = attribute_values(ctx, embed_cfg);
  for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
    const Interval& iv = rule.attribute[a];
    bool is_hour = a == 2 || a == 3;
    double lo, hi;
    if (is_hour && cfg.time_constraints_exempt_from_slack) {
      lo = iv.min_value;
      hi = iv.max_value;
    } else {
      lo = std::max(0.0, iv.min_value / cfg.attribute_slack_factor);
      hi = iv.max_value * cfg.attribute_slack_factor;
    }
    if (values[a] < lo || values[a] > hi) {
      Violation v;
      v.kind = ViolationKind::kAttribute;
      v.rule_index = rule.rule_index;
      std::string window = is_hour && cfg.time_constraints_exempt_from_slack
                               ? "exact"
                               : "slack-widened";
      v.detail = std::string(kAttributeNames[a]) + " = " +
                 internal::format_number(values[a]) + " outside " + window +
                 " bounds [" + internal::format_number(lo) + ", " +
                 internal::format_number(hi) + "] of rule " +
                 std::to_string(rule.rule_index);
      out.push_back(std::move(v));
    }
  }
  return out;
}

namespace internal {

inline std::string render_path(const std::vector<std::string>& path) {
  if (path.empty()) return "--";
  std::string out;
  for (const std::string& step : path) {
    out += "-- " + step + " ";
  }
  out.pop_back();
  return out;
}

inline Decision decide(const std::vector<Violation>& violations,
                       const EnforceConfig& cfg) {
  Decision d = Decision::kAllow;
  for (const Violation& v : violations) {
    switch (cfg.severity_of(v.kind)) {
      case Severity::kAdvisory:
        break;
      case Severity::kAlert:
        if (d == Decision::kAllow) d = Decision::kAlert;
        break;
      case Severity::kTerminate:
        d = Decision::kTerminate;
        break;
    }
  }
  return d;
}

}  // namespace internal

// Full ACP evaluation: allow iff the flow check passes AND some single rule
// satisfies both its textual and its attribute predicate. On failure the
// violation list carries the flow failure (if any) plus every failed
// dimension of the best-scoring rule (fewest failures; ties to the lowest
// rule index).
inline Verdict check_invocation(const InvocationContext& ctx,
                                const PolicyRepository::Snapshot& snapshot,
                                const EnforceConfig& cfg) {
  cfg.validate();
  Verdict verdict;
  const AccessControlPolicy* policy =
      find_policy(snapshot, ctx.agent_role, ctx.tool_name);
  if (policy == nullptr) {
    Violation v;
    if (tool_known(snapshot, ctx.tool_name)) {
      v.kind = ViolationKind::kNoPolicy;
      v.detail = "no policy for agent role '" + ctx.agent_role +
                 "' and tool '" + ctx.tool_name + "'";
    } else {
      v.kind = ViolationKind::kUnknownTool;
      v.detail = "tool '" + ctx.tool_name + "' is not covered by any policy";
    }
    verdict.violations.push_back(std::move(v));
    verdict.decision = internal::decide(verdict.violations, cfg);
    return verdict;
  }

  // Two flow constraints, at most one violation: a tool never observed
  // repeating within a trace must not already sit in the prior path, and the
  // collapsed prior path must be a learned leading context.
  bool repeat_ok = policy->flow.repeat;
  if (!repeat_ok) {
    repeat_ok = true;
    for (const std::string& t : ctx.prior_tools) {
      if (t == ctx.tool_name) {
        repeat_ok = false;
        break;
      }
    }
  }
  std::optional<Violation> flow_violation;
  if (!repeat_ok) {
    Violation v;
    v.kind = ViolationKind::kFlow;
    v.detail = "tool '" + ctx.tool_name +
               "' does not repeat within a trace, yet the prior path already "
               "contains it";
    flow_violation = std::move(v);
  } else if (!path_allowed(policy->flow, ctx.prior_tools)) {
    Violation v;
    v.kind = ViolationKind::kFlow;
    v.detail = "prior path '" +
               internal::render_path(collapse_path(ctx.prior_tools)) +
               "' is not a learned leading context of tool '" +
               ctx.tool_name + "'";
    flow_violation = std::move(v);
  }

  bool rule_satisfied = false;
  std::size_t best_rule = 0;
  std::size_t best_score = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<Violation>> rule_failures(policy->rules.size());
  for (std::size_t k = 0; k < policy->rules.size(); ++k) {
    const ClusterRule& rule = policy->rules[k];
    bool textual_ok = check_input(ctx.tool_input, rule.textual);
    std::vector<Violation> failures =
        check_attributes(ctx, rule, cfg, policy->embed_config);
    if (!textual_ok) {
      Violation v;
      v.kind = ViolationKind::kInputPattern;
      v.rule_index = rule.rule_index;
      v.detail = "input does not full-match any pattern of rule " +
                 std::to_string(rule.rule_index);
      failures.insert(failures.begin(), std::move(v));
    }
    if (failures.empty()) {
      rule_satisfied = true;
      break;
    }
    if (failures.size() < best_score) {
      best_score = failures.size();
      best_rule = k;
    }
    rule_failures[k] = std::move(failures);
  }

  if (flow_violation.has_value()) {
    verdict.violations.push_back(std::move(*flow_violation));
  }
  if (!rule_satisfied) {
    for (Violation& v : rule_failures[best_rule]) {
      verdict.violations.push_back(std::move(v));
    }
  }
  verdict.decision = internal::decide(verdict.violations, cfg);
  return verdict;
}

// --- Violation delivery ------------------------------------------------------

// Receives every non-allow verdict. Implementations typically forward to the
// orchestrating process.
class ViolationSink {
 public:
  virtual ~ViolationSink() = default;
  virtual void deliver(const std::string& trace_id, const Verdict& verdict) = 0;
};

// Trace-level kill flags set by terminate verdicts. Callers must honor a
// killed trace by refusing its subsequent invocations.
class KillRegistry {
 public:
  void mark(const std::string& trace_id) {
    std::lock_guard<std::mutex> lock(mutex_);
    killed_.insert(trace_id);
  }
  bool is_killed(const std::string& trace_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return killed_.count(trace_id) > 0;
  }

 private:
  mutable std::mutex mutex_;
  std::set<std::string> killed_;
};

struct DeliveryAck {
  bool delivered = false;
  bool kill_flag_set = false;
  std::string sink_error;
};

// Delivers a non-allow verdict to the sink exactly once and sets the kill
// flag on terminate. Sink failures are logged and never alter the decision.
inline DeliveryAck on_violation(const std::string& trace_id,
                                const Verdict& verdict, ViolationSink* sink,
                                KillRegistry* kills) {
  DeliveryAck ack;
  if (verdict.decision == Decision::kAllow) return ack;
  if (verdict.decision == Decision::kTerminate && kills != nullptr) {
    kills->mark(trace_id);
    ack.kill_flag_set = true;
  }
  if (sink != nullptr) {
    try {
      sink->deliver(trace_id, verdict);
      ack.delivered = true;
    } catch (const std::exception& e) {
      ack.sink_error = e.what();
      std::cerr << "violation sink failed for trace '" << trace_id
                << "': " << e.what() << "\n";
    }
  }
  return ack;
}

}  // namespace guardian

#endif  // GUARDIAN_ENFORCE_HPP_
