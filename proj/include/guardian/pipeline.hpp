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

// End-to-end policy learning: rare-path filtering, per-(role, tool) event
// grouping, embedding, clustering, rule induction, and flow-spec extraction.
// The whole pass is deterministic for a fixed corpus and config, so two runs
// emit byte-identical policy bundles.

#ifndef GUARDIAN_PIPELINE_HPP_
#define GUARDIAN_PIPELINE_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "guardian/cfg.hpp"
#include "guardian/cluster.hpp"
#include "guardian/embed.hpp"
#include "guardian/enforce.hpp"
#include "guardian/error.hpp"
#include "guardian/policy.hpp"
#include "guardian/rules.hpp"
#include "guardian/trace.hpp"

namespace guardian {

struct LearnConfig {
  EmbedConfig embed;
  ClusterParams cluster;
  int min_frequency = 1;
  // When true, the aggregator may union embedding clusters whose drafted
  // patterns subsume each other before rules are induced.
  bool semantic_merge = true;

  void validate() const {
    embed.validate();
    cluster.validate();
    if (min_frequency < 1) throw Error("min_frequency must be >= 1");
  }
};

struct PolicyStats {
  std::string rule_id;
  std::string agent_role;
  std::string tool_name;
  std::size_t cluster_count = 0;
  std::size_t pattern_count = 0;
  bool aggregator_fallback = false;
  std::vector<std::string> warnings;
};

struct LearnResult {
  std::vector<AccessControlPolicy> policies;   // sorted by rule_id
  std::vector<ExecutionSequence> flagged_rare; // reported, not trained on
  std::vector<PolicyStats> stats;              // aligned with policies
  std::int64_t created_at = 0;
};

inline LearnResult learn_policies(
    const std::vector<ExecutionSequence>& sequences, Aggregator& agg,
    const LearnConfig& cfg) {
  cfg.validate();
  if (sequences.empty()) throw Error("learn_policies requires >= 1 sequence");

  RareFilterResult filtered = filter_rare(sequences, cfg.min_frequency);
  if (filtered.kept.empty()) {
    throw Error("all sequences were flagged rare; nothing to learn from");
  }
  std::sort(filtered.kept.begin(), filtered.kept.end(),
            [](const ExecutionSequence& a, const ExecutionSequence& b) {
              return a.trace_id < b.trace_id;
            });

  LearnResult result;
  result.flagged_rare = std::move(filtered.flagged);
  for (const ExecutionSequence& seq : filtered.kept) {
    for (const TraceEvent& e : seq.events) {
      result.created_at = std::max(result.created_at, e.timestamp_ms);
    }
  }

  std::map<std::string, std::vector<ExecutionSequence>> by_role;
  for (const ExecutionSequence& seq : filtered.kept) {
    by_role[seq.agent_role].push_back(seq);
  }

  for (const auto& [role, role_seqs] : by_role) {
    std::map<std::string, std::vector<TraceEvent>> events_by_tool;
    std::map<std::string, std::set<std::string>> traces_by_tool;
    for (const ExecutionSequence& seq : role_seqs) {
      for (const TraceEvent& e : seq.events) {
        events_by_tool[e.tool_name].push_back(e);
        traces_by_tool[e.tool_name].insert(seq.trace_id);
      }
    }

    for (const auto& [tool, events] : events_by_tool) {
      std::vector<FeatureVector> vectors;
      std::vector<std::string> raw_inputs;
      vectors.reserve(events.size());
      raw_inputs.reserve(events.size());
      for (const TraceEvent& e : events) {
        vectors.push_back(embed_event(e, cfg.embed));
        raw_inputs.push_back(e.tool_input);
      }

      PolicyStats stats;
      stats.agent_role = role;
      stats.tool_name = tool;

      ClusterSet set = cluster_embeddings(vectors, cfg.cluster, tool);
      if (cfg.semantic_merge) {
        MergeResult merged = merge_semantic(set, raw_inputs, agg);
        if (!merged.warning.empty()) stats.warnings.push_back(merged.warning);
        set = std::move(merged.set);
      }
      stats.cluster_count = set.clusters.size();

      std::vector<ClusterRule> rules;
      rules.reserve(set.clusters.size());
      for (std::size_t k = 0; k < set.clusters.size(); ++k) {
        const std::vector<std::size_t>& cluster = set.clusters[k];
        if (cluster.size() <
            static_cast<std::size_t>(cfg.cluster.min_cluster_size_for_rule)) {
          stats.warnings.push_back(
              "cluster " + std::to_string(k) + " of tool '" + tool +
              "' has only " + std::to_string(cluster.size()) +
              " member(s); rule kept for review");
        }
        std::vector<TraceEvent> members;
        members.reserve(cluster.size());
        for (std::size_t idx : cluster) members.push_back(events[idx]);
        InducedRule induced =
            induce_rule(members, agg, cfg.embed, static_cast<int>(k));
        if (induced.aggregator_fallback) stats.aggregator_fallback = true;
        if (!induced.warning.empty()) {
          stats.warnings.push_back(induced.warning);
        }
        stats.pattern_count += induced.rule.textual.patterns().size();
        rules.push_back(std::move(induced.rule));
      }

      ToolFlowSpec flow = leading_contexts(role_seqs, tool);
      AccessControlPolicy policy = build_policy(
          role, tool, std::move(rules), std::move(flow), cfg.embed,
          result.created_at,
          static_cast<int>(traces_by_tool[tool].size()));
      stats.rule_id = policy.rule_id;
      result.policies.push_back(std::move(policy));
      result.stats.push_back(std::move(stats));
    }
  }

  std::vector<std::size_t> order(result.policies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.policies[a].rule_id < result.policies[b].rule_id;
  });
  std::vector<AccessControlPolicy> policies;
  std::vector<PolicyStats> stats;
  policies.reserve(order.size());
  stats.reserve(order.size());
  for (std::size_t i : order) {
    policies.push_back(std::move(result.policies[i]));
    stats.push_back(std::move(result.stats[i]));
  }
  result.policies = std::move(policies);
  result.stats = std::move(stats);
  return result;
}

// Enforces each event of a sequence in order against a snapshot. The prior
// path grows with every event regardless of its verdict; per-event verdicts
// come back in event order.
inline std::vector<Verdict> enforce_sequence(
    const ExecutionSequence& seq, const PolicyRepository::Snapshot& snapshot,
    const EnforceConfig& cfg) {
  std::vector<Verdict> verdicts;
  verdicts.reserve(seq.events.size());
  std::vector<std::string> prior;
  for (const TraceEvent& e : seq.events) {
    InvocationContext ctx;
    ctx.agent_role = seq.agent_role;
    ctx.tool_name = e.tool_name;
    ctx.tool_input = e.tool_input;
    ctx.thoughts = e.thoughts;
    ctx.input_tokens = e.input_tokens;
    ctx.output_tokens = e.output_tokens;
    ctx.timestamp_ms = e.timestamp_ms;
    ctx.idle_ms = e.idle_ms;
    ctx.processing_ms = e.processing_ms;
    ctx.prior_tools = prior;
    verdicts.push_back(check_invocation(ctx, snapshot, cfg));
    prior.push_back(e.tool_name);
  }
  return verdicts;
}

}  // namespace guardian

#endif  // GUARDIAN_PIPELINE_HPP_
