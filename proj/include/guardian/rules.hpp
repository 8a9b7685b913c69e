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

#ifndef GUARDIAN_RULES_HPP_
#define GUARDIAN_RULES_HPP_

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guardian/cluster.hpp"
#include "guardian/embed.hpp"
#include "guardian/error.hpp"
#include "guardian/patterns.hpp"
#include "guardian/trace.hpp"

namespace guardian {

// Membership in a set of anchored patterns. Invariants: non-empty; every
// training string of the owning cluster matches at least one pattern; no
// pattern is evidence-subsumed by a sibling.
class TextualPredicate {
 public:
  TextualPredicate() = default;
  explicit TextualPredicate(std::vector<std::string> patterns)
      : patterns_(std::move(patterns)) {
    if (patterns_.empty())
      throw Error("textual predicate requires >= 1 pattern");
    auto compiled = std::make_shared<std::vector<CompiledPattern>>();
    compiled->reserve(patterns_.size());
    for (const std::string& p : patterns_) compiled->push_back(compile_pattern(p));
    compiled_ = std::move(compiled);
  }

  const std::vector<std::string>& patterns() const { return patterns_; }

  bool matches(const std::string& text) const {
    for (const CompiledPattern& p : *compiled_) {
      if (full_match(p, text)) return true;
    }
    return false;
  }

  friend bool operator==(const TextualPredicate& a, const TextualPredicate& b) {
    return a.patterns_ == b.patterns_;
  }

 private:
  std::vector<std::string> patterns_;
  std::shared_ptr<const std::vector<CompiledPattern>> compiled_;
};

struct Interval {
  double min_value = 0.0;
  double max_value = 0.0;

  bool contains(double v) const { return v >= min_value && v <= max_value; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Attribute slot order is fixed and doubles as the serialization order.
inline constexpr std::array<const char*, 6> kAttributeNames = {
    "max_input_tokens", "max_output_tokens", "min_hour",
    "max_hour",         "max_idle_time",     "max_processing_time"};

struct AttributePredicate {
  std::array<Interval, 6> intervals{};

  Interval& operator[](std::size_t i) { return intervals[i]; }
  const Interval& operator[](std::size_t i) const { return intervals[i]; }

  friend bool operator==(const AttributePredicate&,
                         const AttributePredicate&) = default;
};

// The six per-invocation attribute values in kAttributeNames order. Hours
// are fractional local hours; a single invocation contributes the same hour
// to both window slots.
inline std::array<double, 6> attribute_values(const TraceEvent& e,
                                              const EmbedConfig& cfg) {
  double hour = fractional_hour(e.timestamp_ms, cfg.timezone_offset_minutes);
  return {static_cast<double>(e.input_tokens),
          static_cast<double>(e.output_tokens),
          hour,
          hour,
          static_cast<double>(e.idle_ms),
          static_cast<double>(e.processing_ms)};
}

inline AttributePredicate induce_attribute(const std::vector<TraceEvent>& events,
                                           const EmbedConfig& cfg) {
  if (events.empty()) throw Error("induce_attribute requires >= 1 event");
  AttributePredicate pred;
  for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
    pred[a] = {std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
  }
  for (const TraceEvent& e : events) {
    std::array<double, 6> vals = attribute_values(e, cfg);
    for (std::size_t a = 0; a < vals.size(); ++a) {
      pred[a].min_value = std::min(pred[a].min_value, vals[a]);
      pred[a].max_value = std::max(pred[a].max_value, vals[a]);
    }
  }
  return pred;
}

struct ClusterRule {
  int rule_index = 0;
  TextualPredicate textual;
  AttributePredicate attribute;
  int support = 0;

  friend bool operator==(const ClusterRule&, const ClusterRule&) = default;
};

// Pluggable compactor for draft patterns. aggregate() may propose a smaller
// covering pattern set; a std::nullopt or failing proposal routes callers to
// the deterministic fallback. propose_merges() may group clusters that share
// a semantic category; the base implementation proposes nothing.
class Aggregator {
 public:
  virtual ~Aggregator() = default;
  virtual std::string name() const = 0;
  virtual std::optional<std::vector<std::string>> aggregate(
      const std::vector<std::string>& drafts,
      const std::vector<std::string>& samples) = 0;
  virtual std::vector<std::vector<std::size_t>> propose_merges(
      const std::vector<std::vector<std::string>>& cluster_drafts,
      const std::vector<std::vector<std::string>>& cluster_samples) {
    (void)cluster_drafts;
    (void)cluster_samples;
    return {};
  }
};

// Removes duplicate, evidence-subsumed, and training-redundant patterns
// while preserving coverage of `samples`. Deterministic: candidates are
// processed in sorted order; mutually subsuming patterns keep the
// lexicographically smaller one; result is sorted.
inline std::vector<std::string> minimize_patterns(
    const std::vector<std::string>& patterns,
    const std::vector<std::string>& samples) {
  std::vector<std::string> sorted = patterns;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<CompiledPattern> compiled;
  compiled.reserve(sorted.size());
  for (const std::string& p : sorted) compiled.push_back(compile_pattern(p));
  std::vector<bool> alive(sorted.size(), true);

  // Subsumption pass, most-specific candidates first.
  for (std::size_t i = sorted.size(); i-- > 0;) {
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (j == i || !alive[j]) continue;
      if (!probe_subsumes(compiled[j], compiled[i], samples)) continue;
      bool mutual = probe_subsumes(compiled[i], compiled[j], samples);
      if (!mutual || sorted[j] < sorted[i]) {
        alive[i] = false;
        break;
      }
    }
  }

  // Redundancy pass: drop patterns whose training matches are covered by
  // the other survivors, smallest match set first.
  std::vector<std::vector<std::size_t>> match_sets(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!alive[i]) continue;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (full_match(compiled[i], samples[s])) match_sets[i].push_back(s);
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (alive[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (match_sets[a].size() != match_sets[b].size())
                       return match_sets[a].size() < match_sets[b].size();
                     return sorted[a] < sorted[b];
                   });
  for (std::size_t i : order) {
    std::vector<bool> covered(samples.size(), false);
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (j == i || !alive[j]) continue;
      for (std::size_t s : match_sets[j]) covered[s] = true;
    }
    bool removable = true;
    for (std::size_t s : match_sets[i]) {
      if (!covered[s]) {
        removable = false;
        break;
      }
    }
    // Never remove the last pattern: the predicate must stay non-empty.
    std::size_t alive_count =
        static_cast<std::size_t>(std::count(alive.begin(), alive.end(), true));
    if (removable && alive_count > 1) alive[i] = false;
  }

  std::vector<std::string> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (alive[i]) out.push_back(sorted[i]);
  }
  return out;
}

struct AggregateResult {
  TextualPredicate predicate;
  bool used_fallback = false;
  std::string warning;
};

// Runs the aggregator under the coverage contract: the proposal is accepted
// only if every pattern parses under the dialect and every sample stays
// covered; otherwise (including transport failure) the drafts are minimized
// deterministically and a warning is recorded.
inline AggregateResult aggregate(const std::vector<std::string>& drafts,
                                 const std::vector<std::string>& samples,
                                 Aggregator& agg) {
  for (const std::string& s : samples) {
    bool covered = false;
    for (const std::string& d : drafts) {
      if (full_match(compile_pattern(d), s)) {
        covered = true;
        break;
      }
    }
    if (!covered)
      throw Error("drafts do not cover training sample '" + s + "'");
  }

  std::optional<std::vector<std::string>> proposal;
  std::string warning;
  try {
    proposal = agg.aggregate(drafts, samples);
  } catch (const std::exception& e) {
    warning = "aggregator '" + agg.name() + "' failed: " + e.what() +
              "; deterministic fallback used";
    proposal = std::nullopt;
  }
  if (proposal.has_value() && !proposal->empty()) {
    bool ok = true;
    std::vector<CompiledPattern> compiled;
    try {
      for (const std::string& p : *proposal) compiled.push_back(compile_pattern(p));
    } catch (const Error&) {
      ok = false;
    }
    if (ok) {
      for (const std::string& s : samples) {
        bool covered = false;
        for (const CompiledPattern& p : compiled) {
          if (full_match(p, s)) {
            covered = true;
            break;
          }
        }
        if (!covered) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      return {TextualPredicate(minimize_patterns(*proposal, samples)), false,
              warning};
    }
    warning = "aggregator '" + agg.name() +
              "' proposal rejected (coverage or dialect violation); drafts "
              "retained";
  } else if (warning.empty() && proposal.has_value() && proposal->empty()) {
    warning = "aggregator '" + agg.name() + "' returned no patterns; drafts retained";
  }
  return {TextualPredicate(minimize_patterns(drafts, samples)), true, warning};
}

struct InducedRule {
  ClusterRule rule;
  bool aggregator_fallback = false;
  std::string warning;
};

inline InducedRule induce_rule(const std::vector<TraceEvent>& members,
                               Aggregator& agg, const EmbedConfig& cfg,
                               int rule_index) {
  if (members.empty()) throw Error("induce_rule requires >= 1 member");
  std::vector<std::string> inputs;
  inputs.reserve(members.size());
  for (const TraceEvent& e : members) inputs.push_back(e.tool_input);
  AggregateResult agg_result = aggregate(draft_regexes(inputs), inputs, agg);
  InducedRule out;
  out.rule.rule_index = rule_index;
  out.rule.textual = std::move(agg_result.predicate);
  out.rule.attribute = induce_attribute(members, cfg);
  out.rule.support = static_cast<int>(members.size());
  out.aggregator_fallback = agg_result.used_fallback;
  out.warning = std::move(agg_result.warning);
  return out;
}

// Default aggregator: deterministic minimization, and cluster merges by
// draft containment (every draft of one cluster evidence-subsumed by some
// draft of the other, in either direction), closed transitively.
class DeterministicAggregator : public Aggregator {
 public:
  std::string name() const override { return "deterministic"; }

  std::optional<std::vector<std::string>> aggregate(
      const std::vector<std::string>& drafts,
      const std::vector<std::string>& samples) override {
    return minimize_patterns(drafts, samples);
  }

  std::vector<std::vector<std::size_t>> propose_merges(
      const std::vector<std::vector<std::string>>& cluster_drafts,
      const std::vector<std::vector<std::string>>& cluster_samples) override {
    std::size_t n = cluster_drafts.size();
    std::vector<std::vector<CompiledPattern>> compiled(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (const std::string& d : cluster_drafts[i])
        compiled[i].push_back(compile_pattern(d));
    }
    auto contained = [&](std::size_t a, std::size_t b) {
      // Every draft of a is subsumed by some draft of b.
      for (const CompiledPattern& pa : compiled[a]) {
        bool sub = false;
        for (const CompiledPattern& pb : compiled[b]) {
          if (probe_subsumes(pb, pa, cluster_samples[a])) {
            sub = true;
            break;
          }
        }
        if (!sub) return false;
      }
      return true;
    };
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (contained(i, j) || contained(j, i)) {
          std::size_t ri = find(i), rj = find(j);
          if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
        }
      }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> proposals;
    for (auto& [root, members] : groups) {
      if (members.size() > 1) proposals.push_back(std::move(members));
    }
    return proposals;
  }
};

struct MergeResult {
  ClusterSet set;
  std::string warning;
};

// Optional semantic merge pass over an embedding-level partition. The
// aggregator may union existing clusters; failures leave the partition
// unchanged and record a warning. Output is always a valid partition.
inline MergeResult merge_semantic(const ClusterSet& set,
                                  const std::vector<std::string>& raw_inputs,
                                  Aggregator& agg) {
  MergeResult result{set, ""};
  std::vector<std::vector<std::string>> cluster_samples;
  std::vector<std::vector<std::string>> cluster_drafts;
  cluster_samples.reserve(set.clusters.size());
  for (const auto& members : set.clusters) {
    std::vector<std::string> samples;
    samples.reserve(members.size());
    for (std::size_t m : members) {
      if (m >= raw_inputs.size())
        throw Error("cluster member index out of range of raw inputs");
      samples.push_back(raw_inputs[m]);
    }
    cluster_drafts.push_back(draft_regexes(samples));
    cluster_samples.push_back(std::move(samples));
  }

  std::vector<std::vector<std::size_t>> proposals;
  try {
    proposals = agg.propose_merges(cluster_drafts, cluster_samples);
  } catch (const std::exception& e) {
    result.warning = "aggregator '" + agg.name() +
                     "' merge proposal failed: " + e.what() +
                     "; partition unchanged";
    return result;
  }

  std::vector<std::size_t> parent(set.clusters.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& group : proposals) {
    for (std::size_t idx : group) {
      if (idx >= set.clusters.size()) {
        result.warning = "aggregator '" + agg.name() +
                         "' proposed an unknown cluster index; partition "
                         "unchanged";
        return result;
      }
    }
    for (std::size_t k = 1; k < group.size(); ++k) {
      std::size_t a = find(group[0]), b = find(group[k]);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> merged;
  for (std::size_t i = 0; i < set.clusters.size(); ++i) {
    auto& members = merged[find(i)];
    members.insert(members.end(), set.clusters[i].begin(),
                   set.clusters[i].end());
  }
  result.set.clusters.clear();
  for (auto& [root, members] : merged) {
    std::sort(members.begin(), members.end());
    result.set.clusters.push_back(std::move(members));
  }
  std::sort(result.set.clusters.begin(), result.set.clusters.end(),
            [](const std::vector<std::size_t>& a,
               const std::vector<std::size_t>& b) { return a[0] < b[0]; });
  return result;
}

}  // namespace guardian

#endif  // GUARDIAN_RULES_HPP_
