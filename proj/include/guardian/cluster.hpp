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

#ifndef GUARDIAN_CLUSTER_HPP_
#define GUARDIAN_CLUSTER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "guardian/embed.hpp"
#include "guardian/error.hpp"

namespace guardian {

struct ClusterParams {
  // Cosine distance, average linkage. The hierarchy is cut before the first
  // merge whose linkage distance would exceed this threshold.
  double merge_threshold = 0.35;
  // Clusters smaller than this are flagged for review, never dropped.
  int min_cluster_size_for_rule = 1;
  // Per-block scaling applied before distances. 1.0 everywhere reproduces
  // plain unweighted concatenation.
  double numeric_weight = 1.0;
  double thoughts_weight = 1.0;
  double tool_type_weight = 1.0;
  double tool_input_weight = 1.0;
  double task_result_weight = 1.0;

  void validate() const {
    // [0,2] closed: 0 and 2 are the documented monotonicity endpoints
    // (exact-duplicate clusters, single cluster).
    if (!(merge_threshold >= 0.0 && merge_threshold <= 2.0)) {
      throw Error("merge_threshold must lie in [0,2]");
    }
    if (min_cluster_size_for_rule < 1) {
      throw Error("min_cluster_size_for_rule must be >= 1");
    }
    for (double w : {numeric_weight, thoughts_weight, tool_type_weight,
                     tool_input_weight, task_result_weight}) {
      if (w < 0.0) throw Error("block weights must be non-negative");
    }
  }

  friend bool operator==(const ClusterParams&, const ClusterParams&) = default;
};

// A partition of one tool's invocation list, by member index.
struct ClusterSet {
  std::string tool_name;
  std::vector<std::vector<std::size_t>> clusters;
  ClusterParams params;
};

// Cosine distance with the zero-vector convention: two zero vectors are at
// distance 0, a zero vector is at distance 1 from anything non-zero.
inline double cosine_distance(const std::vector<double>& a,
                              const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0) return 0.0;
  if (na == 0.0 || nb == 0.0) return 1.0;
  // Identical inputs accumulate identical sums; answer exactly 0 for them
  // rather than the one-ulp residue of the division below, so exact
  // duplicates merge even at threshold 0.
  if (dot == na && dot == nb) return 0.0;
  double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  if (d < 0.0) return 0.0;
  if (d > 2.0) return 2.0;
  return d;
}

// Average-linkage agglomerative clustering over a precomputed distance
// matrix. Canonical evaluation order makes the result reproducible to the
// bit: every round, linkage between two active clusters is the mean of base
// distances summed over cross pairs in ascending (member, member) order; the
// merged pair is the one with the smallest linkage, ties broken by the
// lexicographically smallest (min representative, max representative) where
// a cluster's representative is its smallest member index. Clusters are
// returned with sorted members, ordered by representative.
inline std::vector<std::vector<std::size_t>> agglomerate(
    std::size_t n,
    const std::function<double(std::size_t, std::size_t)>& distance,
    double threshold) {
  std::vector<std::vector<double>> base(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      base[i][j] = base[j][i] = distance(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> clusters;
  clusters.reserve(n);
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i});

  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 0;
    bool have = false;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double sum = 0.0;
        for (std::size_t i : clusters[a]) {
          for (std::size_t j : clusters[b]) sum += base[i][j];
        }
        double link = sum / (static_cast<double>(clusters[a].size()) *
                             static_cast<double>(clusters[b].size()));
        // Active clusters are kept ordered by representative, so the first
        // strictly-smaller linkage seen is already the tie-break winner.
        if (!have || link < best) {
          best = link;
          best_a = a;
          best_b = b;
          have = true;
        }
      }
    }
    if (!have || best > threshold) break;
    std::vector<std::size_t> merged = clusters[best_a];
    merged.insert(merged.end(), clusters[best_b].begin(),
                  clusters[best_b].end());
    std::sort(merged.begin(), merged.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
    clusters[best_a] = std::move(merged);
    std::sort(clusters.begin(), clusters.end(),
              [](const std::vector<std::size_t>& x,
                 const std::vector<std::size_t>& y) { return x[0] < y[0]; });
  }
  return clusters;
}

namespace internal {

inline std::vector<double> weighted_features(const FeatureVector& fv,
                                             const ClusterParams& p) {
  std::vector<double> v(fv.values.begin(), fv.values.end());
  for (std::size_t i = 0; i < kNumericDims; ++i) v[i] *= p.numeric_weight;
  for (std::size_t i = 0; i < kThoughtsDims; ++i)
    v[kThoughtsOffset + i] *= p.thoughts_weight;
  for (std::size_t i = 0; i < kToolTypeDims; ++i)
    v[kToolTypeOffset + i] *= p.tool_type_weight;
  for (std::size_t i = 0; i < kToolInputDims; ++i)
    v[kToolInputOffset + i] *= p.tool_input_weight;
  for (std::size_t i = 0; i < kTaskResultDims; ++i)
    v[kTaskResultOffset + i] *= p.task_result_weight;
  return v;
}

}  // namespace internal

inline ClusterSet cluster_embeddings(const std::vector<FeatureVector>& vectors,
                                     const ClusterParams& params,
                                     const std::string& tool_name = "") {
  params.validate();
  if (vectors.empty()) throw Error("cluster_embeddings requires >= 1 vector");
  std::vector<std::vector<double>> weighted;
  weighted.reserve(vectors.size());
  for (const FeatureVector& fv : vectors) {
    weighted.push_back(internal::weighted_features(fv, params));
  }
  ClusterSet set;
  set.tool_name = tool_name;
  set.params = params;
  set.clusters = agglomerate(
      vectors.size(),
      [&](std::size_t i, std::size_t j) {
        return cosine_distance(weighted[i], weighted[j]);
      },
      params.merge_threshold);
  return set;
}

// Partition-law check used by callers and tests after every cluster
// transformation.
inline bool is_partition(const ClusterSet& set, std::size_t n) {
  std::vector<bool> seen(n, false);
  for (const auto& c : set.clusters) {
    if (c.empty()) return false;
    for (std::size_t m : c) {
      if (m >= n || seen[m]) return false;
      seen[m] = true;
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace guardian

#endif  // GUARDIAN_CLUSTER_HPP_
