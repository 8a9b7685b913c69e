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

#ifndef GUARDIAN_POLICY_HPP_
#define GUARDIAN_POLICY_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "guardian/cfg.hpp"
#include "guardian/embed.hpp"
#include "guardian/error.hpp"
#include "guardian/hash.hpp"
#include "guardian/rules.hpp"

namespace guardian {

inline std::string action_hash(const std::string& tool_name) {
  return to_hex16(fnv1a64(canonical_name(tool_name)));
}

inline std::string make_rule_id(const std::string& agent_role,
                                const std::string& tool_name) {
  return canonical_name(agent_role) + "/" + action_hash(tool_name);
}

// One per-agent-per-tool policy: flow constraint conjoined with the
// disjunction of cluster rules. created_at is the maximum event timestamp of
// the training corpus, not wall-clock time, so learning is reproducible to
// the byte.
struct AccessControlPolicy {
  std::string rule_id;
  std::string agent_role;
  std::string tool_name;
  std::vector<ClusterRule> rules;
  ToolFlowSpec flow;
  EmbedConfig embed_config;
  std::int64_t created_at = 0;
  int source_trace_count = 0;

  friend bool operator==(const AccessControlPolicy&,
                         const AccessControlPolicy&) = default;
};

inline void validate_policy(const AccessControlPolicy& p) {
  if (p.agent_role.empty()) throw Error("policy field 'agent_role' is empty");
  if (p.tool_name.empty()) throw Error("policy field 'tool_name' is empty");
  if (p.rule_id != make_rule_id(p.agent_role, p.tool_name)) {
    throw Error("policy field 'rule_id' is not reproducible from "
                "(agent_role, tool_name): expected '" +
                make_rule_id(p.agent_role, p.tool_name) + "', found '" +
                p.rule_id + "'");
  }
  if (p.rules.empty()) throw Error("policy field 'rules' must be non-empty");
  for (std::size_t k = 0; k < p.rules.size(); ++k) {
    const ClusterRule& r = p.rules[k];
    if (r.rule_index != static_cast<int>(k)) {
      throw Error("rule " + std::to_string(k) + ": field 'rule_index' must equal its position");
    }
    if (r.support < 1) {
      throw Error("rule " + std::to_string(k) + ": field 'support' must be >= 1");
    }
    if (r.textual.patterns().empty()) {
      throw Error("rule " + std::to_string(k) + ": field 'input_patterns' must be non-empty");
    }
    for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
      const Interval& iv = r.attribute[a];
      if (iv.min_value > iv.max_value) {
        throw Error("rule " + std::to_string(k) + ": attribute '" +
                    kAttributeNames[a] + "' has min > max");
      }
    }
    for (std::size_t a : {std::size_t{2}, std::size_t{3}}) {
      const Interval& iv = r.attribute[a];
      if (iv.min_value < 0.0 || iv.max_value >= 24.0) {
        throw Error("rule " + std::to_string(k) + ": attribute '" +
                    kAttributeNames[a] + "' outside the [0,24) hour domain");
      }
    }
  }
  if (p.flow.tool_name != p.tool_name) {
    throw Error("policy field 'flow.tool_name' ('" + p.flow.tool_name +
                "') does not match 'tool_name' ('" + p.tool_name + "')");
  }
  p.embed_config.validate();
  if (p.created_at < 0) throw Error("policy field 'metadata.created_at' is negative");
  if (p.source_trace_count < 1) {
    throw Error("policy field 'metadata.source_trace_count' must be >= 1");
  }
}

inline AccessControlPolicy build_policy(
    const std::string& agent_role, const std::string& tool_name,
    std::vector<ClusterRule> rules, ToolFlowSpec flow,
    const EmbedConfig& embed_config, std::int64_t created_at,
    int source_trace_count) {
  AccessControlPolicy p;
  p.rule_id = make_rule_id(agent_role, tool_name);
  p.agent_role = agent_role;
  p.tool_name = tool_name;
  p.rules = std::move(rules);
  p.flow = std::move(flow);
  p.embed_config = embed_config;
  p.created_at = created_at;
  p.source_trace_count = source_trace_count;
  validate_policy(p);
  return p;
}

// --- Canonical JSON serialization -----------------------------------------
//
// nlohmann::json objects keep keys sorted, and double formatting is the
// shortest round-trip form, so equal policies always serialize to identical
// bytes. Key names below are the normative schema (see docs/).

inline std::string serialize_policy(const AccessControlPolicy& p) {
  validate_policy(p);
  using nlohmann::json;
  json doc;
  doc["rule_id"] = p.rule_id;
  doc["agent_role"] = p.agent_role;
  doc["tool_name"] = p.tool_name;

  json constraints = json::array();
  json patterns = json::array();
  json support = json::array();
  for (const ClusterRule& r : p.rules) {
    json attr;
    for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
      attr[kAttributeNames[a]] = {{"min", r.attribute[a].min_value},
                                  {"max", r.attribute[a].max_value}};
    }
    constraints.push_back(std::move(attr));
    patterns.push_back(r.textual.patterns());
    support.push_back(r.support);
  }
  doc["attribute_constraints"] = std::move(constraints);
  doc["input_patterns"] = std::move(patterns);

  json contexts = json::array();
  for (const std::vector<std::string>& path : p.flow.required_leading_contexts) {
    contexts.push_back(path);
  }
  doc["flow"] = {{"repeat", p.flow.repeat},
                 {"required_leading_contexts", std::move(contexts)}};
  doc["embed_config"] = {
      {"token_cap", p.embed_config.token_cap},
      {"idle_cap_ms", p.embed_config.idle_cap_ms},
      {"processing_cap_ms", p.embed_config.processing_cap_ms},
      {"timezone_offset_minutes", p.embed_config.timezone_offset_minutes}};
  doc["metadata"] = {{"created_at", p.created_at},
                     {"source_trace_count", p.source_trace_count},
                     {"rule_support", std::move(support)}};
  return doc.dump(2) + "\n";
}

inline AccessControlPolicy deserialize_policy(const std::string& bytes) {
  using nlohmann::json;
  json doc = json::parse(bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error("policy document is not a JSON object");
  }
  auto require = [&doc](const char* field) -> const json& {
    if (!doc.contains(field))
      throw Error("policy field '" + std::string(field) + "' is missing");
    return doc[field];
  };
  auto as_string = [](const json& j, const std::string& field) {
    if (!j.is_string()) throw Error("policy field '" + field + "' must be a string");
    return j.get<std::string>();
  };

  AccessControlPolicy p;
  p.rule_id = as_string(require("rule_id"), "rule_id");
  p.agent_role = as_string(require("agent_role"), "agent_role");
  p.tool_name = as_string(require("tool_name"), "tool_name");

  const json& constraints = require("attribute_constraints");
  const json& patterns = require("input_patterns");
  if (!constraints.is_array() || !patterns.is_array() ||
      constraints.size() != patterns.size() || constraints.empty()) {
    throw Error("policy fields 'attribute_constraints' and 'input_patterns' "
                "must be non-empty arrays of equal length");
  }

  const json& meta = require("metadata");
  if (!meta.is_object()) throw Error("policy field 'metadata' must be an object");
  if (!meta.contains("created_at") || !meta["created_at"].is_number_integer())
    throw Error("policy field 'metadata.created_at' is missing or not an integer");
  if (!meta.contains("source_trace_count") ||
      !meta["source_trace_count"].is_number_integer())
    throw Error("policy field 'metadata.source_trace_count' is missing or not an integer");
  p.created_at = meta["created_at"].get<std::int64_t>();
  p.source_trace_count = meta["source_trace_count"].get<int>();
  std::vector<int> support(constraints.size(), 0);
  if (meta.contains("rule_support")) {
    if (!meta["rule_support"].is_array() ||
        meta["rule_support"].size() != constraints.size())
      throw Error("policy field 'metadata.rule_support' must parallel the rule arrays");
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (!meta["rule_support"][k].is_number_integer())
        throw Error("policy field 'metadata.rule_support' must hold integers");
      support[k] = meta["rule_support"][k].get<int>();
    }
  } else {
    std::fill(support.begin(), support.end(), 1);
  }

  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const json& attr = constraints[k];
    const json& pats = patterns[k];
    if (!attr.is_object())
      throw Error("policy field 'attribute_constraints[" + std::to_string(k) +
                  "]' must be an object");
    if (!pats.is_array() || pats.empty())
      throw Error("policy field 'input_patterns[" + std::to_string(k) +
                  "]' must be a non-empty array");
    ClusterRule r;
    r.rule_index = static_cast<int>(k);
    r.support = support[k];
    std::vector<std::string> pattern_strings;
    for (const json& pj : pats) {
      pattern_strings.push_back(as_string(pj, "input_patterns[" + std::to_string(k) + "]"));
    }
    r.textual = TextualPredicate(std::move(pattern_strings));
    for (std::size_t a = 0; a < kAttributeNames.size(); ++a) {
      const std::string name = kAttributeNames[a];
      if (!attr.contains(name) || !attr[name].is_object() ||
          !attr[name].contains("min") || !attr[name].contains("max") ||
          !attr[name]["min"].is_number() || !attr[name]["max"].is_number()) {
        throw Error("policy field 'attribute_constraints[" + std::to_string(k) +
                    "]." + name + "' must be an object with numeric min/max");
      }
      r.attribute[a] = {attr[name]["min"].get<double>(),
                        attr[name]["max"].get<double>()};
    }
    p.rules.push_back(std::move(r));
  }

  const json& flow = require("flow");
  if (!flow.is_object() || !flow.contains("repeat") ||
      !flow["repeat"].is_boolean() ||
      !flow.contains("required_leading_contexts") ||
      !flow["required_leading_contexts"].is_array()) {
    throw Error("policy field 'flow' must be an object with 'repeat' and "
                "'required_leading_contexts'");
  }
  p.flow.tool_name = p.tool_name;
  p.flow.repeat = flow["repeat"].get<bool>();
  for (const json& path : flow["required_leading_contexts"]) {
    if (!path.is_array())
      throw Error("policy field 'flow.required_leading_contexts' must hold arrays");
    std::vector<std::string> steps;
    for (const json& step : path) {
      steps.push_back(as_string(step, "flow.required_leading_contexts[]"));
    }
    p.flow.required_leading_contexts.insert(std::move(steps));
  }

  const json& ec = require("embed_config");
  if (!ec.is_object() || !ec.contains("token_cap") ||
      !ec.contains("idle_cap_ms") || !ec.contains("processing_cap_ms") ||
      !ec.contains("timezone_offset_minutes")) {
    throw Error("policy field 'embed_config' must carry token_cap, idle_cap_ms, "
                "processing_cap_ms, timezone_offset_minutes");
  }
  for (const char* f : {"token_cap", "idle_cap_ms", "processing_cap_ms",
                        "timezone_offset_minutes"}) {
    if (!ec[f].is_number_integer())
      throw Error("policy field 'embed_config." + std::string(f) + "' must be an integer");
  }
  p.embed_config.token_cap = ec["token_cap"].get<std::int64_t>();
  p.embed_config.idle_cap_ms = ec["idle_cap_ms"].get<std::int64_t>();
  p.embed_config.processing_cap_ms = ec["processing_cap_ms"].get<std::int64_t>();
  p.embed_config.timezone_offset_minutes = ec["timezone_offset_minutes"].get<int>();

  validate_policy(p);
  return p;
}

// --- Repository -------------------------------------------------------------
//
// rule_id -> policy with atomic whole-snapshot replacement. Readers hold a
// shared_ptr to an immutable snapshot; reload either installs a complete new
// snapshot or leaves the previous one untouched.
class PolicyRepository {
 public:
  using Snapshot = std::map<std::string, AccessControlPolicy>;

  PolicyRepository() : snapshot_(std::make_shared<const Snapshot>()) {}

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return snapshot_;
  }

  void put(AccessControlPolicy policy) {
    validate_policy(policy);
    std::lock_guard<std::mutex> lock(mutex_);
    Snapshot next = *snapshot_;
    insert_checked(next, std::move(policy));
    snapshot_ = std::make_shared<const Snapshot>(std::move(next));
  }

  std::optional<AccessControlPolicy> get(const std::string& rule_id) const {
    auto snap = snapshot();
    auto it = snap->find(rule_id);
    if (it == snap->end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> list() const {
    auto snap = snapshot();
    std::vector<std::string> ids;
    ids.reserve(snap->size());
    for (const auto& [id, policy] : *snap) ids.push_back(id);
    return ids;
  }

  // Parses every .json file under `dir` (recursively, in sorted path order)
  // into a fresh snapshot and installs it atomically. Any failure aborts the
  // reload and keeps the prior snapshot.
  void reload(const std::filesystem::path& dir) {
    auto next = std::make_shared<Snapshot>(load_bundle(dir));
    std::lock_guard<std::mutex> lock(mutex_);
    snapshot_ = std::move(next);
  }

  static Snapshot load_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
      throw Error("policy directory '" + dir.string() + "' is not readable");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    Snapshot snap;
    for (const fs::path& file : files) {
      std::ifstream in(file);
      if (!in) throw Error("cannot open policy file '" + file.string() + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      AccessControlPolicy p;
      try {
        p = deserialize_policy(buf.str());
      } catch (const Error& e) {
        throw Error(file.string() + ": " + e.what());
      }
      insert_checked(snap, std::move(p));
    }
    return snap;
  }

 private:
  static void insert_checked(Snapshot& snap, AccessControlPolicy policy) {
    auto it = snap.find(policy.rule_id);
    if (it != snap.end()) {
      if (it->second.tool_name != policy.tool_name ||
          it->second.agent_role != policy.agent_role) {
        throw Error("rule_id collision: '" + policy.rule_id +
                    "' maps to both tool '" + it->second.tool_name +
                    "' and tool '" + policy.tool_name + "' under role '" +
                    policy.agent_role + "'");
      }
      it->second = std::move(policy);
    } else {
      snap.emplace(policy.rule_id, std::move(policy));
    }
  }

  mutable std::mutex mutex_;
  std::shared_ptr<const Snapshot> snapshot_;
};

// Writes one canonical policy file per (agent_role, tool_name):
// <dir>/<canonical_role>/<canonical_tool>.policy.json. Returns the paths
// written, sorted.
inline std::vector<std::filesystem::path> save_policy_bundle(
    const std::vector<AccessControlPolicy>& policies,
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  for (const AccessControlPolicy& p : policies) {
    fs::path folder = dir / canonical_name(p.agent_role);
    fs::create_directories(folder);
    fs::path file = folder / (canonical_name(p.tool_name) + ".policy.json");
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write policy file '" + file.string() + "'");
    out << serialize_policy(p);
    written.push_back(file);
  }
  std::sort(written.begin(), written.end());
  return written;
}

inline const AccessControlPolicy* find_policy(
    const PolicyRepository::Snapshot& snap, const std::string& agent_role,
    const std::string& tool_name) {
  auto it = snap.find(make_rule_id(agent_role, tool_name));
  if (it == snap.end()) return nullptr;
  return &it->second;
}

// True when the tool name appears in any loaded policy, under any role.
// Distinguishes an unknown tool from a known tool lacking a policy for the
// caller's role.
inline bool tool_known(const PolicyRepository::Snapshot& snap,
                       const std::string& tool_name) {
  for (const auto& [id, policy] : snap) {
    if (policy.tool_name == tool_name) return true;
  }
  return false;
}

}  // namespace guardian

#endif  // GUARDIAN_POLICY_HPP_
