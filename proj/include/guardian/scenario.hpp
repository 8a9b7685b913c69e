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

// Scenario-driven corpus generation. Applications are data files, not code:
// a scenario document scripts the benign tool flow, the parameter pools, the
// violation recipes, and the hallucination recipes, so new applications can
// be added without rebuilding.
//
// Document layout (JSON):
//   app: short identifier used in trace ids
//   agent_role: role recorded on every event
//   epoch_day_ms: UTC midnight the corpus starts at; sample i runs on day i
//   start_hours: fractional wall-clock hours cycled across samples
//   pools: name -> {scope: sample|event, mode: cycle|draw, values: [...]}
//   linked_pools: name -> {key: <pool>, scope, mode, values: {key: [...]}}
//   family_vars: name -> {schedule_prefix: [...], families: [{prefix,
//     suffix, middles: [...]}], middle_overrides: {"<sample>": "..."}}
//   token_pools: tool -> {input: [lo, hi], output: [lo, hi]}
//   steps: [{tool, input, thoughts, result, repeat: optional pool spec}]
//   violations: [{name, mutations: [...]}]
//   hallucinations: [{benign_index, mutations: [...]}]
//
// Mutations: set_input {step, value}, swap_steps {a, b}, insert_tool {at,
// tool, input, thoughts, result, input_tokens, output_tokens},
// duplicate_step {step}. Violation bases are generated with per-step repeats
// forced to one occurrence so step indices in recipes are stable.
// Hallucination recipes rewrite benign samples as generated, so they must
// target event positions that no earlier repeatable step can shift.
//
// Every draw comes from one seeded generator in document order, so a fixed
// (document, n_benign, n_violation, seed) quadruple reproduces the corpus
// byte for byte. Hallucination recipes mark benign samples only when the
// corpus also contains violations; all-benign staging corpora stay clean.

#ifndef GUARDIAN_SCENARIO_HPP_
#define GUARDIAN_SCENARIO_HPP_

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "guardian/error.hpp"
#include "guardian/eval.hpp"
#include "guardian/trace.hpp"

namespace guardian {

namespace internal {

class PoolCursor {
 public:
  PoolCursor() = default;
  PoolCursor(std::vector<std::string> values, bool cycle)
      : values_(std::move(values)), cycle_(cycle) {
    if (values_.empty()) throw Error("pool has no values");
  }

  const std::string& next(std::mt19937_64& rng) {
    if (cycle_) {
      const std::string& v = values_[cursor_ % values_.size()];
      cursor_ += 1;
      return v;
    }
    std::uniform_int_distribution<std::size_t> pick(0, values_.size() - 1);
    return values_[pick(rng)];
  }

 private:
  std::vector<std::string> values_;
  bool cycle_ = true;
  std::size_t cursor_ = 0;
};

struct ScenarioState {
  std::map<std::string, PoolCursor> pools;            // plain pools
  std::map<std::string, PoolCursor> linked;           // "name\0key" cursors
  std::map<std::string, std::size_t> family_cursors;  // "var\0family"
  std::map<std::string, PoolCursor> repeats;          // per step index
  std::mt19937_64 rng;
};

inline std::string pool_scope(const nlohmann::json& pool) {
  std::string scope = pool.value("scope", "sample");
  if (scope != "sample" && scope != "event") {
    throw Error("pool scope must be 'sample' or 'event', got '" + scope + "'");
  }
  return scope;
}

inline bool pool_cycles(const nlohmann::json& pool) {
  std::string mode = pool.value("mode", "cycle");
  if (mode != "cycle" && mode != "draw") {
    throw Error("pool mode must be 'cycle' or 'draw', got '" + mode + "'");
  }
  return mode == "cycle";
}

inline std::vector<std::string> string_list(const nlohmann::json& j,
                                            const std::string& what) {
  if (!j.is_array() || j.empty()) {
    throw Error("scenario field '" + what + "' must be a non-empty array");
  }
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) {
      throw Error("scenario field '" + what + "' must contain strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

// Substitutes {name} placeholders from the resolved variable map. Unknown
// names are an authoring error, not silently kept.
inline std::string substitute(const std::string& text,
                              const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t close = text.find('}', i + 1);
      if (close == std::string::npos) {
        throw Error("unterminated placeholder in template '" + text + "'");
      }
      std::string name = text.substr(i + 1, close - i - 1);
      auto it = vars.find(name);
      if (it == vars.end()) {
        throw Error("template references unknown variable '" + name + "'");
      }
      out += it->second;
      i = close + 1;
    } else {
      out += text[i];
      i += 1;
    }
  }
  return out;
}

inline std::int64_t draw_tokens(const nlohmann::json& range,
                                const std::string& what,
                                std::mt19937_64& rng) {
  if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
      !range[1].is_number_integer()) {
    throw Error("scenario field '" + what + "' must be [lo, hi] integers");
  }
  std::int64_t lo = range[0].get<std::int64_t>();
  std::int64_t hi = range[1].get<std::int64_t>();
  if (lo < 0 || hi < lo) {
    throw Error("scenario field '" + what + "' must satisfy 0 <= lo <= hi");
  }
  std::uniform_int_distribution<std::int64_t> pick(lo, hi);
  return pick(rng);
}

}  // namespace internal

class ScenarioScript {
 public:
  explicit ScenarioScript(nlohmann::json doc) : doc_(std::move(doc)) {
    require_string("app");
    require_string("agent_role");
    if (!doc_.contains("epoch_day_ms") ||
        !doc_["epoch_day_ms"].is_number_integer()) {
      throw Error("scenario field 'epoch_day_ms' must be an integer");
    }
    if (!doc_.contains("start_hours") || !doc_["start_hours"].is_array() ||
        doc_["start_hours"].empty()) {
      throw Error("scenario field 'start_hours' must be a non-empty array");
    }
    for (const auto& h : doc_["start_hours"]) {
      if (!h.is_number() || h.get<double>() < 0.0 || h.get<double>() >= 24.0) {
        throw Error("scenario field 'start_hours' entries must be in [0, 24)");
      }
    }
    if (!doc_.contains("steps") || !doc_["steps"].is_array() ||
        doc_["steps"].empty()) {
      throw Error("scenario field 'steps' must be a non-empty array");
    }
    for (const auto& step : doc_["steps"]) {
      for (const char* field : {"tool", "input", "thoughts", "result"}) {
        if (!step.contains(field) || !step[field].is_string()) {
          throw Error(std::string("scenario step field '") + field +
                      "' must be a string");
        }
      }
      std::string tool = step["tool"].get<std::string>();
      if (!doc_.contains("token_pools") || !doc_["token_pools"].contains(tool)) {
        throw Error("scenario field 'token_pools' must cover tool '" + tool +
                    "'");
      }
    }
  }

  const nlohmann::json& doc() const { return doc_; }
  std::string app() const { return doc_["app"].get<std::string>(); }
  std::string agent_role() const {
    return doc_["agent_role"].get<std::string>();
  }

 private:
  void require_string(const char* field) const {
    if (!doc_.contains(field) || !doc_[field].is_string() ||
        doc_[field].get<std::string>().empty()) {
      throw Error(std::string("scenario field '") + field +
                  "' must be a non-empty string");
    }
  }

  nlohmann::json doc_;
};

namespace internal {

inline std::string format_index(int value, int width) {
  std::string digits = std::to_string(value);
  while (static_cast<int>(digits.size()) < width) digits.insert(0, "0");
  return digits;
}

// Resolves one variable map for either a whole sample (scope "sample") or a
// single event (scope "event"). Pool iteration follows JSON object order,
// which nlohmann keeps sorted by key, so resolution order is deterministic.
inline void resolve_vars(const nlohmann::json& doc, const std::string& scope,
                         int sample_index, ScenarioState& state,
                         std::map<std::string, std::string>& vars) {
  if (doc.contains("pools")) {
    for (const auto& [name, pool] : doc["pools"].items()) {
      if (pool_scope(pool) != scope) continue;
      auto it = state.pools.find(name);
      if (it == state.pools.end()) {
        it = state.pools
                 .emplace(name, PoolCursor(string_list(pool["values"],
                                                       "pools." + name),
                                           pool_cycles(pool)))
                 .first;
      }
      vars[name] = it->second.next(state.rng);
    }
  }
  if (doc.contains("linked_pools")) {
    for (const auto& [name, pool] : doc["linked_pools"].items()) {
      if (pool_scope(pool) != scope) continue;
      std::string key_pool = pool.value("key", "");
      auto key_it = vars.find(key_pool);
      if (key_it == vars.end()) {
        throw Error("linked pool '" + name + "' needs variable '" + key_pool +
                    "' resolved first");
      }
      const std::string& key = key_it->second;
      if (!pool["values"].contains(key)) {
        throw Error("linked pool '" + name + "' has no values for key '" +
                    key + "'");
      }
      std::string cursor_key = name + '\0' + key;
      auto it = state.linked.find(cursor_key);
      if (it == state.linked.end()) {
        it = state.linked
                 .emplace(cursor_key,
                          PoolCursor(string_list(pool["values"][key],
                                                 "linked_pools." + name),
                                     pool_cycles(pool)))
                 .first;
      }
      vars[name] = it->second.next(state.rng);
    }
  }
  if (scope == "sample" && doc.contains("family_vars")) {
    for (const auto& [name, spec] : doc["family_vars"].items()) {
      const nlohmann::json& families = spec["families"];
      if (!families.is_array() || families.empty()) {
        throw Error("family var '" + name + "' has no families");
      }
      std::size_t family = static_cast<std::size_t>(sample_index) %
                           families.size();
      if (spec.contains("schedule_prefix") &&
          sample_index <
              static_cast<int>(spec["schedule_prefix"].size())) {
        family = spec["schedule_prefix"][sample_index].get<std::size_t>();
        if (family >= families.size()) {
          throw Error("family var '" + name +
                      "' schedule references a missing family");
        }
      }
      const nlohmann::json& fam = families[family];
      std::string middle;
      std::string override_key = std::to_string(sample_index);
      if (spec.contains("middle_overrides") &&
          spec["middle_overrides"].contains(override_key)) {
        middle = spec["middle_overrides"][override_key].get<std::string>();
      } else {
        std::vector<std::string> middles =
            string_list(fam["middles"], "family_vars." + name + ".middles");
        std::string cursor_key = name + '\0' + std::to_string(family);
        std::size_t& cursor = state.family_cursors[cursor_key];
        middle = middles[cursor % middles.size()];
        cursor += 1;
      }
      vars[name] = fam["prefix"].get<std::string>() + middle +
                   fam["suffix"].get<std::string>();
    }
  }
}

inline TraceEvent make_event(const nlohmann::json& doc,
                             const nlohmann::json& step,
                             const std::string& trace_id, int sample_index,
                             std::int64_t timestamp_ms, ScenarioState& state,
                             std::map<std::string, std::string> vars) {
  resolve_vars(doc, "event", sample_index, state, vars);
  std::string tool = step["tool"].get<std::string>();
  const nlohmann::json& tokens = doc["token_pools"][tool];
  TraceEvent e;
  e.trace_id = trace_id;
  e.agent_role = doc["agent_role"].get<std::string>();
  e.tool_name = tool;
  e.tool_input = substitute(step["input"].get<std::string>(), vars);
  e.thoughts = substitute(step["thoughts"].get<std::string>(), vars);
  e.task_result = substitute(step["result"].get<std::string>(), vars);
  e.timestamp_ms = timestamp_ms;
  e.input_tokens = draw_tokens(tokens["input"], "token_pools." + tool +
                               ".input", state.rng);
  e.output_tokens = draw_tokens(tokens["output"], "token_pools." + tool +
                                ".output", state.rng);
  return e;
}

inline ExecutionSequence generate_sample(const nlohmann::json& doc,
                                         const std::string& trace_id,
                                         int sample_index,
                                         bool force_single_repeats,
                                         ScenarioState& state) {
  const nlohmann::json& hours = doc["start_hours"];
  double hour = hours[sample_index % hours.size()].get<double>();
  std::int64_t timestamp_ms = doc["epoch_day_ms"].get<std::int64_t>() +
                              static_cast<std::int64_t>(sample_index) *
                                  86400000 +
                              std::llround(hour * 3600000.0);

  std::map<std::string, std::string> sample_vars;
  resolve_vars(doc, "sample", sample_index, state, sample_vars);

  ExecutionSequence seq;
  seq.trace_id = trace_id;
  seq.agent_role = doc["agent_role"].get<std::string>();
  const nlohmann::json& steps = doc["steps"];
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const nlohmann::json& step = steps[s];
    int occurrences = 1;
    if (!force_single_repeats && step.contains("repeat")) {
      std::string cursor_key = std::to_string(s);
      auto it = state.repeats.find(cursor_key);
      if (it == state.repeats.end()) {
        it = state.repeats
                 .emplace(cursor_key,
                          PoolCursor(string_list(step["repeat"]["values"],
                                                 "steps.repeat"),
                                     pool_cycles(step["repeat"])))
                 .first;
      }
      occurrences = std::stoi(it->second.next(state.rng));
      if (occurrences < 1) throw Error("step repeat count must be >= 1");
    }
    for (int occ = 0; occ < occurrences; ++occ) {
      seq.events.push_back(make_event(doc, step, trace_id, sample_index,
                                      timestamp_ms, state, sample_vars));
    }
  }
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    seq.events[i].seq_index = static_cast<int>(i);
  }
  return seq;
}

inline void renumber(ExecutionSequence& seq) {
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    seq.events[i].seq_index = static_cast<int>(i);
  }
}

inline void apply_mutations(const nlohmann::json& doc,
                            const nlohmann::json& mutations,
                            ExecutionSequence& seq) {
  if (!mutations.is_array() || mutations.empty()) {
    throw Error("recipe field 'mutations' must be a non-empty array");
  }
  for (const auto& m : mutations) {
    std::string op = m.value("op", "");
    if (op == "set_input") {
      std::size_t step = m.at("step").get<std::size_t>();
      if (step >= seq.events.size()) {
        throw Error("set_input step out of range");
      }
      seq.events[step].tool_input = m.at("value").get<std::string>();
    } else if (op == "swap_steps") {
      std::size_t a = m.at("a").get<std::size_t>();
      std::size_t b = m.at("b").get<std::size_t>();
      if (a >= seq.events.size() || b >= seq.events.size()) {
        throw Error("swap_steps index out of range");
      }
      std::swap(seq.events[a], seq.events[b]);
    } else if (op == "insert_tool") {
      std::size_t at = m.at("at").get<std::size_t>();
      if (at > seq.events.size()) throw Error("insert_tool index out of range");
      TraceEvent e;
      e.trace_id = seq.trace_id;
      e.agent_role = seq.agent_role;
      e.tool_name = m.at("tool").get<std::string>();
      e.tool_input = m.at("input").get<std::string>();
      e.thoughts = m.value("thoughts", "");
      e.task_result = m.value("result", "");
      e.timestamp_ms = seq.events.empty() ? doc["epoch_day_ms"].get<std::int64_t>()
                                          : seq.events.front().timestamp_ms;
      e.input_tokens = m.value("input_tokens", 256);
      e.output_tokens = m.value("output_tokens", 256);
      seq.events.insert(seq.events.begin() + static_cast<std::ptrdiff_t>(at),
                        std::move(e));
    } else if (op == "duplicate_step") {
      std::size_t step = m.at("step").get<std::size_t>();
      if (step >= seq.events.size()) {
        throw Error("duplicate_step index out of range");
      }
      TraceEvent copy = seq.events[step];
      seq.events.insert(
          seq.events.begin() + static_cast<std::ptrdiff_t>(step) + 1,
          std::move(copy));
    } else {
      throw Error("unknown mutation op '" + op + "'");
    }
  }
  renumber(seq);
}

}  // namespace internal

// Generates n_benign benign samples followed by n_violation violation
// samples. Violation recipes cycle if n_violation exceeds the recipe list.
// Hallucination recipes rewrite the benign samples they name; they apply
// only when n_violation > 0 so staging corpora stay clean.
inline std::vector<LabeledSample> generate_scenarios(
    const ScenarioScript& script, int n_benign, int n_violation,
    std::uint64_t seed) {
  if (n_benign < 0 || n_violation < 0) {
    throw Error("sample counts must be >= 0");
  }
  const nlohmann::json& doc = script.doc();
  internal::ScenarioState state;
  state.rng.seed(seed);

  std::vector<LabeledSample> samples;
  samples.reserve(static_cast<std::size_t>(n_benign + n_violation));
  for (int i = 0; i < n_benign; ++i) {
    LabeledSample sample;
    sample.label = SampleLabel::kBenign;
    sample.trace = internal::generate_sample(
        doc, script.app() + "-benign-" + internal::format_index(i, 3), i,
        /*force_single_repeats=*/false, state);
    samples.push_back(std::move(sample));
  }

  if (n_violation > 0) {
    const nlohmann::json& recipes = doc.contains("violations")
                                        ? doc["violations"]
                                        : nlohmann::json::array();
    if (!recipes.is_array() || recipes.empty()) {
      throw Error("scenario has no violation recipes but n_violation > 0");
    }
    for (int v = 0; v < n_violation; ++v) {
      const nlohmann::json& recipe = recipes[static_cast<std::size_t>(v) %
                                             recipes.size()];
      std::string name = recipe.value("name", "unnamed");
      LabeledSample sample;
      sample.label = SampleLabel::kViolation;
      sample.trace = internal::generate_sample(
          doc,
          script.app() + "-viol-" + internal::format_index(v, 2) + "-" + name,
          n_benign + v, /*force_single_repeats=*/true, state);
      internal::apply_mutations(doc, recipe["mutations"], sample.trace);
      samples.push_back(std::move(sample));
    }

    if (doc.contains("hallucinations")) {
      for (const auto& recipe : doc["hallucinations"]) {
        int index = recipe.at("benign_index").get<int>();
        if (index < 0 || index >= n_benign) continue;
        LabeledSample& sample = samples[static_cast<std::size_t>(index)];
        internal::apply_mutations(doc, recipe["mutations"], sample.trace);
        sample.hallucination = true;
        sample.trace.trace_id = script.app() + "-halluc-" +
                                internal::format_index(index, 3);
        for (TraceEvent& e : sample.trace.events) {
          e.trace_id = sample.trace.trace_id;
        }
      }
    }
  }
  return samples;
}

inline ScenarioScript load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("scenario file " + path + ": " + e.what());
  }
  return ScenarioScript(std::move(doc));
}

}  // namespace guardian

#endif  // GUARDIAN_SCENARIO_HPP_
