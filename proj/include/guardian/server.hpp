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

#ifndef GUARDIAN_SERVER_HPP_
#define GUARDIAN_SERVER_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "guardian/enforce.hpp"
#include "guardian/error.hpp"
#include "guardian/policy.hpp"

namespace guardian {

enum class FailMode { kClosed, kOpen };

struct ServerConfig {
  std::string policy_dir;  // reload target; empty disables /v1/reload
  FailMode fail_mode = FailMode::kClosed;
  // Per-trace prefix entries expire this long after their last touch.
  std::int64_t prefix_ttl_ms = 3600000;
  EnforceConfig enforce;
};

namespace internal {

struct PrefixEntry {
  std::vector<std::string> tools;
  std::int64_t last_touch_ms = 0;
};

inline std::int64_t steady_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace internal

// Tracks prior tool names per trace for thin clients that cannot supply
// prior_tools themselves. Entries expire after the configured TTL.
class PrefixTable {
 public:
  explicit PrefixTable(std::int64_t ttl_ms) : ttl_ms_(ttl_ms) {}

  std::vector<std::string> get(const std::string& trace_id,
                               std::int64_t now_ms) {
    std::lock_guard<std::mutex> lock(mutex_);
    evict(now_ms);
    auto it = entries_.find(trace_id);
    if (it == entries_.end()) return {};
    it->second.last_touch_ms = now_ms;
    return it->second.tools;
  }

  void append(const std::string& trace_id, const std::string& tool,
              std::int64_t now_ms) {
    std::lock_guard<std::mutex> lock(mutex_);
    evict(now_ms);
    internal::PrefixEntry& entry = entries_[trace_id];
    entry.tools.push_back(tool);
    entry.last_touch_ms = now_ms;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

 private:
  void evict(std::int64_t now_ms) {
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (now_ms - it->second.last_touch_ms > ttl_ms_) {
        it = entries_.erase(it);
      } else {
        ++it;
      }
    }
  }

  mutable std::mutex mutex_;
  std::int64_t ttl_ms_;
  std::map<std::string, internal::PrefixEntry> entries_;
};

inline nlohmann::json verdict_to_json(const Verdict& verdict) {
  nlohmann::json violations = nlohmann::json::array();
  for (const Violation& v : verdict.violations) {
    nlohmann::json item;
    item["kind"] = to_string(v.kind);
    item["detail"] = v.detail;
    if (v.rule_index.has_value()) item["rule_index"] = *v.rule_index;
    violations.push_back(std::move(item));
  }
  return nlohmann::json{{"decision", to_string(verdict.decision)},
                        {"violations", std::move(violations)}};
}

// Parses a check request. Field names mirror InvocationContext exactly;
// a missing or mistyped field names itself in the thrown error.
inline InvocationContext parse_check_request(const nlohmann::json& body) {
  InvocationContext ctx;
  auto need_string = [&](const char* field) {
    if (!body.contains(field) || !body[field].is_string()) {
      throw Error(std::string("field '") + field + "' must be a string");
    }
    return body[field].get<std::string>();
  };
  auto optional_string = [&](const char* field) {
    if (!body.contains(field)) return std::string();
    if (!body[field].is_string()) {
      throw Error(std::string("field '") + field + "' must be a string");
    }
    return body[field].get<std::string>();
  };
  auto optional_int = [&](const char* field) -> std::int64_t {
    if (!body.contains(field)) return 0;
    if (!body[field].is_number_integer()) {
      throw Error(std::string("field '") + field + "' must be an integer");
    }
    return body[field].get<std::int64_t>();
  };
  ctx.agent_role = need_string("agent_role");
  ctx.tool_name = need_string("tool_name");
  ctx.tool_input = optional_string("tool_input");
  ctx.thoughts = optional_string("thoughts");
  ctx.input_tokens = optional_int("input_tokens");
  ctx.output_tokens = optional_int("output_tokens");
  ctx.timestamp_ms = optional_int("timestamp_ms");
  ctx.idle_ms = optional_int("idle_ms");
  ctx.processing_ms = optional_int("processing_ms");
  if (body.contains("prior_tools")) {
    if (!body["prior_tools"].is_array()) {
      throw Error("field 'prior_tools' must be an array of strings");
    }
    for (const auto& t : body["prior_tools"]) {
      if (!t.is_string()) {
        throw Error("field 'prior_tools' must be an array of strings");
      }
      ctx.prior_tools.push_back(t.get<std::string>());
    }
  }
  return ctx;
}

// HTTP surface over check_invocation. Stateless per request: prior_tools
// comes from the caller, or is resolved from a caller-provided trace_id via
// the prefix table. Internal failures honor the configured fail mode; the
// default is closed (terminate).
class EnforcementServer {
 public:
  EnforcementServer(PolicyRepository* repo, ServerConfig config)
      : repo_(repo),
        config_(std::move(config)),
        prefix_table_(config_.prefix_ttl_ms) {
    if (repo_ == nullptr) throw Error("server requires a policy repository");
    config_.enforce.validate();
    install_routes();
  }

  // Binds to an OS-assigned port; returns it. Pair with listen_after_bind().
  int bind_any(const std::string& host) {
    int port = server_.bind_to_any_port(host);
    if (port <= 0) throw Error("cannot bind to host '" + host + "'");
    return port;
  }

  bool bind(const std::string& host, int port) {
    return server_.bind_to_port(host, port);
  }

  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  bool is_running() const { return server_.is_running(); }

  KillRegistry& kills() { return kills_; }

 private:
  void install_routes() {
    server_.Get("/v1/health", [this](const httplib::Request&,
                                     httplib::Response& res) {
      nlohmann::json body;
      body["status"] = "ok";
      body["policies"] = repo_->snapshot()->size();
      body["tracked_traces"] = prefix_table_.size();
      res.set_content(body.dump(), "application/json");
    });

    server_.Post("/v1/check", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      handle_check(req, res);
    });

    server_.Post("/v1/reload", [this](const httplib::Request&,
                                      httplib::Response& res) {
      if (config_.policy_dir.empty()) {
        res.status = 400;
        res.set_content(
            nlohmann::json{{"error", "server started without a policy "
                                     "directory; reload is disabled"}}
                .dump(),
            "application/json");
        return;
      }
      try {
        repo_->reload(config_.policy_dir);
        nlohmann::json body;
        body["status"] = "reloaded";
        body["policies"] = repo_->snapshot()->size();
        res.set_content(body.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(nlohmann::json{{"error", e.what()},
                                       {"note", "prior snapshot retained"}}
                            .dump(),
                        "application/json");
      }
    });
  }

  void handle_check(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(
          nlohmann::json{{"error", std::string("invalid JSON: ") + e.what()}}
              .dump(),
          "application/json");
      return;
    }

    std::string trace_id;
    InvocationContext ctx;
    try {
      ctx = parse_check_request(body);
      if (body.contains("trace_id")) {
        if (!body["trace_id"].is_string()) {
          throw Error("field 'trace_id' must be a string");
        }
        trace_id = body["trace_id"].get<std::string>();
      }
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(),
                      "application/json");
      return;
    }

    try {
      std::int64_t now = internal::steady_now_ms();
      bool from_table = false;
      if (!trace_id.empty() && ctx.prior_tools.empty()) {
        ctx.prior_tools = prefix_table_.get(trace_id, now);
        from_table = true;
      }

      Verdict verdict;
      if (!trace_id.empty() && kills_.is_killed(trace_id)) {
        verdict.decision = Decision::kTerminate;
        Violation v;
        v.kind = ViolationKind::kFlow;
        v.detail = "trace '" + trace_id + "' was terminated earlier";
        verdict.violations.push_back(std::move(v));
      } else {
        verdict = check_invocation(ctx, *repo_->snapshot(), config_.enforce);
        if (!trace_id.empty()) {
          on_violation(trace_id, verdict, nullptr, &kills_);
          if (from_table && verdict.decision != Decision::kTerminate) {
            prefix_table_.append(trace_id, ctx.tool_name, now);
          }
        }
      }
      res.set_content(verdict_to_json(verdict).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      Verdict fallback;
      fallback.decision = config_.fail_mode == FailMode::kClosed
                              ? Decision::kTerminate
                              : Decision::kAllow;
      nlohmann::json out = verdict_to_json(fallback);
      out["error"] = e.what();
      res.set_content(out.dump(), "application/json");
    }
  }

  PolicyRepository* repo_;
  ServerConfig config_;
  PrefixTable prefix_table_;
  KillRegistry kills_;
  httplib::Server server_;
};

}  // namespace guardian

#endif  // GUARDIAN_SERVER_HPP_
