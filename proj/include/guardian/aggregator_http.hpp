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

#ifndef GUARDIAN_AGGREGATOR_HTTP_HPP_
#define GUARDIAN_AGGREGATOR_HTTP_HPP_

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "guardian/error.hpp"
#include "guardian/rules.hpp"

namespace guardian {

// Remote pattern aggregator (typically an LLM service). The wire contract is
// minimal: POST /v1/aggregate with {"drafts": [...], "samples": [...]},
// answered by {"patterns": [...]}. Any transport or schema failure throws,
// which the aggregate() caller converts into the deterministic fallback plus
// a warning; a remote service can therefore never weaken a policy. Cluster
// merging stays local: remote proposals cover pattern text only.
class HttpAggregator : public Aggregator {
 public:
  explicit HttpAggregator(std::string endpoint, int timeout_ms = 30000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
    if (endpoint_.empty()) throw Error("aggregator endpoint is empty");
    if (timeout_ms_ <= 0) throw Error("aggregator timeout must be positive");
  }

  std::string name() const override { return "http:" + endpoint_; }

  std::optional<std::vector<std::string>> aggregate(
      const std::vector<std::string>& drafts,
      const std::vector<std::string>& samples) override {
    httplib::Client client(endpoint_);
    auto timeout = std::chrono::milliseconds(timeout_ms_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    nlohmann::json request;
    request["drafts"] = drafts;
    request["samples"] = samples;
    httplib::Result res =
        client.Post("/v1/aggregate", request.dump(), "application/json");
    if (!res) {
      throw Error("aggregator '" + endpoint_ + "' unreachable: " +
                  httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error("aggregator '" + endpoint_ + "' returned status " +
                  std::to_string(res->status));
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error("aggregator response is not valid JSON: " +
                  std::string(e.what()));
    }
    if (!body.contains("patterns") || !body["patterns"].is_array()) {
      throw Error("aggregator response lacks a 'patterns' array");
    }
    std::vector<std::string> patterns;
    for (const auto& p : body["patterns"]) {
      if (!p.is_string()) {
        throw Error("aggregator response 'patterns' must contain strings");
      }
      patterns.push_back(p.get<std::string>());
    }
    return patterns;
  }

 private:
  std::string endpoint_;
  int timeout_ms_;
};

}  // namespace guardian

#endif  // GUARDIAN_AGGREGATOR_HTTP_HPP_
