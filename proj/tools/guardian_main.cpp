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

// guardian: learn access-control policies from agent traces, inspect them,
// check single invocations, serve the enforcement endpoint, and run
// learn-then-enforce evaluations.
//
// Exit codes: 0 success/allow, 2 alert, 3 terminate, 1 usage or I/O error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "guardian/aggregator_http.hpp"
#include "guardian/error.hpp"
#include "guardian/eval.hpp"
#include "guardian/pipeline.hpp"
#include "guardian/policy.hpp"
#include "guardian/render.hpp"
#include "guardian/scenario.hpp"
#include "guardian/server.hpp"
#include "guardian/trace.hpp"

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string policy_dir;
  std::string bind = "127.0.0.1:7701";
  std::string fail_mode = "closed";
  std::string aggregator_endpoint;
  int aggregator_timeout_ms = 30000;
  double slack = 2.0;
};

std::vector<guardian::TraceEvent> load_events(const std::string& path) {
  std::vector<guardian::TraceEvent> events;
  fs::path root(path);
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw guardian::Error("trace directory is empty: " + path);
    }
  } else if (fs::is_regular_file(root)) {
    files.push_back(root);
  } else {
    throw guardian::Error("no such trace file or directory: " + path);
  }
  for (const fs::path& file : files) {
    std::vector<guardian::TraceEvent> part =
        guardian::parse_trace_file(file.string());
    events.insert(events.end(), part.begin(), part.end());
  }
  return events;
}

std::unique_ptr<guardian::Aggregator> make_aggregator(
    const std::string& kind, const GlobalOptions& global) {
  if (kind == "none") return std::make_unique<guardian::DeterministicAggregator>();
  if (kind == "external") {
    if (global.aggregator_endpoint.empty()) {
      throw guardian::Error(
          "--aggregator external requires --aggregator-endpoint or "
          "GUARDIAN_AGGREGATOR_ENDPOINT");
    }
    return std::make_unique<guardian::HttpAggregator>(
        global.aggregator_endpoint, global.aggregator_timeout_ms);
  }
  throw guardian::Error("unknown aggregator kind '" + kind +
                        "' (expected none|external)");
}

guardian::PolicyRepository::Snapshot load_snapshot(const std::string& dir) {
  if (dir.empty()) {
    throw guardian::Error(
        "no policy directory; pass --policies or set GUARDIAN_POLICY_DIR");
  }
  return guardian::PolicyRepository::load_bundle(dir);
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  std::size_t colon = bind.rfind(':');
  if (colon == std::string::npos || colon + 1 >= bind.size()) {
    throw guardian::Error("--bind must look like host:port, got '" + bind +
                          "'");
  }
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw guardian::Error("--bind port is not a number in '" + bind + "'");
  }
  return {bind.substr(0, colon), port};
}

guardian::FailMode parse_fail_mode(const std::string& mode) {
  if (mode == "closed") return guardian::FailMode::kClosed;
  if (mode == "open") return guardian::FailMode::kOpen;
  throw guardian::Error("--fail must be closed|open, got '" + mode + "'");
}

int run_learn(const GlobalOptions& global, const std::string& traces,
              const std::string& out, int min_freq, double merge_threshold,
              const std::string& aggregator_kind, int timezone_offset) {
  std::vector<guardian::TraceEvent> events = load_events(traces);
  std::vector<guardian::ExecutionSequence> sequences =
      guardian::assemble_sequences(events);

  guardian::LearnConfig cfg;
  cfg.min_frequency = min_freq;
  cfg.cluster.merge_threshold = merge_threshold;
  cfg.embed.timezone_offset_minutes = timezone_offset;

  std::unique_ptr<guardian::Aggregator> agg =
      make_aggregator(aggregator_kind, global);
  guardian::LearnResult result =
      guardian::learn_policies(sequences, *agg, cfg);
  auto written = guardian::save_policy_bundle(result.policies, out);

  std::cout << "learned " << result.policies.size() << " policies from "
            << sequences.size() << " traces (" << events.size()
            << " events)\n";
  for (const guardian::PolicyStats& stats : result.stats) {
    std::cout << "  " << stats.rule_id << "  tool=" << stats.tool_name
              << " clusters=" << stats.cluster_count
              << " patterns=" << stats.pattern_count;
    if (stats.aggregator_fallback) std::cout << " [deterministic fallback]";
    std::cout << "\n";
    for (const std::string& warning : stats.warnings) {
      std::cout << "    warning: " << warning << "\n";
    }
  }
  if (!result.flagged_rare.empty()) {
    std::cout << "flagged " << result.flagged_rare.size()
              << " rare trace(s) below --min-freq " << min_freq
              << " (excluded from learning):\n";
    for (const guardian::ExecutionSequence& seq : result.flagged_rare) {
      std::cout << "    " << seq.trace_id << "\n";
    }
  }
  std::cout << "wrote " << written.size() << " policy file(s) under " << out
            << "\n";
  return 0;
}

int run_check(const GlobalOptions& global, const guardian::InvocationContext& ctx) {
  guardian::PolicyRepository::Snapshot snapshot =
      load_snapshot(global.policy_dir);
  guardian::EnforceConfig cfg;
  cfg.attribute_slack_factor = global.slack;
  guardian::Verdict verdict = guardian::check_invocation(ctx, snapshot, cfg);
  std::cout << guardian::render_verdict(verdict);
  switch (verdict.decision) {
    case guardian::Decision::kAllow: return 0;
    case guardian::Decision::kAlert: return 2;
    case guardian::Decision::kTerminate: return 3;
  }
  return 1;
}

int run_serve(const GlobalOptions& global, std::int64_t prefix_ttl_ms) {
  if (global.policy_dir.empty()) {
    throw guardian::Error(
        "no policy directory; pass --policies or set GUARDIAN_POLICY_DIR");
  }
  guardian::PolicyRepository repo;
  repo.reload(global.policy_dir);
  guardian::ServerConfig config;
  config.policy_dir = global.policy_dir;
  config.fail_mode = parse_fail_mode(global.fail_mode);
  config.prefix_ttl_ms = prefix_ttl_ms;
  config.enforce.attribute_slack_factor = global.slack;

  guardian::EnforcementServer server(&repo, config);
  auto [host, port] = split_bind(global.bind);
  if (!server.bind(host, port)) {
    throw guardian::Error("cannot bind to " + global.bind);
  }
  std::cout << "guardian serving " << repo.snapshot()->size()
            << " policies on " << host << ":" << port << " (fail-"
            << global.fail_mode << ")\n"
            << std::flush;
  server.listen_after_bind();
  return 0;
}

std::string resolve_scenario_path(const std::string& app,
                                  const std::string& scenario,
                                  const std::string& scenario_dir) {
  if (!scenario.empty()) return scenario;
  if (app == "knowledge_assistant" || app == "it_support") {
    return (fs::path(scenario_dir) / (app + ".json")).string();
  }
  throw guardian::Error("unknown --app '" + app +
                        "' (expected knowledge_assistant|it_support, or pass "
                        "--scenario <file>)");
}

int run_eval(const GlobalOptions& global, const std::string& app,
             const std::string& scenario, const std::string& scenario_dir,
             int n_benign, int n_violation, int n_staging,
             std::uint64_t seed, std::uint64_t staging_seed,
             const std::string& aggregator_kind, const std::string& out) {
  guardian::ScenarioScript script = guardian::load_scenario_file(
      resolve_scenario_path(app, scenario, scenario_dir));
  std::cout << "scenario: " << script.app() << " role=" << script.agent_role()
            << "\nseeds: staging=" << staging_seed << " test=" << seed
            << "\n";

  std::vector<guardian::LabeledSample> staging =
      guardian::generate_scenarios(script, n_staging, 0, staging_seed);
  std::vector<guardian::LabeledSample> test =
      guardian::generate_scenarios(script, n_benign, n_violation, seed);

  std::unique_ptr<guardian::Aggregator> agg =
      make_aggregator(aggregator_kind, global);
  guardian::LearnConfig learn_cfg;
  guardian::EnforceConfig enforce_cfg;
  enforce_cfg.attribute_slack_factor = global.slack;
  guardian::ExperimentResult result = guardian::run_experiment(
      staging, test, *agg, learn_cfg, enforce_cfg);

  if (!out.empty()) {
    fs::create_directories(out);
    guardian::save_policy_bundle(result.learning.policies,
                                 (fs::path(out) / "policies").string());
    std::ofstream report_file(fs::path(out) / "report.json");
    report_file << guardian::report_to_json(result.report).dump(2) << "\n";
    std::cout << "wrote " << (fs::path(out) / "report.json").string()
              << " and " << result.learning.policies.size()
              << " policies under "
              << (fs::path(out) / "policies").string() << "\n";
  }
  std::cout << guardian::render_report_table(
      {{script.app(), result.report}});
  return 0;
}

int run_inspect(const GlobalOptions& global, const std::string& rule_id) {
  guardian::PolicyRepository::Snapshot snapshot =
      load_snapshot(global.policy_dir);
  if (!rule_id.empty()) {
    auto it = snapshot.find(rule_id);
    if (it == snapshot.end()) {
      throw guardian::Error("no policy with rule_id '" + rule_id + "'");
    }
    std::cout << guardian::render_policy(it->second);
    return 0;
  }
  for (const auto& [id, policy] : snapshot) {
    std::cout << guardian::render_policy(policy) << "\n";
  }
  std::cout << snapshot.size() << " policies\n";
  return 0;
}

int run_inspect_config(const GlobalOptions& global) {
  std::cout << "policy_dir = "
            << (global.policy_dir.empty() ? "(unset)" : global.policy_dir)
            << "\n"
            << "bind = " << global.bind << "\n"
            << "fail_mode = " << global.fail_mode << "\n"
            << "aggregator_endpoint = "
            << (global.aggregator_endpoint.empty()
                    ? "(unset; deterministic aggregator)"
                    : global.aggregator_endpoint)
            << "\n"
            << "aggregator_timeout_ms = " << global.aggregator_timeout_ms
            << "\n"
            << "attribute_slack_factor = " << global.slack << "\n"
            << "time_constraints_exempt_from_slack = true\n"
            << "merge_threshold_default = 0.35\n"
            << "min_frequency_default = 1\n"
            << "prefix_ttl_ms_default = 3600000\n"
            << "timezone_offset_minutes_default = 0\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guardian: context-aware access control for tool-calling "
               "agents"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read defaults from an INI/TOML file");

  GlobalOptions global;
  app.add_option("--policies", global.policy_dir, "Policy bundle directory")
      ->envname("GUARDIAN_POLICY_DIR");
  app.add_option("--bind", global.bind, "host:port for the serve subcommand")
      ->envname("GUARDIAN_BIND");
  app.add_option("--fail", global.fail_mode,
                 "Fail mode on internal errors: closed|open")
      ->envname("GUARDIAN_FAIL_MODE");
  app.add_option("--aggregator-endpoint", global.aggregator_endpoint,
                 "HTTP endpoint of an external pattern aggregator")
      ->envname("GUARDIAN_AGGREGATOR_ENDPOINT");
  app.add_option("--aggregator-timeout-ms", global.aggregator_timeout_ms,
                 "External aggregator timeout in milliseconds")
      ->envname("GUARDIAN_AGGREGATOR_TIMEOUT_MS");
  app.add_option("--slack", global.slack,
                 "Attribute slack factor (time windows stay exact)");

  // learn
  auto* learn = app.add_subcommand("learn", "Learn policies from trace logs");
  std::string traces, out_dir = "policies";
  int min_freq = 1;
  double merge_threshold = 0.35;
  std::string aggregator_kind = "none";
  int timezone_offset = 0;
  learn->add_option("--traces", traces, "Trace log file or directory")
      ->required();
  learn->add_option("--out", out_dir, "Output policy directory");
  learn->add_option("--min-freq", min_freq,
                    "Flag tool paths observed fewer than this many times");
  learn->add_option("--merge-threshold", merge_threshold,
                    "Cluster merge threshold on cosine distance");
  learn->add_option("--aggregator", aggregator_kind,
                    "Pattern aggregator: none|external");
  learn->add_option("--timezone-offset", timezone_offset,
                    "Minutes added to UTC when computing hours");

  // check
  auto* check = app.add_subcommand("check", "Check one tool invocation");
  guardian::InvocationContext ctx;
  std::string prior_joined;
  check->add_option("--role", ctx.agent_role, "Agent role")->required();
  check->add_option("--tool", ctx.tool_name, "Tool name")->required();
  check->add_option("--input", ctx.tool_input, "Tool input text");
  check->add_option("--thoughts", ctx.thoughts, "Model thoughts text");
  check->add_option("--prior", prior_joined,
                    "Comma-separated prior tool names");
  check->add_option("--input-tokens", ctx.input_tokens, "Input token count");
  check->add_option("--output-tokens", ctx.output_tokens,
                    "Output token count");
  check->add_option("--timestamp-ms", ctx.timestamp_ms, "UTC milliseconds");
  check->add_option("--idle-ms", ctx.idle_ms, "Idle time before the call");
  check->add_option("--processing-ms", ctx.processing_ms,
                    "Elapsed time since the trace started");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the enforcement endpoint");
  std::int64_t prefix_ttl_ms = 3600000;
  serve->add_option("--prefix-ttl-ms", prefix_ttl_ms,
                    "TTL for per-trace prefix tracking");

  // eval
  auto* eval = app.add_subcommand(
      "eval", "Generate corpora, learn, enforce, and report metrics");
  std::string eval_app = "knowledge_assistant", scenario_path,
              scenario_dir = "data/scenarios", eval_out;
  int n_benign = 40, n_violation = 10, n_staging = 60;
  std::uint64_t seed = 202, staging_seed = 101;
  std::string eval_aggregator = "none";
  eval->add_option("--app", eval_app,
                   "Application: knowledge_assistant|it_support");
  eval->add_option("--scenario", scenario_path,
                   "Scenario file (overrides --app lookup)");
  eval->add_option("--scenario-dir", scenario_dir,
                   "Directory with <app>.json scenario scripts");
  eval->add_option("--n-benign", n_benign, "Held-out benign samples");
  eval->add_option("--n-violation", n_violation, "Violation samples");
  eval->add_option("--n-staging", n_staging, "Staging (training) samples");
  eval->add_option("--seed", seed, "Seed for the test corpus");
  eval->add_option("--staging-seed", staging_seed,
                   "Seed for the staging corpus");
  eval->add_option("--aggregator", eval_aggregator,
                   "Pattern aggregator: none|external");
  eval->add_option("--out", eval_out, "Directory for report and policies");

  // inspect (+ inspect config)
  auto* inspect = app.add_subcommand(
      "inspect", "Render policies in a human-readable layout");
  std::string rule_id;
  inspect->add_option("--rule-id", rule_id, "Render only this rule id");
  auto* inspect_config = inspect->add_subcommand(
      "config", "Print every effective configuration value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (learn->parsed()) {
      return run_learn(global, traces, out_dir, min_freq, merge_threshold,
                       aggregator_kind, timezone_offset);
    }
    if (check->parsed()) {
      if (!prior_joined.empty()) {
        std::stringstream ss(prior_joined);
        std::string tool;
        while (std::getline(ss, tool, ',')) {
          if (!tool.empty()) ctx.prior_tools.push_back(tool);
        }
      }
      return run_check(global, ctx);
    }
    if (serve->parsed()) return run_serve(global, prefix_ttl_ms);
    if (eval->parsed()) {
      return run_eval(global, eval_app, scenario_path, scenario_dir, n_benign,
                      n_violation, n_staging, seed, staging_seed,
                      eval_aggregator, eval_out);
    }
    if (inspect->parsed()) {
      if (inspect_config->parsed()) return run_inspect_config(global);
      return run_inspect(global, rule_id);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
