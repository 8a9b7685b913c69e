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

// End-to-end tests over the guardian binary. Each test shells out to the
// built executable with a scrubbed environment, captures stdout/stderr to
// temp files, and asserts on exit codes and output.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "guardian/patterns.hpp"
#include "guardian/policy.hpp"

namespace guardian {
namespace {

using ::testing::HasSubstr;
using ::testing::StartsWith;
namespace fs = std::filesystem;

constexpr const char* kCliPath = GUARDIAN_CLI_PATH;
constexpr const char* kDataDir = GUARDIAN_DATA_DIR;

class ScopedTempDir {
 public:
  ScopedTempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("guardian_cli_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~ScopedTempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string ReadAll(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the binary with GUARDIAN_* scrubbed from the environment so tests are
// hermetic; extra_env entries are re-exported on top of the scrubbed set.
CliResult RunCli(const std::string& args, const std::string& extra_env = "") {
  static std::atomic<int> counter{0};
  int id = counter.fetch_add(1);
  fs::path out_file =
      fs::temp_directory_path() / ("guardian_cli_out_" +
                                   std::to_string(::getpid()) + "_" +
                                   std::to_string(id));
  fs::path err_file =
      fs::temp_directory_path() / ("guardian_cli_err_" +
                                   std::to_string(::getpid()) + "_" +
                                   std::to_string(id));
  std::string cmd =
      "env -u GUARDIAN_POLICY_DIR -u GUARDIAN_BIND -u GUARDIAN_FAIL_MODE "
      "-u GUARDIAN_AGGREGATOR_ENDPOINT -u GUARDIAN_AGGREGATOR_TIMEOUT_MS " +
      (extra_env.empty() ? std::string() : extra_env + " ") + "\"" +
      std::string(kCliPath) + "\" " + args + " > \"" + out_file.string() +
      "\" 2> \"" + err_file.string() + "\"";
  int raw = std::system(cmd.c_str());

  CliResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = ReadAll(out_file);
  result.err = ReadAll(err_file);
  std::error_code ec;
  fs::remove(out_file, ec);
  fs::remove(err_file, ec);
  return result;
}

ClusterRule ReaderRule() {
  ClusterRule r;
  r.rule_index = 0;
  r.support = 1;
  r.textual = TextualPredicate({escape_literal("./notes.txt")});
  r.attribute[0] = {50.0, 200.0};
  r.attribute[1] = {0.0, 1e9};
  r.attribute[2] = {0.0, 23.999};
  r.attribute[3] = {0.0, 23.999};
  r.attribute[4] = {0.0, 1e9};
  r.attribute[5] = {0.0, 1e9};
  return r;
}

// One-policy bundle for the check/inspect tests: role alpha may read
// ./notes.txt either cold or after list_files.
fs::path WriteReaderBundle(const ScopedTempDir& dir) {
  ToolFlowSpec flow;
  flow.tool_name = "read_file";
  flow.repeat = true;
  flow.required_leading_contexts = {{}, {"list_files"}};
  AccessControlPolicy policy =
      build_policy("alpha", "read_file", {ReaderRule()}, std::move(flow),
                   EmbedConfig{}, 0, 1);
  save_policy_bundle({policy}, dir.path());
  return dir.path();
}

// (relative path, bytes) for every regular file under root, sorted.
std::vector<std::pair<std::string, std::string>> DirContents(
    const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    entries.emplace_back(fs::relative(entry.path(), root).string(),
                         ReadAll(entry.path()));
  }
  std::sort(entries.begin(), entries.end());
  return entries;
}

std::string FixturePath() {
  return std::string(kDataDir) + "/fixtures/staging_knowledge_assistant.jsonl";
}

TEST(CheckCommand, ExitCodesFollowTheDecision) {
  ScopedTempDir dir;
  WriteReaderBundle(dir);
  const std::string base = "--policies \"" + dir.str() + "\" check "
                           "--role alpha --tool read_file "
                           "--timestamp-ms 36000000 ";

  CliResult allow = RunCli(base + "--input ./notes.txt --input-tokens 100");
  EXPECT_EQ(allow.exit_code, 0);
  EXPECT_EQ(allow.out, "decision: allow\n");
  EXPECT_TRUE(allow.err.empty());

  CliResult alert = RunCli(base + "--input ./notes.txt --input-tokens 401");
  EXPECT_EQ(alert.exit_code, 2);
  EXPECT_EQ(alert.out,
            "decision: alert\n"
            "violation: attribute (rule 0): max_input_tokens = 401 outside "
            "slack-widened bounds [25, 400] of rule 0\n");

  CliResult terminate =
      RunCli(base + "--input ./etc-passwd --input-tokens 100");
  EXPECT_EQ(terminate.exit_code, 3);
  EXPECT_THAT(terminate.out, StartsWith("decision: terminate\n"));
  EXPECT_THAT(terminate.out,
              HasSubstr("input does not full-match any pattern of rule 0"));

  CliResult flow = RunCli(base +
                          "--input ./notes.txt --input-tokens 100 "
                          "--prior send_email,list_files");
  EXPECT_EQ(flow.exit_code, 3);
  EXPECT_THAT(flow.out, HasSubstr("violation: flow:"));
  EXPECT_THAT(flow.out, HasSubstr("prior path '-- send_email -- list_files'"));

  // Widening the slack from the command line clears the alert.
  CliResult wide = RunCli("--policies \"" + dir.str() + "\" --slack 3 check "
                          "--role alpha --tool read_file "
                          "--timestamp-ms 36000000 "
                          "--input ./notes.txt --input-tokens 401");
  EXPECT_EQ(wide.exit_code, 0);
}

TEST(CheckCommand, PolicyDirComesFromFlagOrEnvironment) {
  ScopedTempDir dir;
  WriteReaderBundle(dir);
  const std::string args = "check --role alpha --tool read_file "
                           "--input ./notes.txt --input-tokens 100 "
                           "--timestamp-ms 36000000";

  CliResult missing = RunCli(args);
  EXPECT_EQ(missing.exit_code, 1);
  EXPECT_THAT(missing.err, HasSubstr("error: no policy directory"));
  EXPECT_THAT(missing.err, HasSubstr("GUARDIAN_POLICY_DIR"));

  CliResult from_env =
      RunCli(args, "GUARDIAN_POLICY_DIR=\"" + dir.str() + "\"");
  EXPECT_EQ(from_env.exit_code, 0);
  EXPECT_EQ(from_env.out, "decision: allow\n");
}

TEST(LearnCommand, ReportsStatsFlagsRareTracesAndWritesTheBundle) {
  ScopedTempDir out;
  CliResult learn = RunCli("learn --traces \"" + FixturePath() +
                           "\" --out \"" + out.str() + "\" --min-freq 3");
  ASSERT_EQ(learn.exit_code, 0) << learn.err;
  EXPECT_THAT(learn.out, HasSubstr(" policies from 60 traces (348 events)"));
  EXPECT_THAT(learn.out, HasSubstr("  senior_data_researcher/"));
  EXPECT_THAT(learn.out,
              HasSubstr("flagged 2 rare trace(s) below --min-freq 3 "
                        "(excluded from learning):"));
  EXPECT_THAT(learn.out, HasSubstr("ka-staging-shortcut-001"));
  EXPECT_THAT(learn.out, HasSubstr("ka-staging-recheck-001"));

  std::size_t files = DirContents(out.path()).size();
  ASSERT_GE(files, 1u);
  EXPECT_THAT(learn.out, HasSubstr("wrote " + std::to_string(files) +
                                   " policy file(s) under " + out.str()));

  CliResult inspect = RunCli("--policies \"" + out.str() + "\" inspect");
  ASSERT_EQ(inspect.exit_code, 0) << inspect.err;
  EXPECT_THAT(inspect.out, HasSubstr(std::to_string(files) + " policies\n"));
}

TEST(LearnCommand, IsByteDeterministicAcrossRuns) {
  ScopedTempDir first;
  ScopedTempDir second;
  const std::string base = "learn --traces \"" + FixturePath() +
                           "\" --min-freq 3 --out \"";
  CliResult a = RunCli(base + first.str() + "\"");
  ASSERT_EQ(a.exit_code, 0) << a.err;
  CliResult b = RunCli(base + second.str() + "\"");
  ASSERT_EQ(b.exit_code, 0) << b.err;

  auto lhs = DirContents(first.path());
  auto rhs = DirContents(second.path());
  ASSERT_FALSE(lhs.empty());
  EXPECT_EQ(lhs, rhs);
}

TEST(EvalCommand, PrintsSeedsTheTableAndWritesArtifacts) {
  ScopedTempDir out;
  CliResult eval = RunCli(
      "eval --app knowledge_assistant --scenario-dir \"" +
      std::string(kDataDir) + "/scenarios\" --n-benign 6 --n-violation 2 "
      "--n-staging 12 --seed 202 --staging-seed 101 --out \"" + out.str() +
      "\"");
  ASSERT_EQ(eval.exit_code, 0) << eval.err;
  EXPECT_THAT(eval.out,
              StartsWith("scenario: knowledge_assistant "
                         "role=Senior Data Researcher\n"
                         "seeds: staging=101 test=202\n"));
  EXPECT_THAT(eval.out, HasSubstr("Agent"));
  EXPECT_THAT(eval.out, HasSubstr("FAR"));
  EXPECT_THAT(eval.out, HasSubstr("BEFR"));
  EXPECT_THAT(eval.out, HasSubstr("#Hallucinations"));
  EXPECT_THAT(eval.out, HasSubstr("knowledge_assistant"));
  EXPECT_THAT(eval.out, HasSubstr("wrote "));

  nlohmann::json report =
      nlohmann::json::parse(ReadAll(out.path() / "report.json"));
  EXPECT_EQ(report["counts"]["benign_total"], 6);
  EXPECT_EQ(report["counts"]["violation_total"], 2);
  EXPECT_EQ(report["ledger"].size(), 8u);
  EXPECT_FALSE(DirContents(out.path() / "policies").empty());
}

TEST(InspectCommand, RendersPoliciesAndTheEffectiveConfig) {
  ScopedTempDir dir;
  WriteReaderBundle(dir);

  CliResult all = RunCli("--policies \"" + dir.str() + "\" inspect");
  ASSERT_EQ(all.exit_code, 0) << all.err;
  EXPECT_THAT(all.out, StartsWith("policy alpha/a216654b81c80068\n"));
  EXPECT_THAT(all.out, HasSubstr("1 policies\n"));

  CliResult one = RunCli("--policies \"" + dir.str() +
                         "\" inspect --rule-id alpha/a216654b81c80068");
  ASSERT_EQ(one.exit_code, 0);
  EXPECT_THAT(one.out, StartsWith("policy alpha/a216654b81c80068\n"));

  CliResult missing =
      RunCli("--policies \"" + dir.str() + "\" inspect --rule-id nope");
  EXPECT_EQ(missing.exit_code, 1);
  EXPECT_THAT(missing.err, HasSubstr("error: no policy with rule_id 'nope'"));

  CliResult config = RunCli("inspect config");
  ASSERT_EQ(config.exit_code, 0);
  EXPECT_EQ(config.out,
            "policy_dir = (unset)\n"
            "bind = 127.0.0.1:7701\n"
            "fail_mode = closed\n"
            "aggregator_endpoint = (unset; deterministic aggregator)\n"
            "aggregator_timeout_ms = 30000\n"
            "attribute_slack_factor = 2\n"
            "time_constraints_exempt_from_slack = true\n"
            "merge_threshold_default = 0.35\n"
            "min_frequency_default = 1\n"
            "prefix_ttl_ms_default = 3600000\n"
            "timezone_offset_minutes_default = 0\n");

  CliResult tuned = RunCli("--slack 1.5 --policies /p --fail open "
                           "inspect config",
                           "GUARDIAN_BIND=0.0.0.0:9000");
  ASSERT_EQ(tuned.exit_code, 0);
  EXPECT_THAT(tuned.out, HasSubstr("policy_dir = /p\n"));
  EXPECT_THAT(tuned.out, HasSubstr("bind = 0.0.0.0:9000\n"));
  EXPECT_THAT(tuned.out, HasSubstr("fail_mode = open\n"));
  EXPECT_THAT(tuned.out, HasSubstr("attribute_slack_factor = 1.5\n"));
}

TEST(InspectCommand, ReadsDefaultsFromAConfigFile) {
  ScopedTempDir dir;
  std::ofstream(dir.path() / "guardian.ini")
      << "slack=1.25\npolicies=/from/config\n";
  CliResult r = RunCli("--config \"" + (dir.path() / "guardian.ini").string() +
                       "\" inspect config");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_THAT(r.out, HasSubstr("policy_dir = /from/config\n"));
  EXPECT_THAT(r.out, HasSubstr("attribute_slack_factor = 1.25\n"));
}

TEST(ServeCommand, PrintsTheBannerAndRejectsBadFlags) {
  ScopedTempDir dir;
  WriteReaderBundle(dir);

  CliResult bad_bind = RunCli("--policies \"" + dir.str() +
                              "\" --bind nocolon serve");
  EXPECT_EQ(bad_bind.exit_code, 1);
  EXPECT_THAT(bad_bind.err,
              HasSubstr("error: --bind must look like host:port"));

  CliResult bad_fail = RunCli("--policies \"" + dir.str() +
                              "\" --fail sometimes serve");
  EXPECT_EQ(bad_fail.exit_code, 1);
  EXPECT_THAT(bad_fail.err, HasSubstr("error: --fail must be closed|open"));

  // Start on an ephemeral port, wait for the banner, then kill the server.
  ScopedTempDir capture;
  fs::path banner_file = capture.path() / "serve.out";
  std::string script =
      "\"" + std::string(kCliPath) + "\" --policies \"" + dir.str() +
      "\" serve --bind 127.0.0.1:0 > \"" + banner_file.string() +
      "\" 2>&1 & PID=$!; ok=1; for i in $(seq 1 100); do "
      "if grep -q \"guardian serving\" \"" + banner_file.string() + "\"; "
      "then ok=0; break; fi; sleep 0.05; done; kill $PID 2>/dev/null; "
      "exit $ok";
  int raw = std::system(("sh -c '" + script + "'").c_str());
  ASSERT_TRUE(WIFEXITED(raw) && WEXITSTATUS(raw) == 0)
      << ReadAll(banner_file);
  EXPECT_THAT(ReadAll(banner_file),
              HasSubstr("guardian serving 1 policies on 127.0.0.1:0 "
                        "(fail-closed)"));
}

TEST(UsageErrors, NeverCollideWithVerdictExitCodes) {
  CliResult none = RunCli("");
  EXPECT_NE(none.exit_code, 0);
  EXPECT_NE(none.exit_code, 2);
  EXPECT_NE(none.exit_code, 3);

  CliResult incomplete = RunCli("check --role alpha");
  EXPECT_NE(incomplete.exit_code, 0);
  EXPECT_NE(incomplete.exit_code, 2);
  EXPECT_NE(incomplete.exit_code, 3);

  CliResult unknown = RunCli("frobnicate");
  EXPECT_NE(unknown.exit_code, 0);
  EXPECT_NE(unknown.exit_code, 2);
  EXPECT_NE(unknown.exit_code, 3);

  CliResult bad_dir = RunCli("--policies /no/such/dir check --role a --tool t");
  EXPECT_EQ(bad_dir.exit_code, 1);
  EXPECT_THAT(bad_dir.err, HasSubstr("error: "));
  EXPECT_THAT(bad_dir.err, HasSubstr("is not readable"));

  CliResult bad_traces = RunCli("learn --traces /no/such/file");
  EXPECT_EQ(bad_traces.exit_code, 1);
  EXPECT_THAT(bad_traces.err,
              HasSubstr("error: no such trace file or directory"));

  CliResult bad_app = RunCli("eval --app mystery");
  EXPECT_EQ(bad_app.exit_code, 1);
  EXPECT_THAT(bad_app.err, HasSubstr("error: unknown --app 'mystery'"));

  CliResult bad_agg = RunCli("learn --traces \"" + FixturePath() +
                             "\" --aggregator carrier-pigeon");
  EXPECT_EQ(bad_agg.exit_code, 1);
  EXPECT_THAT(bad_agg.err,
              HasSubstr("unknown aggregator kind 'carrier-pigeon'"));

  CliResult no_endpoint = RunCli("learn --traces \"" + FixturePath() +
                                 "\" --aggregator external");
  EXPECT_EQ(no_endpoint.exit_code, 1);
  EXPECT_THAT(no_endpoint.err,
              HasSubstr("--aggregator external requires "
                        "--aggregator-endpoint"));
}

}  // namespace
}  // namespace guardian
