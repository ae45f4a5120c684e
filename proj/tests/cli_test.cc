// Copyright 2026 The RareScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rarescale/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "rarescale/dataset_store.h"
#include "rarescale/knowledge_base.h"
#include "test_util.h"

namespace rarescale {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> Snapshot(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = testing::ReadFile(e.path().string());
    }
  }
  return files;
}

TEST(Cli, UnknownSubcommand) {
  Result r = Invoke({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err, "error: usage-error: unknown subcommand 'frobnicate'\n");
  EXPECT_EQ(Invoke({}).code, 2);
  EXPECT_EQ(Invoke({"simulate", "--bogus"}).code, 2);
}

TEST(Cli, KbValidate) {
  testing::TempDir dir;
  SaveKb(SynthKb({}), dir.file("kb.txt"));
  Result ok = Invoke({"kb-validate", "--kb", dir.file("kb.txt")});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("0 violations"), std::string::npos);

  KnowledgeBase bad({testing::Symptom("f1")}, {testing::Disease("a", {}), testing::Disease("b", {{"f1", {3, 3}}})});
  SaveKb(bad, dir.file("bad.txt"));
  Result r = Invoke({"kb-validate", "--kb", dir.file("bad.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("1 violations"), std::string::npos) << r.out;
  EXPECT_EQ(r.err.rfind("error: integrity-error: ", 0), 0u) << r.err;

  Result missing = Invoke({"kb-validate", "--kb", dir.file("nope.txt")});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.find('\n'), missing.err.size() - 1);
}

TEST(Cli, DuplicateDiseasesAreExcluded) {
  testing::TempDir dir;
  std::vector<Finding> fs;
  std::map<std::string, std::pair<int, int>> links;
  for (int i = 0; i < 10; ++i) {
    fs.push_back(testing::Symptom("f" + std::to_string(i), 2));
    links["f" + std::to_string(i)] = {3, 4};
  }
  SaveKb(KnowledgeBase(fs, {testing::Disease("a", links), testing::Disease("b", links)}),
         dir.file("kb.txt"));
  Result r = Invoke({"simulate", "--kb", dir.file("kb.txt"), "--out", dir.file("out")});
  EXPECT_EQ(r.code, 0) << r.err;
  std::string report = testing::ReadFile(dir.file("out/simulation_report.tsv"));
  EXPECT_NE(report.find("a\tDisease a\texcluded\t0/200"), std::string::npos) << report;
  EXPECT_NE(report.find("b\tDisease b\texcluded\t0/200"), std::string::npos) << report;
  EXPECT_EQ(testing::ReadFile(dir.file("out/cases.jsonl")), "");
}

TEST(Cli, ConfigErrors) {
  testing::TempDir dir;
  testing::WriteFile(dir.file("bad.json"), "{not json");
  Result r = Invoke({"simulate", "--config", dir.file("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: config-error: ", 0), 0u) << r.err;

  testing::WriteFile(dir.file("stage.json"), R"({"llm": {"painting": {}}})");
  EXPECT_NE(Invoke({"simulate", "--config", dir.file("stage.json")}).err.find("painting"),
            std::string::npos);
  testing::WriteFile(dir.file("key.json"), R"({"llm": {"default": {"api_key": "sk-zzz-111"}}})");
  Result key = Invoke({"simulate", "--config", dir.file("key.json")});
  EXPECT_EQ(key.code, 1);
  EXPECT_EQ(key.err.find("sk-zzz-111"), std::string::npos) << key.err;
  testing::WriteFile(dir.file("kb.json"), R"({"kb": "missing.txt"})");
  EXPECT_EQ(Invoke({"simulate", "--config", dir.file("kb.json")}).err.rfind("error: config-error: ", 0), 0u);
  EXPECT_EQ(Invoke({"simulate", "--config", dir.file("absent.json")}).code, 1);
}

TEST(Cli, ConfigResolvesRelativePaths) {
  testing::TempDir dir;
  fs::create_directories(dir.file("sub"));
  testing::WriteFile(dir.file("sub/kb.txt"), WriteKb(SynthKb({})));
  testing::WriteFile(dir.file("sub/c.json"),
                     R"({"kb": "kb.txt", "out": "o", "seed": 3, "llm": {"default": {"temperature": 0.2}, "judge": {"temperature": 0}}})");
  PipelineConfig c = LoadPipelineConfig(dir.file("sub/c.json"));
  EXPECT_EQ(fs::path(c.kb_path), fs::path(dir.file("sub/kb.txt")));
  EXPECT_EQ(fs::path(c.out_dir), fs::path(dir.file("sub/o")));
  EXPECT_EQ(c.seed, 3u);
  EXPECT_DOUBLE_EQ(c.StageLlm("chat").temperature, 0.2);
  EXPECT_DOUBLE_EQ(c.StageLlm("judge").temperature, 0.0);
}

class Pipeline : public ::testing::Test {
 protected:
  static void RunAll(const std::string& config, const std::string& out, int workers) {
    std::vector<std::vector<std::string>> steps = {
        {"kb-synth"},
        {"kb-validate"},
        {"simulate"},
        {"chats"},
        {"negatives"},
        {"split"},
        {"stats"},
        {"export-pairs"},
        {"eval-candidates", "--backend", "reference"},
        {"eval-ddx", "--backend", "none"},
        {"eval-ddx", "--backend", "reference", "--baseline", out + "/ddx_none_verdicts.jsonl"},
    };
    for (auto step : steps) {
      step.insert(step.end(), {"--config", config, "--out", out, "--workers", std::to_string(workers)});
      Result r = Invoke(step);
      ASSERT_EQ(r.code, 0) << step[0] << ": " << r.err;
    }
  }
};

TEST_F(Pipeline, OfflineRunIsCompleteAndIdempotent) {
  testing::TempDir dir;
  testing::WriteFile(dir.file("config.json"), R"({
      "seed": 11,
      "synth": {"n_diseases": 8, "n_findings": 50},
      "eval": {"records": "corpus", "matcher": "judge"}})");
  RunAll(dir.file("config.json"), dir.file("run1"), 1);
  RunAll(dir.file("config.json"), dir.file("run2"), 4);

  // Only the two output directories and the config exist.
  std::set<std::string> top;
  for (const auto& e : fs::directory_iterator(dir.path())) top.insert(e.path().filename().string());
  EXPECT_EQ(top, (std::set<std::string>{"config.json", "run1", "run2"}));

  auto a = Snapshot(dir.file("run1"));
  auto b = Snapshot(dir.file("run2"));
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, content] : a) EXPECT_TRUE(b[name] == content) << name;
  for (const char* name : {"kb.txt", "cases.jsonl", "chats.jsonl", "phrase_bank.json", "negatives.jsonl",
                           "train.jsonl", "val.jsonl", "test.jsonl", "stats.txt", "pairs.jsonl",
                           "ddx_reference_report.json", "candidates_reference_report.json"}) {
    EXPECT_TRUE(a.count(name)) << name;
  }

  std::size_t retained = 0;
  for (const auto& c : ReadChats(dir.file("run1/chats.jsonl"))) retained += !c.meta.discarded;
  json none = json::parse(a["ddx_none_report.json"]);
  json ref = json::parse(a["ddx_reference_report.json"]);
  EXPECT_EQ(none["n"], retained);
  EXPECT_EQ(ref["n"], retained);
  EXPECT_GT(ref["top5"].get<double>(), none["top5"].get<double>());
  EXPECT_TRUE(ref.contains("p_value"));
}

}  // namespace
}  // namespace rarescale
