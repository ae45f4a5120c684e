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

#include "rarescale/knowledge_base.h"

#include <gtest/gtest.h>

#include "rarescale/error.h"
#include "test_util.h"

namespace rarescale {
namespace {

using testing::Disease;
using testing::Symptom;
using testing::TempDir;

constexpr char kMinimal[] = R"(rarescale-kb 1
# one disease, two findings
finding f1
  name Fever
  kind symptom
  import 3
end
finding f2
  name Rash
  kind symptom
  import 2
  definition Red spots\non the skin
end
disease d1
  name Example disease
  category Infectious diseases
  link f1 3 2
  link f2 4 5
end
)";

std::string ReplaceOnce(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

ErrorCode CodeOf(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

TEST(LoadKb, MinimalFile) {
  KnowledgeBase kb = LoadKbFromString(kMinimal);
  EXPECT_EQ(kb.diseases().size(), 1u);
  EXPECT_EQ(kb.findings().size(), 2u);
  EXPECT_EQ(kb.finding("f2").definition.value(), "Red spots\non the skin");
  EXPECT_EQ(kb.disease("d1").FindLink("f2")->evoking_strength, 4);
  EXPECT_EQ(kb.categories(), std::set<std::string>{"Infectious diseases"});
}

TEST(LoadKb, DanglingLinkNamesFinding) {
  std::string message;
  auto code = CodeOf(
      [] { LoadKbFromString(ReplaceOnce(kMinimal, "link f2 4 5", "link f_missing 4 5")); },
      &message);
  EXPECT_EQ(code, ErrorCode::kIntegrity);
  EXPECT_NE(message.find("f_missing"), std::string::npos) << message;
}

TEST(LoadKb, EvokingStrengthOutOfRange) {
  std::string message;
  auto code = CodeOf([] { LoadKbFromString(ReplaceOnce(kMinimal, "link f1 3 2", "link f1 6 2")); },
                     &message);
  EXPECT_EQ(code, ErrorCode::kRange);
  EXPECT_NE(message.find("d1"), std::string::npos) << message;
}

TEST(LoadKb, ImportOutOfRange) {
  EXPECT_EQ(CodeOf([] { LoadKbFromString(ReplaceOnce(kMinimal, "import 3", "import 0")); }),
            ErrorCode::kRange);
}

TEST(LoadKb, MalformedInputs) {
  EXPECT_EQ(CodeOf([] { LoadKbFromString("not-a-kb 1\n"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { LoadKbFromString(ReplaceOnce(kMinimal, "  kind symptom\n  import 2",
                                                     "  kind lab\n  import 2")); }),
            ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { LoadKbFromString(ReplaceOnce(kMinimal, "link f1 3 2", "link f1 3")); }),
            ErrorCode::kParse);
  std::string unterminated(kMinimal);
  unterminated.resize(unterminated.rfind("end"));
  EXPECT_EQ(CodeOf([&] { LoadKbFromString(unterminated); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { LoadKb("/nonexistent/kb.txt"); }), ErrorCode::kIo);
}

TEST(ValidateKb, ValidKbHasEmptyReport) {
  EXPECT_TRUE(ValidateKb(LoadKbFromString(kMinimal)).empty());
}

TEST(ValidateKb, DiseaseWithoutSymptomLinks) {
  Finding risk = Symptom("f1");
  risk.kind = FindingKind::kPredisposing;
  KnowledgeBase kb({risk, Symptom("f2")}, {Disease("d1", {{"f1", {2, 2}}})});
  ValidationReport report = ValidateKb(kb);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].rule, "no-symptom-links");
  EXPECT_EQ(report[0].entity, "d1");
}

TEST(ValidateKb, DuplicateFindingId) {
  KnowledgeBase kb({Symptom("f1"), Symptom("f1")}, {Disease("d1", {{"f1", {2, 2}}})});
  ValidationReport report = ValidateKb(kb);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].rule, "duplicate-id");
  EXPECT_EQ(report[0].entity, "f1");
}

TEST(ValidateKb, ReportsEveryViolation) {
  Finding demo = Symptom("g1");
  demo.kind = FindingKind::kDemographic;  // no group
  DiseaseEntry d = Disease("d1", {{"f1", {2, 2}}, {"ghost", {1, 1}}}, {});
  KnowledgeBase kb({Symptom("f1"), demo}, {d});
  std::set<std::string> rules;
  for (const auto& v : ValidateKb(kb)) rules.insert(v.rule);
  EXPECT_EQ(rules, (std::set<std::string>{"demographic-without-group", "dangling-link",
                                          "no-categories"}));
}

TEST(KbFormat, RoundTripIsIdentity) {
  KnowledgeBase kb = SynthKb({});
  std::string text = WriteKb(kb);
  KnowledgeBase again = LoadKbFromString(text);
  EXPECT_EQ(again, kb);
  EXPECT_EQ(WriteKb(again), text);

  TempDir dir;
  SaveKb(kb, dir.file("kb.txt"));
  EXPECT_EQ(LoadKb(dir.file("kb.txt")), kb);
}

TEST(KbFormat, EscapesSurviveRoundTrip) {
  Finding f = Symptom("f1");
  f.name = "Back\\slash and\nnewline";
  f.definition = "  leading spaces";
  KnowledgeBase kb({f}, {Disease("d1", {{"f1", {1, 1}}})});
  EXPECT_EQ(LoadKbFromString(WriteKb(kb)), kb);
}

TEST(SynthKb, DeterministicAndValid) {
  SynthParams p{7, 30, 120, 8, 14};
  KnowledgeBase a = SynthKb(p);
  EXPECT_EQ(WriteKb(a), WriteKb(SynthKb(p)));
  EXPECT_TRUE(ValidateKb(a).empty());
  EXPECT_EQ(a.diseases().size(), 30u);

  std::set<std::string> groups;
  for (const auto& f : a.findings()) {
    if (f.kind == FindingKind::kDemographic) groups.insert(*f.exclusion_group);
  }
  EXPECT_EQ(groups, (std::set<std::string>{"age", "sex"}));
  for (const auto& d : a.diseases()) {
    int symptoms = 0;
    for (const auto& [fid, link] : d.links) {
      if (a.finding(fid).kind == FindingKind::kSymptom) ++symptoms;
    }
    EXPECT_GE(symptoms, 1) << d.id;
  }
}

TEST(SynthKb, InfeasibleParameters) {
  EXPECT_EQ(CodeOf([] { SynthKb({7, 1, 0, 1, 1}); }), ErrorCode::kInfeasible);
  EXPECT_EQ(CodeOf([] { SynthKb({7, 0, 10, 1, 2}); }), ErrorCode::kInfeasible);
  EXPECT_EQ(CodeOf([] { SynthKb({7, 3, 10, 5, 4}); }), ErrorCode::kInfeasible);
}

TEST(SynthKb, DifferentSizeStillValid) {
  KnowledgeBase a = SynthKb({7, 30, 120, 8, 14});
  KnowledgeBase b = SynthKb({7, 12, 120, 8, 14});
  EXPECT_NE(WriteKb(a), WriteKb(b));
  EXPECT_TRUE(ValidateKb(b).empty());
}

TEST(SynthKb, ValidAcrossRandomParameters) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 40; ++i) {
    SynthParams p;
    p.seed = gen();
    p.n_diseases = 1 + static_cast<int>(gen() % 40);
    p.links_min = 1 + static_cast<int>(gen() % 10);
    p.links_max = p.links_min + static_cast<int>(gen() % 6);
    p.n_findings = p.links_max + static_cast<int>(gen() % 60);
    KnowledgeBase kb = SynthKb(p);
    EXPECT_TRUE(ValidateKb(kb).empty()) << "seed " << p.seed;
    for (const auto& f : kb.findings()) {
      EXPECT_GE(f.import_score, 1);
      EXPECT_LE(f.import_score, 5);
    }
  }
}

}  // namespace
}  // namespace rarescale
