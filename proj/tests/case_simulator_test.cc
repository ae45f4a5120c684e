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

#include "rarescale/case_simulator.h"

#include <gtest/gtest.h>

#include <set>

#include "rarescale/error.h"
#include "test_util.h"

namespace rarescale {
namespace {

using testing::Disease;
using testing::OracleRank;
using testing::Symptom;

// n symptoms f0..f{n-1}, all linked to each listed disease with the same
// (es, freq).
KnowledgeBase SharedLinkKb(int n_findings, const std::vector<std::string>& diseases,
                           int es = 3, int freq = 4) {
  std::vector<Finding> fs;
  std::map<std::string, std::pair<int, int>> links;
  for (int i = 0; i < n_findings; ++i) {
    fs.push_back(Symptom("f" + std::to_string(i), 2));
    links["f" + std::to_string(i)] = {es, freq};
  }
  std::vector<DiseaseEntry> ds;
  for (const auto& id : diseases) ds.push_back(Disease(id, links));
  return KnowledgeBase(fs, ds);
}

RankedDdx ToRanked(const std::vector<std::pair<std::string, long>>& oracle) {
  RankedDdx r;
  for (const auto& [id, s] : oracle) r.entries.push_back({id, s});
  return r;
}

TEST(SampleCase, SingleDiseaseKbHasSeedOnlyDdx) {
  KnowledgeBase kb = SharedLinkKb(10, {"d"});
  SimConfig config;
  int cases = 0;
  for (int attempt = 0; attempt < 50; ++attempt) {
    Rng rng(AttemptSeed(config, "d", attempt));
    auto outcome = SampleCase(kb, {}, "d", config, rng, attempt);
    if (auto* c = std::get_if<SimulatedCase>(&outcome)) {
      ++cases;
      ASSERT_EQ(c->structured.ddx.entries.size(), 1u);
      EXPECT_EQ(c->structured.ddx.entries[0].disease_id, "d");
    } else {
      // Only a non-positive score can make a single-disease attempt invalid.
      EXPECT_EQ(std::get<InvalidAttempt>(outcome).reason, InvalidReason::kEmptyDdx);
    }
  }
  EXPECT_GT(cases, 40);
}

TEST(SampleCase, DuplicateDiseasesAlwaysInvalid) {
  KnowledgeBase kb = SharedLinkKb(10, {"a", "b"});
  SimConfig config;
  for (int attempt = 0; attempt < 200; ++attempt) {
    Rng rng(AttemptSeed(config, "a", attempt));
    EXPECT_TRUE(std::holds_alternative<InvalidAttempt>(SampleCase(kb, {}, "a", config, rng)));
  }
}

TEST(SampleCase, UnknownSeed) {
  KnowledgeBase kb = SharedLinkKb(10, {"a"});
  Rng rng(1);
  EXPECT_THROW(SampleCase(kb, {}, "zz", {}, rng), Error);
  EXPECT_THROW(SimulateDisease(kb, {}, "zz", {}), Error);
}

TEST(SampleCase, RescoringReproducesStoredDdx) {
  KnowledgeBase kb = SynthKb({7, 10, 60, 8, 14});
  ScoreWeights w;
  SimConfig config;
  config.rng_seed = 7;
  int checked = 0;
  for (const auto& d : kb.diseases()) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      Rng rng(AttemptSeed(config, d.id, attempt));
      auto outcome = SampleCase(kb, w, d.id, config, rng, attempt);
      auto* c = std::get_if<SimulatedCase>(&outcome);
      if (!c) continue;
      ++checked;
      auto oracle = OracleRank(kb, w, c->structured.findings);
      EXPECT_EQ(ToRanked(oracle), c->structured.ddx);
      ASSERT_FALSE(oracle.empty());
      EXPECT_EQ(oracle[0].first, d.id);
      if (oracle.size() > 1) EXPECT_GT(oracle[0].second, oracle[1].second);
      EXPECT_EQ(CheckCase(kb, c->structured.findings), "");
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(SampleCase, SamplingOrderAndDemographics) {
  KnowledgeBase kb = SynthKb({21, 20, 80, 8, 14});
  SimConfig config;
  for (const auto& d : kb.diseases()) {
    Rng rng(AttemptSeed(config, d.id, 0));
    auto outcome = SampleCase(kb, {}, d.id, config, rng);
    const SimTrace& trace = std::holds_alternative<SimulatedCase>(outcome)
                                ? std::get<SimulatedCase>(outcome).trace
                                : std::get<InvalidAttempt>(outcome).trace;
    if (!std::holds_alternative<SimulatedCase>(outcome)) continue;
    const StructuredCase& c = std::get<SimulatedCase>(outcome).structured;
    std::set<std::string> prioritized(trace.prioritized.begin(), trace.prioritized.end());

    // Demographics first: exactly one present finding per demographic group.
    std::map<std::string, int> demo_present;
    std::size_t i = 0;
    for (; i < c.findings.entries.size(); ++i) {
      const Finding& f = kb.finding(c.findings.entries[i].finding_id);
      if (f.kind != FindingKind::kDemographic) break;
      EXPECT_EQ(c.findings.entries[i].polarity, Polarity::kPresent);
      ++demo_present[*f.exclusion_group];
    }
    for (const auto& [group, n] : demo_present) EXPECT_EQ(n, 1) << group;
    EXPECT_EQ(demo_present.size(), c.demographics.size());

    // Then (phase, frequency) non-decreasing / non-increasing outside the
    // priority queue.
    int last_phase = 0, last_freq = 6;
    for (; i < c.findings.entries.size(); ++i) {
      const std::string& id = c.findings.entries[i].finding_id;
      const Finding& f = kb.finding(id);
      ASSERT_NE(f.kind, FindingKind::kDemographic);
      if (prioritized.count(id)) continue;
      int phase = f.kind == FindingKind::kPredisposing ? 1 : 2;
      int freq = d.FindLink(id)->frequency;
      ASSERT_GE(phase, last_phase);
      if (phase == last_phase) EXPECT_LE(freq, last_freq) << d.id << " " << id;
      last_phase = phase;
      last_freq = freq;
    }
    // Snapshots: checkpoint then final, ordered by step.
    ASSERT_EQ(trace.snapshots.size(), 2u);
    EXPECT_EQ(trace.snapshots[0].step, config.ddx_checkpoint_after);
    EXPECT_LE(trace.snapshots[0].step, trace.snapshots[1].step);
    EXPECT_LE(static_cast<int>(c.findings.entries.size()), config.max_findings);
    EXPECT_GE(static_cast<int>(c.findings.entries.size()), config.min_findings);
  }
}

TEST(SampleCase, PriorityFindingsAreSharedWithCheckpointRivals) {
  KnowledgeBase kb = SynthKb({5, 20, 60, 10, 14});
  SimConfig config;
  for (const auto& d : kb.diseases()) {
    Rng rng(AttemptSeed(config, d.id, 3));
    auto outcome = SampleCase(kb, {}, d.id, config, rng, 3);
    const SimTrace& trace = std::holds_alternative<SimulatedCase>(outcome)
                                ? std::get<SimulatedCase>(outcome).trace
                                : std::get<InvalidAttempt>(outcome).trace;
    if (trace.snapshots.size() < 2) continue;
    const RankedDdx& checkpoint = trace.snapshots[0].ddx;
    for (const auto& fid : trace.prioritized) {
      EXPECT_NE(d.FindLink(fid), nullptr);
      bool shared = false;
      for (const auto& e : checkpoint.entries) {
        if (e.disease_id != d.id && kb.disease(e.disease_id).FindLink(fid)) shared = true;
      }
      EXPECT_TRUE(shared) << d.id << " " << fid;
    }
  }
}

TEST(SampleCase, ExclusionGroupSkipsLaterMembers) {
  // f0 and f1 share a group; f0 (freq 5) is sampled first.
  std::vector<Finding> fs;
  std::map<std::string, std::pair<int, int>> links;
  for (int i = 0; i < 12; ++i) {
    std::optional<std::string> group;
    if (i < 2) group = "g";
    fs.push_back(Symptom("f" + std::to_string(i), 1, group));
    links["f" + std::to_string(i)] = {3, i == 0 ? 5 : 3};
  }
  KnowledgeBase kb(fs, {Disease("d", links)});
  SimConfig config;
  config.present_prob = {1, 1, 1, 1, 1};
  Rng rng(1);
  auto c = std::get<SimulatedCase>(SampleCase(kb, {}, "d", config, rng));
  EXPECT_EQ(c.trace.skipped, std::vector<std::string>{"f1"});
  for (const auto& e : c.structured.findings.entries) EXPECT_NE(e.finding_id, "f1");
  EXPECT_EQ(CheckCase(kb, c.structured.findings), "");
}

TEST(SimulateDisease, DuplicateDiseaseExcludedWithZeroValid) {
  KnowledgeBase kb = SharedLinkKb(10, {"a", "b"});
  for (const char* id : {"a", "b"}) {
    auto result = SimulateDisease(kb, {}, id, {});
    ASSERT_TRUE(std::holds_alternative<Excluded>(result));
    EXPECT_EQ(std::get<Excluded>(result).valid, 0);
    EXPECT_EQ(std::get<Excluded>(result).attempts, 200);
  }
}

TEST(SimulateDisease, SingleDiseaseHalfProbabilityIsIncluded) {
  KnowledgeBase kb = SharedLinkKb(12, {"d"}, 4, 1);
  SimConfig config;
  config.present_prob = {0.5, 0.5, 0.5, 0.5, 0.5};
  auto result = SimulateDisease(kb, {}, "d", config);
  ASSERT_TRUE(std::holds_alternative<CaseSet>(result));
  EXPECT_GE(std::get<CaseSet>(result).cases.size(), 50u);
}

TEST(SimulateAll, DeterministicAcrossRunsAndWorkerCounts) {
  KnowledgeBase kb = SynthKb({7, 30, 120, 8, 14});
  SimConfig config;
  config.rng_seed = 7;
  auto counts = [](const std::vector<DiseaseSimulation>& rs) {
    std::vector<int> out;
    for (const auto& r : rs) {
      out.push_back(std::holds_alternative<CaseSet>(r)
                        ? static_cast<int>(std::get<CaseSet>(r).cases.size())
                        : -std::get<Excluded>(r).valid - 1);
    }
    return out;
  };
  auto a = SimulateAll(kb, {}, config, 1);
  auto b = SimulateAll(kb, {}, config, 6);
  EXPECT_EQ(counts(a), counts(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (auto* set = std::get_if<CaseSet>(&a[i])) {
      EXPECT_EQ(set->cases, std::get<CaseSet>(b[i]).cases);
    }
  }
}

TEST(DiscardedDiagnoses, Examples) {
  auto trace = [](std::vector<std::vector<std::string>> snaps) {
    SimTrace t;
    int step = 0;
    for (const auto& s : snaps) {
      RankedDdx r;
      for (const auto& id : s) r.entries.push_back({id, 1});
      t.snapshots.push_back({++step, r});
    }
    return t;
  };
  using V = std::vector<std::string>;
  EXPECT_EQ(DiscardedDiagnoses(trace({{"A", "B", "C"}, {"A", "C"}})), V{"B"});
  EXPECT_EQ(DiscardedDiagnoses(trace({{"A", "B"}, {"A", "B"}})), V{});
  EXPECT_EQ(DiscardedDiagnoses(trace({{"A", "B"}, {"B", "D"}, {"A"}})), (V{"B", "D"}));
  EXPECT_THROW(DiscardedDiagnoses(trace({{"A"}})), Error);
}

TEST(SimConfig, Validate) {
  SimConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.present_prob[2] = 1.5;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.min_valid = 201;
  EXPECT_THROW(c.Validate(), Error);
  c = {};
  c.ddx_checkpoint_after = 0;
  EXPECT_THROW(c.Validate(), Error);
}

}  // namespace
}  // namespace rarescale
