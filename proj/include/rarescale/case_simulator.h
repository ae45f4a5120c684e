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

#ifndef RARESCALE_CASE_SIMULATOR_H_
#define RARESCALE_CASE_SIMULATOR_H_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rarescale/knowledge_base.h"
#include "rarescale/rng.h"
#include "rarescale/scorer.h"

namespace rarescale {

struct SimConfig {
  std::uint64_t rng_seed = 0;
  // Probability that a finding is PRESENT, indexed by link frequency - 1.
  std::array<double, 5> present_prob = {0.15, 0.30, 0.50, 0.75, 0.90};
  int max_attempts = 200;
  int min_valid = 50;
  int ddx_checkpoint_after = 6;
  int max_findings = 20;
  int min_findings = 8;
  // Multiplier on present_prob for findings queued at the checkpoint.
  double overlap_present_scale = 0.5;

  // Throws kInvalidArgument.
  void Validate() const;
};

struct StructuredCase {
  std::string case_id;  // "<seed>#<attempt>"
  std::string seed_disease;
  CaseFindings findings;  // in sampling order
  RankedDdx ddx;
  std::map<std::string, std::string> demographics;  // slot -> value

  bool operator==(const StructuredCase&) const = default;
};

struct DdxSnapshot {
  int step = 0;  // number of findings sampled when the DDx was computed
  RankedDdx ddx;

  bool operator==(const DdxSnapshot&) const = default;
};

struct SimTrace {
  std::vector<DdxSnapshot> snapshots;  // ordered by step
  std::uint64_t rng_seed = 0;
  int attempt = 0;
  // Findings dropped because their exclusion group already had a PRESENT
  // member.
  std::vector<std::string> skipped;
  // Findings moved ahead of frequency order at the checkpoint.
  std::vector<std::string> prioritized;

  bool operator==(const SimTrace&) const = default;
};

enum class InvalidReason { kTooFewFindings, kEmptyDdx, kSeedNotTop, kSeedTied };

std::string_view InvalidReasonName(InvalidReason reason);

struct SimulatedCase {
  StructuredCase structured;
  SimTrace trace;

  bool operator==(const SimulatedCase&) const = default;
};

struct InvalidAttempt {
  InvalidReason reason;
  SimTrace trace;
};

using SampleOutcome = std::variant<SimulatedCase, InvalidAttempt>;

// One simulation attempt for seed_disease. Throws kNotFound for an unknown
// seed.
SampleOutcome SampleCase(const KnowledgeBase& kb, const ScoreWeights& weights,
                         std::string_view seed_disease, const SimConfig& config,
                         Rng& rng, int attempt = 0);

// Sub-stream seed used for a given attempt.
std::uint64_t AttemptSeed(const SimConfig& config, std::string_view seed_disease,
                          int attempt);

struct CaseSet {
  std::string disease_id;
  int attempts = 0;
  std::vector<SimulatedCase> cases;

  bool operator==(const CaseSet&) const = default;
};

struct Excluded {
  std::string disease_id;
  int attempts = 0;
  int valid = 0;

  bool operator==(const Excluded&) const = default;
};

using DiseaseSimulation = std::variant<CaseSet, Excluded>;

// Runs config.max_attempts attempts; Excluded when fewer than
// config.min_valid are valid.
DiseaseSimulation SimulateDisease(const KnowledgeBase& kb,
                                  const ScoreWeights& weights,
                                  std::string_view seed_disease,
                                  const SimConfig& config);

// Every disease of kb in id order, spread over `workers` threads. Output is
// identical for any worker count.
std::vector<DiseaseSimulation> SimulateAll(const KnowledgeBase& kb,
                                           const ScoreWeights& weights,
                                           const SimConfig& config, int workers);

// Diseases seen in an earlier snapshot's DDx but missing from the final one,
// in first-appearance order. Throws kTooFew with fewer than two snapshots.
std::vector<std::string> DiscardedDiagnoses(const SimTrace& trace);

}  // namespace rarescale

#endif  // RARESCALE_CASE_SIMULATOR_H_
