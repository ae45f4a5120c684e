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

#ifndef RARESCALE_SCORER_H_
#define RARESCALE_SCORER_H_

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rarescale/knowledge_base.h"

namespace rarescale {

enum class Polarity { kPresent, kAbsent };

std::string_view PolarityName(Polarity p);  // "present" / "absent"

struct CaseEntry {
  std::string finding_id;
  Polarity polarity = Polarity::kPresent;

  bool operator==(const CaseEntry&) const = default;
};

// Ordered, duplicate-free list of polarity-tagged findings.
struct CaseFindings {
  std::vector<CaseEntry> entries;

  bool operator==(const CaseFindings&) const = default;
};

// Returns an empty string when the case is valid against kb, else a
// description of the first problem (unknown id, duplicate id, two PRESENT
// findings from one exclusion group).
std::string CheckCase(const KnowledgeBase& kb, const CaseFindings& findings);

// Lookup tables indexed by score - 1.
struct ScoreWeights {
  std::array<int, 5> es_weight = {1, 4, 10, 20, 40};
  std::array<int, 5> freq_penalty = {1, 4, 7, 18, 40};
  std::array<int, 5> import_penalty = {2, 6, 10, 20, 40};

  // Throws kInvalidArgument unless every table is non-negative and strictly
  // increasing.
  void Validate() const;

  bool operator==(const ScoreWeights&) const = default;
};

struct ScoredDisease {
  std::string disease_id;
  long score = 0;

  bool operator==(const ScoredDisease&) const = default;
};

// At most max_n entries, score > 0, ordered by (score desc, id asc).
struct RankedDdx {
  std::vector<ScoredDisease> entries;

  bool Contains(std::string_view disease_id) const;
  bool operator==(const RankedDdx&) const = default;
};

// Additive score: evoking-strength credit for PRESENT linked findings,
// frequency penalty for ABSENT linked findings, import penalty for PRESENT
// findings the disease does not explain. Throws kNotFound on unknown ids.
long ScoreDisease(const KnowledgeBase& kb, const ScoreWeights& weights,
                  const CaseFindings& findings, std::string_view disease_id);

// Scores every disease in kb (closed world).
RankedDdx RankDdx(const KnowledgeBase& kb, const ScoreWeights& weights,
                  const CaseFindings& findings, std::size_t max_n = 5);

}  // namespace rarescale

#endif  // RARESCALE_SCORER_H_
