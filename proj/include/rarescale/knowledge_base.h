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

#ifndef RARESCALE_KNOWLEDGE_BASE_H_
#define RARESCALE_KNOWLEDGE_BASE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rarescale {

enum class FindingKind { kDemographic, kPredisposing, kSymptom };

std::string_view FindingKindName(FindingKind kind);
std::optional<FindingKind> ParseFindingKind(std::string_view text);

struct Finding {
  std::string id;
  std::string name;
  std::optional<std::string> definition;
  int import_score = 1;  // disease-independent importance, 1..5
  FindingKind kind = FindingKind::kSymptom;
  // At most one PRESENT member per group; demographic groups need exactly one.
  std::optional<std::string> exclusion_group;
  // Slot value carried by demographic findings, e.g. "male" or "26-55".
  std::optional<std::string> value;

  bool operator==(const Finding&) const = default;
};

struct Link {
  int evoking_strength = 1;
  int frequency = 1;

  bool operator==(const Link&) const = default;
};

struct DiseaseEntry {
  std::string id;
  std::string name;
  std::vector<std::string> categories;
  std::map<std::string, Link, std::less<>> links;  // finding id -> link

  const Link* FindLink(std::string_view finding_id) const {
    auto it = links.find(finding_id);
    return it == links.end() ? nullptr : &it->second;
  }

  bool operator==(const DiseaseEntry&) const = default;
};

struct Violation {
  std::string rule;    // e.g. "dangling-link"
  std::string entity;  // offending finding or disease id
  std::string detail;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

// Immutable disease/finding graph. Entities are stored sorted by id; lookups
// resolve to the first entity with a given id, so duplicate ids survive
// construction and are reported by ValidateKb.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  KnowledgeBase(std::vector<Finding> findings,
                std::vector<DiseaseEntry> diseases);

  const std::vector<Finding>& findings() const { return findings_; }
  const std::vector<DiseaseEntry>& diseases() const { return diseases_; }
  const std::set<std::string>& categories() const { return categories_; }

  const Finding* FindFinding(std::string_view id) const;
  const DiseaseEntry* FindDisease(std::string_view id) const;

  // Throw Error(kNotFound) naming the id.
  const Finding& finding(std::string_view id) const;
  const DiseaseEntry& disease(std::string_view id) const;

  bool operator==(const KnowledgeBase& other) const {
    return findings_ == other.findings_ && diseases_ == other.diseases_;
  }

 private:
  std::vector<Finding> findings_;
  std::vector<DiseaseEntry> diseases_;
  std::set<std::string> categories_;
  std::map<std::string, std::size_t, std::less<>> finding_index_;
  std::map<std::string, std::size_t, std::less<>> disease_index_;
};

// Every invariant violation, in a stable order. Empty iff the KB is valid.
ValidationReport ValidateKb(const KnowledgeBase& kb);

// Text format; see docs/kb_format.md.
std::string WriteKb(const KnowledgeBase& kb);
// Parses without integrity checks. Throws kParse or kRange.
KnowledgeBase ParseKb(std::string_view text);
// Parse + validate. Throws kParse, kRange, kIntegrity or kIo.
KnowledgeBase LoadKb(const std::string& path);
KnowledgeBase LoadKbFromString(std::string_view text);
void SaveKb(const KnowledgeBase& kb, const std::string& path);

struct SynthParams {
  std::uint64_t seed = 7;
  int n_diseases = 30;
  int n_findings = 120;  // non-demographic findings
  int links_min = 8;
  int links_max = 14;
};

// Synthetic stand-in KB: deterministic for a fixed seed and always valid.
// Adds a "sex" and an "age" demographic exclusion group on top of
// n_findings symptom/predisposing findings. Throws kInfeasible.
KnowledgeBase SynthKb(const SynthParams& params);

}  // namespace rarescale

#endif  // RARESCALE_KNOWLEDGE_BASE_H_
