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

#include "rarescale/scorer.h"

#include <algorithm>
#include <map>
#include <set>

#include "rarescale/error.h"

namespace rarescale {

std::string_view PolarityName(Polarity p) {
  return p == Polarity::kPresent ? "present" : "absent";
}

std::string CheckCase(const KnowledgeBase& kb, const CaseFindings& findings) {
  std::set<std::string_view> seen;
  std::map<std::string_view, std::string_view> present_in_group;
  for (const auto& entry : findings.entries) {
    const Finding* f = kb.FindFinding(entry.finding_id);
    if (f == nullptr) return "unknown finding '" + entry.finding_id + "'";
    if (!seen.insert(entry.finding_id).second) {
      return "finding '" + entry.finding_id + "' appears twice";
    }
    if (entry.polarity == Polarity::kPresent && f->exclusion_group) {
      auto [it, inserted] =
          present_in_group.emplace(*f->exclusion_group, entry.finding_id);
      if (!inserted) {
        return "findings '" + std::string(it->second) + "' and '" +
               entry.finding_id + "' are both present in exclusion group '" +
               *f->exclusion_group + "'";
      }
    }
  }
  return {};
}

void ScoreWeights::Validate() const {
  auto check = [](const std::array<int, 5>& table, const char* name) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table[i] < 0 || (i > 0 && table[i] <= table[i - 1])) {
        throw Error(ErrorCode::kInvalidArgument,
                    std::string(name) +
                        " must be non-negative and strictly increasing");
      }
    }
  };
  check(es_weight, "es_weight");
  check(freq_penalty, "freq_penalty");
  check(import_penalty, "import_penalty");
}

bool RankedDdx::Contains(std::string_view disease_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const ScoredDisease& e) { return e.disease_id == disease_id; });
}

namespace {

long ScoreResolved(const KnowledgeBase& kb, const ScoreWeights& w,
                   const CaseFindings& findings, const DiseaseEntry& disease) {
  long score = 0;
  for (const auto& entry : findings.entries) {
    const Link* link = disease.FindLink(entry.finding_id);
    if (link != nullptr) {
      if (entry.polarity == Polarity::kPresent) {
        score += w.es_weight[link->evoking_strength - 1];
      } else {
        score -= w.freq_penalty[link->frequency - 1];
      }
    } else if (entry.polarity == Polarity::kPresent) {
      score -= w.import_penalty[kb.finding(entry.finding_id).import_score - 1];
    }
  }
  return score;
}

void RequireKnownFindings(const KnowledgeBase& kb, const CaseFindings& findings) {
  for (const auto& entry : findings.entries) kb.finding(entry.finding_id);
}

}  // namespace

long ScoreDisease(const KnowledgeBase& kb, const ScoreWeights& weights,
                  const CaseFindings& findings, std::string_view disease_id) {
  const DiseaseEntry& disease = kb.disease(disease_id);
  RequireKnownFindings(kb, findings);
  return ScoreResolved(kb, weights, findings, disease);
}

RankedDdx RankDdx(const KnowledgeBase& kb, const ScoreWeights& weights,
                  const CaseFindings& findings, std::size_t max_n) {
  RequireKnownFindings(kb, findings);
  std::vector<ScoredDisease> scored;
  for (const auto& disease : kb.diseases()) {
    long s = ScoreResolved(kb, weights, findings, disease);
    if (s > 0) scored.push_back({disease.id, s});
  }
  std::sort(scored.begin(), scored.end(),
            [](const ScoredDisease& a, const ScoredDisease& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.disease_id < b.disease_id;
            });
  if (scored.size() > max_n) scored.resize(max_n);
  return RankedDdx{std::move(scored)};
}

}  // namespace rarescale
