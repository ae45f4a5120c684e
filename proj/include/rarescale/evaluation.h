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

#ifndef RARESCALE_EVALUATION_H_
#define RARESCALE_EVALUATION_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rarescale/knowledge_base.h"
#include "rarescale/llm_gateway.h"
#include "rarescale/scorer.h"

namespace rarescale {

inline constexpr std::size_t kMaxListLength = 5;

// Lowercase, '_' read as a space, runs of whitespace collapsed, trimmed.
std::string NormalizeName(std::string_view name);

// Normalized forms a name answers to: the full name plus each side of an
// " alias " separator.
std::vector<std::string> NameVariants(std::string_view name);

// Case-folded, whitespace-normalized equality, alias-aware.
bool NamesMatch(std::string_view a, std::string_view b);

// ≤5 names, unique after normalization.
struct CandidateList {
  std::vector<std::string> names;

  // Throws kInvalidArgument on a violation.
  void Validate() const;
};

// --- metrics ---------------------------------------------------------------

// 1-based rank of the first matching entry within the first five, if any.
using MatchRank = std::optional<int>;

struct MetricsCore {
  std::size_t n = 0;
  double top1 = 0;
  double top5 = 0;
  double mrr = 0;

  bool operator==(const MetricsCore&) const = default;
};

// Reciprocal rank: 1/r for r <= 5, otherwise 0.
double ReciprocalRank(const MatchRank& rank);

// Throws kInvalidArgument on empty input.
MetricsCore MetricsFromRanks(const std::vector<MatchRank>& ranks);

MatchRank ExactMatchRank(const std::vector<std::string>& prediction, std::string_view gold);

class BinaryJudge;

// Exact matcher unless judge is provided. Throws kInvalidArgument on length
// mismatch or empty input.
MetricsCore TopkMrr(const std::vector<std::vector<std::string>>& predictions,
                    const std::vector<std::string>& golds,
                    BinaryJudge* judge = nullptr);

// --- judges ----------------------------------------------------------------

enum class SimilarityLabel { kUnrelated, kSomewhatRelated, kRelevant, kExtremelyRelevant, kExactMatch };

std::string_view SimilarityLabelName(SimilarityLabel label);
// Throws kUnparseable for anything but the five labels.
SimilarityLabel ParseSimilarityLabel(std::string_view text);

class BinaryJudge {
 public:
  BinaryJudge(LlmClient& llm, const TemplateSet& templates) : llm_(llm), templates_(templates) {}

  // Asks about each entry in rank order and stops at the first "yes".
  MatchRank Judge(const std::vector<std::string>& ddx, std::string_view seed_name);

 private:
  LlmClient& llm_;
  const TemplateSet& templates_;
};

// Throws kUnparseable unless the reply is exactly "yes" or "no" (case and
// surrounding whitespace/period ignored).
bool ParseYesNo(std::string_view reply);

SimilarityLabel JudgeSimilarity(LlmClient& llm, const TemplateSet& templates,
                                const std::vector<std::string>& ddx, std::string_view seed_name);

// --- DDx generation --------------------------------------------------------

inline constexpr std::string_view kCandidateSectionOpen = "=== RARE DISEASE CANDIDATES ===";
inline constexpr std::string_view kCandidateSectionClose = "=== END RARE DISEASE CANDIDATES ===";

std::string BuildDdxPrompt(const TemplateSet& templates, std::string_view chat_text,
                           const std::optional<CandidateList>& candidates);

struct DdxResult {
  std::vector<std::string> names;       // ≤5
  std::vector<bool> from_candidates;    // parallel to names
  std::string raw;
  std::vector<std::string> warnings;
};

// Parses "N. name" / "- name" / bare lines after the last "FINAL DDX:" marker
// (or the whole reply when there is none). Throws kUnparseable when no entry
// is found.
std::vector<std::string> ParseNameList(std::string_view reply, std::string_view marker);

DdxResult RunDdx(LlmClient& llm, const TemplateSet& templates, std::string_view chat_text,
                 const std::optional<CandidateList>& candidates);

// --- candidate generation --------------------------------------------------

enum class CandidateBackend { kReference, kExternal };

// Expert-system scoring over the KB (every KB disease is a rare disease).
CandidateList ReferenceCandidates(const KnowledgeBase& kb, const ScoreWeights& weights,
                                  const CaseFindings& findings);

// A served model or LLM answering the candidate_gen prompt.
CandidateList ExternalCandidates(LlmClient& llm, const TemplateSet& templates,
                                 std::string_view chat_text);

// --- breakdowns ------------------------------------------------------------

struct ScoredResult {
  std::string seed_disease;  // KB id
  MatchRank rank;
};

struct CategoryRow {
  std::string category;
  MetricsCore metrics;
};

// Each result counts toward every category of its seed disease. Throws
// kNotFound for an unknown disease.
std::vector<CategoryRow> CategoryBreakdown(const std::vector<ScoredResult>& results,
                                           const KnowledgeBase& kb);

struct EvalReport {
  MetricsCore metrics;
  std::map<std::string, int> label_distribution;  // similarity label -> count
  std::vector<CategoryRow> categories;
  std::optional<double> p_value;
  std::optional<MetricsCore> baseline;
  std::size_t paired_n = 0;
};

nlohmann::json EvalReportToJson(const EvalReport& report);
std::string FormatEvalReport(const EvalReport& report, std::string_view title);

}  // namespace rarescale

#endif  // RARESCALE_EVALUATION_H_
