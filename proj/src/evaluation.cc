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

#include "rarescale/evaluation.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <iomanip>
#include <set>
#include <sstream>

#include "rarescale/error.h"

namespace rarescale {
namespace {

std::string_view TrimView(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string Complete(LlmClient& llm, std::string prompt) {
  return llm.Complete(ChatTurnRequest::FromPrompt(std::move(prompt))).text;
}

}  // namespace

std::string NormalizeName(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : name) {
    if (std::isspace(c) || c == '_') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::vector<std::string> NameVariants(std::string_view name) {
  std::string norm = NormalizeName(name);
  std::vector<std::string> variants{norm};
  constexpr std::string_view kAlias = " alias ";
  std::size_t start = 0;
  std::vector<std::string> parts;
  for (;;) {
    std::size_t pos = norm.find(kAlias, start);
    if (pos == std::string::npos) {
      parts.push_back(norm.substr(start));
      break;
    }
    parts.push_back(norm.substr(start, pos - start));
    start = pos + kAlias.size();
  }
  if (parts.size() > 1) {
    for (auto& p : parts) {
      // "(alias x)" style leaves stray parentheses behind.
      std::string cleaned;
      for (char c : p) {
        if (c != '(' && c != ')') cleaned += c;
      }
      cleaned = NormalizeName(cleaned);
      if (!cleaned.empty() &&
          std::find(variants.begin(), variants.end(), cleaned) == variants.end()) {
        variants.push_back(cleaned);
      }
    }
  }
  return variants;
}

bool NamesMatch(std::string_view a, std::string_view b) {
  auto va = NameVariants(a);
  auto vb = NameVariants(b);
  for (const auto& x : va) {
    if (x.empty()) continue;
    if (std::find(vb.begin(), vb.end(), x) != vb.end()) return true;
  }
  return false;
}

void CandidateList::Validate() const {
  if (names.size() > kMaxListLength) {
    throw Error(ErrorCode::kInvalidArgument, "candidate list longer than 5");
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(NormalizeName(n)).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate candidate '" + n + "'");
    }
  }
}

double ReciprocalRank(const MatchRank& rank) {
  if (!rank || *rank < 1 || *rank > static_cast<int>(kMaxListLength)) return 0.0;
  return 1.0 / *rank;
}

MetricsCore MetricsFromRanks(const std::vector<MatchRank>& ranks) {
  if (ranks.empty()) throw Error(ErrorCode::kInvalidArgument, "no predictions to score");
  MetricsCore m;
  m.n = ranks.size();
  std::size_t hits1 = 0, hits5 = 0;
  double rr_sum = 0;
  for (const auto& r : ranks) {
    if (r && *r == 1) ++hits1;
    if (r && *r >= 1 && *r <= static_cast<int>(kMaxListLength)) ++hits5;
    rr_sum += ReciprocalRank(r);
  }
  m.top1 = static_cast<double>(hits1) / static_cast<double>(m.n);
  m.top5 = static_cast<double>(hits5) / static_cast<double>(m.n);
  m.mrr = rr_sum / static_cast<double>(m.n);
  return m;
}

MatchRank ExactMatchRank(const std::vector<std::string>& prediction, std::string_view gold) {
  std::size_t limit = std::min(prediction.size(), kMaxListLength);
  for (std::size_t i = 0; i < limit; ++i) {
    if (NamesMatch(prediction[i], gold)) return static_cast<int>(i + 1);
  }
  return std::nullopt;
}

MetricsCore TopkMrr(const std::vector<std::vector<std::string>>& predictions,
                    const std::vector<std::string>& golds, BinaryJudge* judge) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidArgument, "predictions and golds differ in length");
  }
  std::vector<MatchRank> ranks;
  ranks.reserve(golds.size());
  for (std::size_t i = 0; i < golds.size(); ++i) {
    ranks.push_back(judge ? judge->Judge(predictions[i], golds[i])
                          : ExactMatchRank(predictions[i], golds[i]));
  }
  return MetricsFromRanks(ranks);
}

std::string_view SimilarityLabelName(SimilarityLabel label) {
  switch (label) {
    case SimilarityLabel::kUnrelated: return "unrelated";
    case SimilarityLabel::kSomewhatRelated: return "somewhat related";
    case SimilarityLabel::kRelevant: return "relevant";
    case SimilarityLabel::kExtremelyRelevant: return "extremely relevant";
    case SimilarityLabel::kExactMatch: return "exact match";
  }
  return "unrelated";
}

SimilarityLabel ParseSimilarityLabel(std::string_view text) {
  std::string norm = NormalizeName(text);
  while (!norm.empty() && norm.back() == '.') norm.pop_back();
  for (auto label : {SimilarityLabel::kUnrelated, SimilarityLabel::kSomewhatRelated,
                     SimilarityLabel::kRelevant, SimilarityLabel::kExtremelyRelevant,
                     SimilarityLabel::kExactMatch}) {
    if (norm == SimilarityLabelName(label)) return label;
  }
  throw Error(ErrorCode::kUnparseable, "unrecognized similarity label '" +
                                           std::string(TrimView(text)) + "'");
}

bool ParseYesNo(std::string_view reply) {
  std::string norm = Lower(TrimView(reply));
  while (!norm.empty() && norm.back() == '.') norm.pop_back();
  if (norm == "yes") return true;
  if (norm == "no") return false;
  throw Error(ErrorCode::kUnparseable,
              "judge verdict must be yes or no, got '" + std::string(TrimView(reply)) + "'");
}

MatchRank BinaryJudge::Judge(const std::vector<std::string>& ddx, std::string_view seed_name) {
  if (ddx.size() > kMaxListLength) {
    throw Error(ErrorCode::kInvalidArgument, "DDx longer than 5");
  }
  const PromptTemplate& t = templates_.Get("judge_binary");
  for (std::size_t i = 0; i < ddx.size(); ++i) {
    std::string prompt = t.Render({{"diagnosis", ddx[i]}, {"reference", std::string(seed_name)}});
    if (ParseYesNo(Complete(llm_, std::move(prompt)))) return static_cast<int>(i + 1);
  }
  return std::nullopt;
}

SimilarityLabel JudgeSimilarity(LlmClient& llm, const TemplateSet& templates,
                                const std::vector<std::string>& ddx, std::string_view seed_name) {
  std::string list;
  for (std::size_t i = 0; i < ddx.size(); ++i) {
    list += std::to_string(i + 1) + ". " + ddx[i] + "\n";
  }
  if (list.empty()) list = "(empty)\n";
  std::string prompt = templates.Get("judge_similarity")
                           .Render({{"ddx", list}, {"reference", std::string(seed_name)}});
  return ParseSimilarityLabel(Complete(llm, std::move(prompt)));
}

std::string BuildDdxPrompt(const TemplateSet& templates, std::string_view chat_text,
                           const std::optional<CandidateList>& candidates) {
  if (TrimView(chat_text).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "chat text is empty");
  }
  std::string section;
  if (candidates) {
    candidates->Validate();
    std::string list;
    for (std::size_t i = 0; i < candidates->names.size(); ++i) {
      list += std::to_string(i + 1) + ". " + candidates->names[i] + "\n";
    }
    if (list.empty()) list = "(none)\n";
    section = templates.Get("ddx_candidates").Render({{"candidates", list}});
  }
  return templates.Get("ddx").Render(
      {{"chat", std::string(chat_text)}, {"candidate_instructions", section}});
}

std::vector<std::string> ParseNameList(std::string_view reply, std::string_view marker) {
  std::string lower = Lower(reply);
  std::string lower_marker = Lower(marker);
  std::size_t start = 0;
  if (!lower_marker.empty()) {
    std::size_t pos = lower.rfind(lower_marker);
    if (pos != std::string::npos) start = pos + lower_marker.size();
  }
  std::vector<std::string> names;
  std::set<std::string> seen;
  std::istringstream lines{std::string(reply.substr(start))};
  std::string raw;
  while (std::getline(lines, raw)) {
    std::string_view line = TrimView(raw);
    if (line.empty()) continue;
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      line = TrimView(line.substr(i + 1));
    } else if (line.front() == '-' || line.front() == '*') {
      line = TrimView(line.substr(1));
    }
    if (line.empty()) continue;
    std::string name(line);
    if (seen.insert(NormalizeName(name)).second) names.push_back(std::move(name));
  }
  return names;
}

DdxResult RunDdx(LlmClient& llm, const TemplateSet& templates, std::string_view chat_text,
                 const std::optional<CandidateList>& candidates) {
  DdxResult result;
  result.raw = Complete(llm, BuildDdxPrompt(templates, chat_text, candidates));
  result.names = ParseNameList(result.raw, "FINAL DDX:");
  if (result.names.empty()) {
    throw Error(ErrorCode::kUnparseable, "DDx reply contains no diagnoses");
  }
  if (result.names.size() > kMaxListLength) {
    result.warnings.push_back("DDx had " + std::to_string(result.names.size()) +
                              " entries; truncated to 5");
    result.names.resize(kMaxListLength);
  }
  for (const auto& name : result.names) {
    bool hit = false;
    if (candidates) {
      for (const auto& c : candidates->names) hit = hit || NamesMatch(name, c);
    }
    result.from_candidates.push_back(hit);
  }
  return result;
}

CandidateList ReferenceCandidates(const KnowledgeBase& kb, const ScoreWeights& weights,
                                  const CaseFindings& findings) {
  CandidateList out;
  for (const auto& e : RankDdx(kb, weights, findings, kMaxListLength).entries) {
    out.names.push_back(kb.disease(e.disease_id).name);
  }
  return out;
}

CandidateList ExternalCandidates(LlmClient& llm, const TemplateSet& templates,
                                 std::string_view chat_text) {
  std::string prompt = templates.Get("candidate_gen").Render({{"chat", std::string(chat_text)}});
  std::string reply = Complete(llm, std::move(prompt));
  if (Lower(reply).find("candidates:") == std::string::npos) {
    throw Error(ErrorCode::kUnparseable, "candidate reply has no CANDIDATES: line");
  }
  CandidateList out;
  out.names = ParseNameList(reply, "CANDIDATES:");
  if (out.names.size() > kMaxListLength) out.names.resize(kMaxListLength);
  return out;
}

std::vector<CategoryRow> CategoryBreakdown(const std::vector<ScoredResult>& results,
                                           const KnowledgeBase& kb) {
  std::map<std::string, std::vector<MatchRank>> by_category;
  for (const auto& r : results) {
    for (const auto& category : kb.disease(r.seed_disease).categories) {
      by_category[category].push_back(r.rank);
    }
  }
  std::vector<CategoryRow> rows;
  for (const auto& [category, ranks] : by_category) {
    rows.push_back({category, MetricsFromRanks(ranks)});
  }
  return rows;
}

nlohmann::json EvalReportToJson(const EvalReport& r) {
  auto metrics = [](const MetricsCore& m) {
    return nlohmann::json{{"n", m.n}, {"top1", m.top1}, {"top5", m.top5}, {"mrr", m.mrr}};
  };
  nlohmann::json j = metrics(r.metrics);
  j["label_distribution"] = r.label_distribution;
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& row : r.categories) {
    nlohmann::json c = metrics(row.metrics);
    c["category"] = row.category;
    cats.push_back(std::move(c));
  }
  j["categories"] = std::move(cats);
  if (r.baseline) {
    j["baseline"] = metrics(*r.baseline);
    j["paired_n"] = r.paired_n;
  }
  j["p_value"] = r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr);
  return j;
}

std::string FormatEvalReport(const EvalReport& r, std::string_view title) {
  std::ostringstream out;
  out << title << "\n";
  out << "n=" << r.metrics.n << "  top1=" << Fixed(r.metrics.top1, 4)
      << "  top5=" << Fixed(r.metrics.top5, 4) << "  mrr=" << Fixed(r.metrics.mrr, 4) << "\n";
  if (r.baseline) {
    out << "baseline: top1=" << Fixed(r.baseline->top1, 4) << "  top5="
        << Fixed(r.baseline->top5, 4) << "  mrr=" << Fixed(r.baseline->mrr, 4)
        << "  (paired n=" << r.paired_n << ")\n";
  }
  if (r.p_value) {
    std::ostringstream p;
    p << std::setprecision(4) << *r.p_value;
    out << "wilcoxon signed-rank p=" << p.str() << "\n";
  }
  if (!r.label_distribution.empty()) {
    out << "similarity labels:\n";
    for (const auto& [label, count] : r.label_distribution) {
      out << "  " << label << ": " << count << "\n";
    }
  }
  if (!r.categories.empty()) {
    out << "by category (top1 / top5 / mrr / n):\n";
    for (const auto& row : r.categories) {
      out << "  " << row.category << ": " << Fixed(row.metrics.top1, 3) << " / "
          << Fixed(row.metrics.top5, 3) << " / " << Fixed(row.metrics.mrr, 3) << " / "
          << row.metrics.n << "\n";
    }
  }
  return out.str();
}

}  // namespace rarescale
