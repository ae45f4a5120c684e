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

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rarescale/error.h"

namespace rarescale {
namespace {

constexpr std::string_view kFormatHeader = "rarescale-kb";
constexpr int kFormatVersion = 1;

bool InScoreRange(int v) { return v >= 1 && v <= 5; }

std::string EscapeText(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    bool edge = i == 0 || i + 1 == text.size();
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else if (c == '\r') {
      out += "\\r";
    } else if (c == ' ' && edge) {
      out += "\\s";  // values are trimmed on read
    } else {
      out += c;
    }
  }
  return out;
}

std::string UnescapeText(std::string_view text, int line_no) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out += text[i];
      continue;
    }
    if (i + 1 == text.size()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": dangling escape");
    }
    char next = text[++i];
    if (next == '\\') {
      out += '\\';
    } else if (next == 'n') {
      out += '\n';
    } else if (next == 't') {
      out += '\t';
    } else if (next == 'r') {
      out += '\r';
    } else if (next == 's') {
      out += ' ';
    } else {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": unknown escape \\" + next);
    }
  }
  return out;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits "key rest" at the first space.
std::pair<std::string_view, std::string_view> SplitKey(std::string_view line) {
  auto pos = line.find(' ');
  if (pos == std::string_view::npos) return {line, {}};
  return {line.substr(0, pos), Trim(line.substr(pos + 1))};
}

int ParseInt(std::string_view text, int line_no) {
  int value = 0;
  if (text.empty()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": expected integer");
  }
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-') {
    negative = true;
    i = 1;
  }
  if (i == text.size()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": expected integer");
  }
  for (; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9' || value > 100000) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": bad integer '" +
                                         std::string(text) + "'");
    }
    value = value * 10 + (text[i] - '0');
  }
  return negative ? -value : value;
}

bool IsToken(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

}  // namespace

std::string_view FindingKindName(FindingKind kind) {
  switch (kind) {
    case FindingKind::kDemographic: return "demographic";
    case FindingKind::kPredisposing: return "predisposing";
    case FindingKind::kSymptom: return "symptom";
  }
  return "symptom";
}

std::optional<FindingKind> ParseFindingKind(std::string_view text) {
  if (text == "demographic") return FindingKind::kDemographic;
  if (text == "predisposing") return FindingKind::kPredisposing;
  if (text == "symptom") return FindingKind::kSymptom;
  return std::nullopt;
}

KnowledgeBase::KnowledgeBase(std::vector<Finding> findings,
                             std::vector<DiseaseEntry> diseases)
    : findings_(std::move(findings)), diseases_(std::move(diseases)) {
  std::stable_sort(findings_.begin(), findings_.end(),
                   [](const Finding& a, const Finding& b) { return a.id < b.id; });
  std::stable_sort(
      diseases_.begin(), diseases_.end(),
      [](const DiseaseEntry& a, const DiseaseEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < findings_.size(); ++i) {
    finding_index_.emplace(findings_[i].id, i);
  }
  for (std::size_t i = 0; i < diseases_.size(); ++i) {
    disease_index_.emplace(diseases_[i].id, i);
    for (const auto& c : diseases_[i].categories) categories_.insert(c);
  }
}

const Finding* KnowledgeBase::FindFinding(std::string_view id) const {
  auto it = finding_index_.find(id);
  return it == finding_index_.end() ? nullptr : &findings_[it->second];
}

const DiseaseEntry* KnowledgeBase::FindDisease(std::string_view id) const {
  auto it = disease_index_.find(id);
  return it == disease_index_.end() ? nullptr : &diseases_[it->second];
}

const Finding& KnowledgeBase::finding(std::string_view id) const {
  const Finding* f = FindFinding(id);
  if (f == nullptr) {
    throw Error(ErrorCode::kNotFound, "unknown finding '" + std::string(id) + "'");
  }
  return *f;
}

const DiseaseEntry& KnowledgeBase::disease(std::string_view id) const {
  const DiseaseEntry* d = FindDisease(id);
  if (d == nullptr) {
    throw Error(ErrorCode::kNotFound, "unknown disease '" + std::string(id) + "'");
  }
  return *d;
}

ValidationReport ValidateKb(const KnowledgeBase& kb) {
  ValidationReport report;
  auto add = [&report](std::string rule, std::string entity, std::string detail) {
    report.push_back({std::move(rule), std::move(entity), std::move(detail)});
  };

  std::set<std::string> seen;
  // group -> (has demographic member, has other member)
  std::map<std::string, std::pair<bool, bool>> group_kinds;
  for (const auto& f : kb.findings()) {
    if (!seen.insert(f.id).second) {
      add("duplicate-id", f.id, "finding id appears more than once");
    }
    if (!InScoreRange(f.import_score)) {
      add("import-out-of-range", f.id,
          "import " + std::to_string(f.import_score) + " outside 1..5");
    }
    if (f.kind == FindingKind::kDemographic && !f.exclusion_group) {
      add("demographic-without-group", f.id,
          "demographic finding has no exclusion group");
    }
    if (f.exclusion_group) {
      auto& kinds = group_kinds[*f.exclusion_group];
      (f.kind == FindingKind::kDemographic ? kinds.first : kinds.second) = true;
    }
  }
  for (const auto& [group, kinds] : group_kinds) {
    if (kinds.first && kinds.second) {
      add("group-kind-mismatch", group,
          "exclusion group mixes demographic and non-demographic findings");
    }
  }

  seen.clear();
  for (const auto& d : kb.diseases()) {
    if (!seen.insert(d.id).second) {
      add("duplicate-id", d.id, "disease id appears more than once");
    }
    if (d.categories.empty()) {
      add("no-categories", d.id, "disease has no category");
    }
    bool has_symptom = false;
    for (const auto& [fid, link] : d.links) {
      const Finding* f = kb.FindFinding(fid);
      if (f == nullptr) {
        add("dangling-link", d.id, "links unknown finding '" + fid + "'");
      } else if (f->kind == FindingKind::kSymptom) {
        has_symptom = true;
      }
      if (!InScoreRange(link.evoking_strength) ||
          !InScoreRange(link.frequency)) {
        add("score-out-of-range", d.id,
            "link to '" + fid + "' has evoking_strength " +
                std::to_string(link.evoking_strength) + ", frequency " +
                std::to_string(link.frequency));
      }
    }
    if (!has_symptom) {
      add("no-symptom-links", d.id, "disease links no symptom finding");
    }
  }
  return report;
}

std::string WriteKb(const KnowledgeBase& kb) {
  std::ostringstream out;
  out << kFormatHeader << ' ' << kFormatVersion << '\n';
  for (const auto& f : kb.findings()) {
    out << "\nfinding " << f.id << '\n';
    out << "  name " << EscapeText(f.name) << '\n';
    out << "  kind " << FindingKindName(f.kind) << '\n';
    out << "  import " << f.import_score << '\n';
    if (f.exclusion_group) out << "  group " << *f.exclusion_group << '\n';
    if (f.value) out << "  value " << EscapeText(*f.value) << '\n';
    if (f.definition) {
      out << "  definition " << EscapeText(*f.definition) << '\n';
    }
    out << "end\n";
  }
  for (const auto& d : kb.diseases()) {
    out << "\ndisease " << d.id << '\n';
    out << "  name " << EscapeText(d.name) << '\n';
    for (const auto& c : d.categories) out << "  category " << EscapeText(c) << '\n';
    for (const auto& [fid, link] : d.links) {
      out << "  link " << fid << ' ' << link.evoking_strength << ' '
          << link.frequency << '\n';
    }
    out << "end\n";
  }
  return out.str();
}

KnowledgeBase ParseKb(std::string_view text) {
  std::vector<Finding> findings;
  std::vector<DiseaseEntry> diseases;

  enum class Block { kNone, kFinding, kDisease };
  Block block = Block::kNone;
  bool header_seen = false;
  Finding finding;
  DiseaseEntry disease;
  bool has_name = false, has_kind = false, has_import = false;
  int block_start = 0;

  auto fail = [](int line_no, const std::string& msg) -> Error {
    return Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + msg);
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = Trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    auto [key, rest] = SplitKey(line);
    if (!header_seen) {
      if (key != kFormatHeader) throw fail(line_no, "missing 'rarescale-kb' header");
      if (ParseInt(rest, line_no) != kFormatVersion) {
        throw fail(line_no, "unsupported format version '" + std::string(rest) + "'");
      }
      header_seen = true;
      continue;
    }

    if (block == Block::kNone) {
      if (key == "finding" || key == "disease") {
        if (!IsToken(rest)) throw fail(line_no, "expected an id after '" + std::string(key) + "'");
        block_start = line_no;
        has_name = has_kind = has_import = false;
        if (key == "finding") {
          block = Block::kFinding;
          finding = Finding{};
          finding.id = std::string(rest);
        } else {
          block = Block::kDisease;
          disease = DiseaseEntry{};
          disease.id = std::string(rest);
        }
        continue;
      }
      throw fail(line_no, "expected 'finding' or 'disease', got '" + std::string(key) + "'");
    }

    if (key == "end") {
      if (!rest.empty()) throw fail(line_no, "unexpected text after 'end'");
      if (block == Block::kFinding) {
        if (!has_name || !has_kind || !has_import) {
          throw fail(block_start, "finding '" + finding.id +
                                      "' requires name, kind and import");
        }
        findings.push_back(std::move(finding));
      } else {
        if (!has_name) {
          throw fail(block_start, "disease '" + disease.id + "' requires a name");
        }
        diseases.push_back(std::move(disease));
      }
      block = Block::kNone;
      continue;
    }

    if (block == Block::kFinding) {
      if (key == "name") {
        finding.name = UnescapeText(rest, line_no);
        has_name = true;
      } else if (key == "kind") {
        auto kind = ParseFindingKind(rest);
        if (!kind) throw fail(line_no, "unknown kind '" + std::string(rest) + "'");
        finding.kind = *kind;
        has_kind = true;
      } else if (key == "import") {
        finding.import_score = ParseInt(rest, line_no);
        if (!InScoreRange(finding.import_score)) {
          throw Error(ErrorCode::kRange,
                      "finding '" + finding.id + "': import " +
                          std::to_string(finding.import_score) + " outside 1..5");
        }
        has_import = true;
      } else if (key == "group") {
        if (!IsToken(rest)) throw fail(line_no, "group must be a single token");
        finding.exclusion_group = std::string(rest);
      } else if (key == "value") {
        finding.value = UnescapeText(rest, line_no);
      } else if (key == "definition") {
        finding.definition = UnescapeText(rest, line_no);
      } else {
        throw fail(line_no, "unknown finding field '" + std::string(key) + "'");
      }
    } else {
      if (key == "name") {
        disease.name = UnescapeText(rest, line_no);
        has_name = true;
      } else if (key == "category") {
        disease.categories.push_back(UnescapeText(rest, line_no));
      } else if (key == "link") {
        std::istringstream fields{std::string(rest)};
        std::string fid, es_text, freq_text, extra;
        if (!(fields >> fid >> es_text >> freq_text) || (fields >> extra)) {
          throw fail(line_no, "link needs '<finding_id> <evoking_strength> <frequency>'");
        }
        Link link{ParseInt(es_text, line_no), ParseInt(freq_text, line_no)};
        if (!InScoreRange(link.evoking_strength) || !InScoreRange(link.frequency)) {
          throw Error(ErrorCode::kRange,
                      "disease '" + disease.id + "': link to '" + fid +
                          "' has evoking_strength " +
                          std::to_string(link.evoking_strength) + ", frequency " +
                          std::to_string(link.frequency) + " (allowed 1..5)");
        }
        if (!disease.links.emplace(fid, link).second) {
          throw fail(line_no, "disease '" + disease.id + "' links '" + fid + "' twice");
        }
      } else {
        throw fail(line_no, "unknown disease field '" + std::string(key) + "'");
      }
    }
  }
  if (!header_seen) throw Error(ErrorCode::kParse, "empty knowledge base file");
  if (block != Block::kNone) throw fail(block_start, "block not closed with 'end'");
  return KnowledgeBase(std::move(findings), std::move(diseases));
}

KnowledgeBase LoadKbFromString(std::string_view text) {
  KnowledgeBase kb = ParseKb(text);
  ValidationReport report = ValidateKb(kb);
  if (!report.empty()) {
    const Violation& v = report.front();
    std::string msg = v.rule + " at '" + v.entity + "': " + v.detail;
    if (report.size() > 1) {
      msg += " (+" + std::to_string(report.size() - 1) + " more)";
    }
    throw Error(ErrorCode::kIntegrity, msg);
  }
  return kb;
}

KnowledgeBase LoadKb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open knowledge base '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return LoadKbFromString(buffer.str());
}

void SaveKb(const KnowledgeBase& kb, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write knowledge base '" + path + "'");
  out << WriteKb(kb);
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace rarescale
