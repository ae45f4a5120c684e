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

#include "rarescale/chat_simulator.h"

#include <algorithm>
#include <array>
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

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    lines.push_back(text.substr(pos, eol - pos));
    pos = eol + 1;
  }
  return lines;
}

struct AgeRange {
  int lo;
  int hi;
};

// "26-55" or "56+".
std::optional<AgeRange> ParseAgeBand(std::string_view band) {
  band = TrimView(band);
  try {
    if (!band.empty() && band.back() == '+') {
      return AgeRange{std::stoi(std::string(band.substr(0, band.size() - 1))), 95};
    }
    auto dash = band.find('-');
    if (dash == std::string_view::npos) return std::nullopt;
    return AgeRange{std::stoi(std::string(band.substr(0, dash))),
                    std::stoi(std::string(band.substr(dash + 1)))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

constexpr std::array<std::string_view, 12> kFirstNames = {
    "Maria", "James", "Aisha", "Wei", "Carlos", "Olga",
    "Samuel", "Priya", "Tomas", "Grace", "Yusuf", "Hannah"};
constexpr std::array<std::string_view, 12> kLastNames = {
    "Garcia", "Okafor", "Chen", "Novak", "Hughes", "Tanaka",
    "Silva", "Haddad", "Kowalski", "Mensah", "Larsen", "Patel"};
constexpr std::array<std::string_view, 6> kRaces = {
    "White", "Black or African American", "Asian", "Hispanic or Latino",
    "American Indian or Alaska Native", "Native Hawaiian or Pacific Islander"};
constexpr std::array<std::string_view, 5> kEducation = {
    "Some high school", "High school diploma", "Some college",
    "Bachelor's degree", "Graduate degree"};
constexpr std::array<std::string_view, 10> kLocations = {
    "Denver, USA",       "Leeds, UK",        "Toronto, Canada", "Perth, Australia",
    "Austin, USA",       "Cork, Ireland",    "Dayton, USA",     "Auckland, New Zealand",
    "Glasgow, UK",       "Calgary, Canada"};

template <std::size_t N>
std::string Pick(const std::array<std::string_view, N>& items, Rng& rng) {
  return std::string(items[rng.Below(N)]);
}

DemographicProfile SampleLocalProfile(const StructuredCase& c, Rng& rng) {
  DemographicProfile p;
  p.name = Pick(kFirstNames, rng) + " " + Pick(kLastNames, rng);
  auto sex = c.demographics.find("sex");
  p.gender = sex != c.demographics.end() ? sex->second
                                         : (rng.Bernoulli(0.5) ? "female" : "male");
  AgeRange range{18, 85};
  auto age = c.demographics.find("age");
  if (age != c.demographics.end()) {
    if (auto band = ParseAgeBand(age->second)) range = *band;
  }
  p.age = static_cast<int>(rng.Between(range.lo, range.hi));
  p.race = Pick(kRaces, rng);
  p.education = Pick(kEducation, rng);
  p.location = Pick(kLocations, rng);
  return p;
}

DemographicProfile ParseProfileReply(std::string_view reply) {
  DemographicProfile p;
  std::set<std::string> seen;
  for (auto line : SplitLines(reply)) {
    line = TrimView(line);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key = Lower(TrimView(line.substr(0, colon)));
    std::string value(TrimView(line.substr(colon + 1)));
    if (key == "name") {
      p.name = value;
    } else if (key == "gender") {
      p.gender = Lower(value);
    } else if (key == "age") {
      try {
        p.age = std::stoi(value);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kUnparseable, "profile age is not an integer: '" + value + "'");
      }
    } else if (key == "race") {
      p.race = value;
    } else if (key == "education") {
      p.education = value;
    } else if (key == "location") {
      p.location = value;
    } else {
      continue;
    }
    seen.insert(key);
  }
  if (seen.size() != 6) {
    throw Error(ErrorCode::kUnparseable, "profile reply must contain all six fields");
  }
  return p;
}

std::string RenderFixedSlots(const StructuredCase& c) {
  std::string out;
  auto sex = c.demographics.find("sex");
  if (sex != c.demographics.end()) out += "gender: " + sex->second + "\n";
  auto age = c.demographics.find("age");
  if (age != c.demographics.end()) {
    if (auto band = ParseAgeBand(age->second)) {
      out += "age: between " + std::to_string(band->lo) + " and " +
             std::to_string(band->hi) + "\n";
    }
  }
  for (const auto& [slot, value] : c.demographics) {
    if (slot != "sex" && slot != "age") out += slot + ": " + value + "\n";
  }
  if (out.empty()) out = "(none)\n";
  return out;
}

std::string SystemText(const DemographicProfile& profile) {
  return "Patient profile. " + ProfileText(profile);
}

std::string EntryLabel(const CaseEntry& e) {
  return e.finding_id + " (" + std::string(PolarityName(e.polarity)) + ")";
}

std::string PhrasingLines(const ChatContext& ctx, const StructuredCase& c,
                          const std::vector<CaseEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    auto phrases = ctx.bank.Phrases(c.seed_disease, e.finding_id);
    if (phrases.empty()) continue;
    std::size_t keep = static_cast<std::size_t>(std::max(0, ctx.phrasings_per_finding));
    std::size_t start = phrases.size() > keep ? phrases.size() - keep : 0;
    out += "- [" + e.finding_id + "] " + ctx.kb.finding(e.finding_id).name + ":";
    for (std::size_t i = start; i < phrases.size(); ++i) out += " \"" + phrases[i] + "\"";
    out += "\n";
  }
  if (out.empty()) out = "(none)\n";
  return out;
}

void RecordPhrasings(const ChatContext& ctx, const StructuredCase& c,
                     const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages) {
    if (m.role != Speaker::kPatient) continue;
    for (const auto& f : m.findings) ctx.bank.Append(c.seed_disease, f.finding_id, m.text);
  }
}

std::string Complete(LlmClient& llm, std::string prompt) {
  return llm.Complete(ChatTurnRequest::FromPrompt(std::move(prompt))).text;
}

std::vector<CaseEntry> ParseAnnotations(std::string_view text,
                                        const std::vector<CaseEntry>& allowed,
                                        int line_no) {
  std::vector<CaseEntry> out;
  text = TrimView(text);
  if (Lower(text) == "none") return out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = TrimView(text.substr(pos, end - pos));
    pos = end + 1;
    if (item.empty()) continue;
    auto open = item.find('(');
    if (open == std::string_view::npos || item.back() != ')') {
      throw Error(ErrorCode::kUnparseable, "chat line " + std::to_string(line_no) +
                                               ": bad annotation '" + std::string(item) + "'");
    }
    std::string id(TrimView(item.substr(0, open)));
    std::string pol = Lower(TrimView(item.substr(open + 1, item.size() - open - 2)));
    Polarity polarity;
    if (pol == "present") {
      polarity = Polarity::kPresent;
    } else if (pol == "absent") {
      polarity = Polarity::kAbsent;
    } else {
      throw Error(ErrorCode::kUnparseable, "chat line " + std::to_string(line_no) +
                                               ": bad polarity '" + pol + "'");
    }
    CaseEntry entry{id, polarity};
    if (std::find(allowed.begin(), allowed.end(), entry) == allowed.end()) {
      throw Error(ErrorCode::kAnnotation,
                  "annotation " + EntryLabel(entry) + " is not a finding of this case");
    }
    if (std::find(out.begin(), out.end(), entry) == out.end()) out.push_back(entry);
  }
  return out;
}

}  // namespace

std::string_view SpeakerName(Speaker s) {
  switch (s) {
    case Speaker::kSystem: return "system";
    case Speaker::kProvider: return "provider";
    case Speaker::kPatient: return "patient";
  }
  return "system";
}

std::string_view ChatModeName(ChatMode mode) {
  return mode == ChatMode::kSingle ? "single" : "turnwise";
}

PhraseBank::PhraseBank(const PhraseBank& other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  phrases_ = other.phrases_;
}

PhraseBank& PhraseBank::operator=(const PhraseBank& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  phrases_ = other.phrases_;
  return *this;
}

std::vector<std::string> PhraseBank::Phrases(const std::string& disease,
                                             const std::string& finding) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto d = phrases_.find(disease);
  if (d == phrases_.end()) return {};
  auto f = d->second.find(finding);
  return f == d->second.end() ? std::vector<std::string>{} : f->second;
}

std::size_t PhraseBank::Count(const std::string& disease, const std::string& finding) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto d = phrases_.find(disease);
  if (d == phrases_.end()) return 0;
  auto f = d->second.find(finding);
  return f == d->second.end() ? 0 : f->second.size();
}

void PhraseBank::Append(const std::string& disease, const std::string& finding,
                        std::string phrase) {
  std::lock_guard<std::mutex> lock(mu_);
  phrases_[disease][finding].push_back(std::move(phrase));
}

nlohmann::json PhraseBank::ToJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  return nlohmann::json(phrases_);
}

PhraseBank PhraseBank::FromJson(const nlohmann::json& j) {
  PhraseBank bank;
  try {
    j.get_to(bank.phrases_);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad phrase bank: ") + e.what());
  }
  return bank;
}

std::vector<CaseEntry> ChatFindings(const KnowledgeBase& kb, const StructuredCase& c) {
  std::vector<CaseEntry> out;
  for (const auto& e : c.findings.entries) {
    if (kb.finding(e.finding_id).kind != FindingKind::kDemographic) out.push_back(e);
  }
  return out;
}

std::string CheckProfile(const DemographicProfile& p, const StructuredCase& c) {
  if (p.name.empty() || p.gender.empty() || p.race.empty() || p.education.empty() ||
      p.location.empty() || p.age < 0) {
    return "profile has empty slots";
  }
  auto sex = c.demographics.find("sex");
  if (sex != c.demographics.end() && Lower(p.gender) != Lower(sex->second)) {
    return "profile gender '" + p.gender + "' contradicts case sex '" + sex->second + "'";
  }
  auto age = c.demographics.find("age");
  if (age != c.demographics.end()) {
    auto band = ParseAgeBand(age->second);
    if (band && (p.age < band->lo || p.age > band->hi)) {
      return "profile age " + std::to_string(p.age) + " outside case age band " + age->second;
    }
  }
  return {};
}

DemographicProfile BuildProfile(const StructuredCase& c, LlmClient* llm,
                                const TemplateSet& templates, Rng& rng) {
  if (llm == nullptr) return SampleLocalProfile(c, rng);
  std::string prompt = templates.Get("profile_fill").Render({{"fixed", RenderFixedSlots(c)}});
  std::string last_error;
  for (int attempt = 0; attempt < 2; ++attempt) {
    DemographicProfile profile;
    try {
      profile = ParseProfileReply(Complete(*llm, prompt));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnparseable) throw;
      last_error = e.what();
      continue;
    }
    std::string problem = CheckProfile(profile, c);
    if (problem.empty()) return profile;
    last_error = problem;
  }
  throw Error(ErrorCode::kProfileContradiction, "case " + c.case_id + ": " + last_error);
}

std::string ProfileText(const DemographicProfile& p) {
  return "Name: " + p.name + ". Gender: " + p.gender + ". Age: " + std::to_string(p.age) +
         ". Race: " + p.race + ". Education: " + p.education + ". Location: " + p.location +
         ".";
}

std::string FindingLines(const KnowledgeBase& kb, const std::vector<CaseEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    const Finding& f = kb.finding(e.finding_id);
    out += "- [" + f.id + "] " + f.name + " (" + std::string(PolarityName(e.polarity)) + ")";
    if (f.definition) out += ": " + *f.definition;
    out += "\n";
  }
  return out;
}

std::string FormatChatLines(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    if (m.role == Speaker::kSystem) continue;
    out += m.role == Speaker::kProvider ? "PROVIDER: " : "PATIENT: ";
    out += m.text + "\n";
    if (m.role == Speaker::kPatient) {
      out += "FINDINGS: ";
      if (m.findings.empty()) out += "none";
      for (std::size_t i = 0; i < m.findings.size(); ++i) {
        if (i) out += "; ";
        out += EntryLabel(m.findings[i]);
      }
      out += "\n";
    }
  }
  return out;
}

std::vector<ChatMessage> ParseChatBlock(std::string_view response,
                                        const std::vector<CaseEntry>& allowed) {
  auto lines = SplitLines(response);
  std::size_t open = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (TrimView(lines[i]) == "```chat") {
      open = i;
      break;
    }
  }
  if (open == lines.size()) {
    throw Error(ErrorCode::kUnparseable, "response has no ```chat block");
  }
  std::size_t close = lines.size();
  for (std::size_t i = open + 1; i < lines.size(); ++i) {
    if (TrimView(lines[i]) == "```") {
      close = i;
      break;
    }
  }
  if (close == lines.size()) throw Error(ErrorCode::kUnparseable, "unterminated ```chat block");

  std::vector<ChatMessage> messages;
  bool awaiting_findings = false;
  for (std::size_t i = open + 1; i < close; ++i) {
    std::string_view line = TrimView(lines[i]);
    int line_no = static_cast<int>(i + 1);
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::kUnparseable, "chat line " + std::to_string(line_no) + ": " + why);
    };
    if (StartsWith(line, "FINDINGS:")) {
      if (!awaiting_findings) throw fail("FINDINGS line without a preceding PATIENT line");
      messages.back().findings = ParseAnnotations(line.substr(9), allowed, line_no);
      awaiting_findings = false;
      continue;
    }
    if (awaiting_findings) throw fail("PATIENT line must be followed by a FINDINGS line");
    Speaker role;
    std::string_view text;
    if (StartsWith(line, "PROVIDER:")) {
      role = Speaker::kProvider;
      text = line.substr(9);
    } else if (StartsWith(line, "PATIENT:")) {
      role = Speaker::kPatient;
      text = line.substr(8);
    } else {
      throw fail("expected PROVIDER:, PATIENT: or FINDINGS:");
    }
    Speaker expected = messages.empty() || messages.back().role == Speaker::kPatient
                           ? Speaker::kProvider
                           : Speaker::kPatient;
    if (role != expected) {
      throw fail(std::string("expected a ") + std::string(SpeakerName(expected)) + " message");
    }
    text = TrimView(text);
    if (text.empty()) throw fail("empty message");
    messages.push_back({role, std::string(text), {}});
    awaiting_findings = role == Speaker::kPatient;
  }
  if (awaiting_findings) {
    throw Error(ErrorCode::kUnparseable, "last PATIENT line has no FINDINGS line");
  }
  if (messages.empty()) throw Error(ErrorCode::kUnparseable, "chat block is empty");
  return messages;
}

std::string RenderChatText(const ChatRecord& chat, bool with_annotations) {
  std::string out;
  for (const auto& m : chat.messages) {
    switch (m.role) {
      case Speaker::kSystem: out += "System: "; break;
      case Speaker::kProvider: out += "Provider: "; break;
      case Speaker::kPatient: out += "Patient: "; break;
    }
    out += m.text;
    if (with_annotations && m.role == Speaker::kPatient && !m.findings.empty()) {
      out += " " + std::string(kAnnotationOpen);
      for (std::size_t i = 0; i < m.findings.size(); ++i) {
        out += (i ? ", " : " ") + m.findings[i].finding_id +
               (m.findings[i].polarity == Polarity::kPresent ? "+" : "-");
      }
      out += "]";
    }
    out += "\n";
  }
  return out;
}

ChatRecord GenerateChatSingle(const ChatContext& ctx, const StructuredCase& c,
                              const DemographicProfile& profile) {
  const DiseaseEntry& disease = ctx.kb.disease(c.seed_disease);
  std::vector<CaseEntry> required = ChatFindings(ctx.kb, c);
  std::string prompt = ctx.templates.Get("chat_single").Render({
      {"disease_name", disease.name},
      {"profile", ProfileText(profile)},
      {"findings", FindingLines(ctx.kb, required)},
      {"phrasings", PhrasingLines(ctx, c, required)},
  });
  auto body = ParseChatBlock(Complete(ctx.llm, std::move(prompt)), required);

  ChatRecord chat;
  chat.case_id = c.case_id;
  chat.seed_disease = c.seed_disease;
  chat.profile = profile;
  chat.messages.push_back({Speaker::kSystem, SystemText(profile), {}});
  chat.messages.insert(chat.messages.end(), body.begin(), body.end());
  chat.meta.model = ctx.llm.model_name();
  chat.meta.mode = ChatMode::kSingle;
  RecordPhrasings(ctx, c, body);
  return chat;
}

ChatRecord GenerateChatTurnwise(const ChatContext& ctx, const StructuredCase& c,
                                const DemographicProfile& profile, int turn_cap) {
  const DiseaseEntry& disease = ctx.kb.disease(c.seed_disease);
  std::vector<CaseEntry> required = ChatFindings(ctx.kb, c);
  if (turn_cap <= 0) turn_cap = std::max(1, 2 * static_cast<int>(required.size()));

  ChatRecord chat;
  chat.case_id = c.case_id;
  chat.seed_disease = c.seed_disease;
  chat.profile = profile;
  chat.messages.push_back({Speaker::kSystem, SystemText(profile), {}});
  chat.meta.model = ctx.llm.model_name();
  chat.meta.mode = ChatMode::kTurnwise;

  std::vector<CaseEntry> covered;
  std::vector<CaseEntry> needed = required;
  int turns = 0;
  do {
    std::string conversation = FormatChatLines(chat.messages);
    if (conversation.empty()) conversation = "(empty)\n";
    std::string prompt = ctx.templates.Get("chat_turnwise").Render({
        {"disease_name", disease.name},
        {"profile", ProfileText(profile)},
        {"conversation", conversation},
        {"covered", covered.empty() ? "(none)\n" : FindingLines(ctx.kb, covered)},
        {"needed", FindingLines(ctx.kb, needed)},
        {"phrasings", PhrasingLines(ctx, c, needed)},
    });
    auto turn = ParseChatBlock(Complete(ctx.llm, std::move(prompt)), required);
    if (turn.size() != 2) {
      throw Error(ErrorCode::kUnparseable,
                  "turn reply must hold exactly one provider and one patient message");
    }
    RecordPhrasings(ctx, c, turn);
    for (const auto& f : turn[1].findings) {
      auto it = std::find(needed.begin(), needed.end(), f);
      if (it != needed.end()) {
        needed.erase(it);
        covered.push_back(f);
      }
    }
    chat.messages.insert(chat.messages.end(), turn.begin(), turn.end());
    ++turns;
  } while (!needed.empty() && turns < turn_cap);
  chat.meta.needs_repair = !needed.empty();
  return chat;
}

Coverage CheckCoverage(const ChatRecord& chat, const std::vector<CaseEntry>& required) {
  Coverage cov;
  std::vector<CaseEntry> covered;
  for (std::size_t i = 0; i < chat.messages.size(); ++i) {
    const auto& m = chat.messages[i];
    if (m.role != Speaker::kPatient) continue;
    if (static_cast<int>(m.findings.size()) > kMaxFindingsPerPatientMessage) {
      cov.overloaded.push_back(i);
    }
    covered.insert(covered.end(), m.findings.begin(), m.findings.end());
  }
  for (const auto& r : required) {
    if (std::find(covered.begin(), covered.end(), r) == covered.end()) cov.missing.push_back(r);
  }
  return cov;
}

ChatRecord VerifyAndRepair(const ChatContext& ctx, ChatRecord chat, const StructuredCase& c) {
  std::vector<CaseEntry> required = ChatFindings(ctx.kb, c);
  Coverage cov = CheckCoverage(chat, required);
  if (cov.ok()) {
    chat.meta.needs_repair = false;
    return chat;
  }
  for (int attempt = 1; attempt <= kMaxRepairAttempts; ++attempt) {
    std::string problems;
    if (!cov.missing.empty()) {
      problems += "Findings not reported yet:\n" + FindingLines(ctx.kb, cov.missing);
    }
    for (std::size_t idx : cov.overloaded) {
      problems += "Patient message \"" + chat.messages[idx].text + "\" reports " +
                  std::to_string(chat.messages[idx].findings.size()) +
                  " findings; the limit is " + std::to_string(kMaxFindingsPerPatientMessage) +
                  ".\n";
    }
    std::string prompt = ctx.templates.Get("checker").Render({
        {"profile", ProfileText(chat.profile)},
        {"findings", FindingLines(ctx.kb, required)},
        {"chat", FormatChatLines(chat.messages)},
        {"problems", problems},
    });
    std::string reply = Complete(ctx.llm, std::move(prompt));
    chat.meta.repair_attempts = attempt;
    try {
      auto body = ParseChatBlock(reply, required);
      std::vector<ChatMessage> edited;
      edited.push_back(chat.messages.front());
      edited.insert(edited.end(), body.begin(), body.end());
      chat.messages = std::move(edited);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnparseable && e.code() != ErrorCode::kAnnotation) throw;
      continue;
    }
    cov = CheckCoverage(chat, required);
    if (cov.ok()) {
      chat.meta.needs_repair = false;
      return chat;
    }
  }
  chat.meta.discarded = true;
  return chat;
}

}  // namespace rarescale
