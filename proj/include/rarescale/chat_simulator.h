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

#ifndef RARESCALE_CHAT_SIMULATOR_H_
#define RARESCALE_CHAT_SIMULATOR_H_

#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rarescale/case_simulator.h"
#include "rarescale/knowledge_base.h"
#include "rarescale/llm_gateway.h"
#include "rarescale/rng.h"
#include "rarescale/scorer.h"

namespace rarescale {

inline constexpr int kMaxFindingsPerPatientMessage = 3;
inline constexpr int kMaxRepairAttempts = 3;

struct DemographicProfile {
  std::string name;
  std::string gender;
  int age = 0;
  std::string race;
  std::string education;
  std::string location;

  bool operator==(const DemographicProfile&) const = default;
};

enum class Speaker { kSystem, kProvider, kPatient };
std::string_view SpeakerName(Speaker s);

struct ChatMessage {
  Speaker role = Speaker::kProvider;
  std::string text;
  std::vector<CaseEntry> findings;  // patient messages only

  bool operator==(const ChatMessage&) const = default;
};

enum class ChatMode { kSingle, kTurnwise };
std::string_view ChatModeName(ChatMode mode);

struct ChatMeta {
  std::string model;
  ChatMode mode = ChatMode::kSingle;
  int repair_attempts = 0;
  bool discarded = false;
  // Set when turn-by-turn generation hit its turn cap with findings left.
  bool needs_repair = false;

  bool operator==(const ChatMeta&) const = default;
};

struct ChatRecord {
  std::string case_id;
  std::string seed_disease;
  DemographicProfile profile;
  std::vector<ChatMessage> messages;
  ChatMeta meta;

  bool operator==(const ChatRecord&) const = default;
};

// Per-disease store of earlier patient phrasings for each finding.
// Append-only; safe for concurrent use.
class PhraseBank {
 public:
  PhraseBank() = default;
  PhraseBank(const PhraseBank& other);
  PhraseBank& operator=(const PhraseBank& other);

  std::vector<std::string> Phrases(const std::string& disease,
                                   const std::string& finding) const;
  std::size_t Count(const std::string& disease, const std::string& finding) const;
  void Append(const std::string& disease, const std::string& finding,
              std::string phrase);

  nlohmann::json ToJson() const;
  static PhraseBank FromJson(const nlohmann::json& j);

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> phrases_;
};

// Findings a chat has to report: every non-demographic case finding.
// Demographics travel in the system message.
std::vector<CaseEntry> ChatFindings(const KnowledgeBase& kb,
                                    const StructuredCase& c);

// Returns an empty string when profile agrees with the case demographics.
std::string CheckProfile(const DemographicProfile& profile, const StructuredCase& c);

// Slots fixed by the case are copied; the rest come from llm (profile-fill
// prompt) or, when llm is null, from a deterministic local sampler. An LLM
// profile contradicting the case is retried once, then kProfileContradiction.
DemographicProfile BuildProfile(const StructuredCase& c, LlmClient* llm,
                                const TemplateSet& templates, Rng& rng);

std::string ProfileText(const DemographicProfile& profile);

struct ChatContext {
  const KnowledgeBase& kb;
  const TemplateSet& templates;
  LlmClient& llm;
  PhraseBank& bank;
  int phrasings_per_finding = 3;
};

// One prompt produces the whole conversation. Throws kUnparseable or
// kAnnotation.
ChatRecord GenerateChatSingle(const ChatContext& ctx, const StructuredCase& c,
                              const DemographicProfile& profile);

// One round-trip per provider/patient turn until every finding is covered or
// turn_cap turns ran (0 selects 2 x the number of chat findings).
ChatRecord GenerateChatTurnwise(const ChatContext& ctx, const StructuredCase& c,
                                const DemographicProfile& profile, int turn_cap = 0);

struct Coverage {
  std::vector<CaseEntry> missing;
  std::vector<std::size_t> overloaded;  // message indexes over the limit

  bool ok() const { return missing.empty() && overloaded.empty(); }
};

Coverage CheckCoverage(const ChatRecord& chat, const std::vector<CaseEntry>& required);

// Up to three checker/edit round-trips; marks the chat discarded if it still
// fails afterwards.
ChatRecord VerifyAndRepair(const ChatContext& ctx, ChatRecord chat,
                           const StructuredCase& c);

// --- text formats ---------------------------------------------------------

// "- [id] Name (present): definition" lines.
std::string FindingLines(const KnowledgeBase& kb, const std::vector<CaseEntry>& entries);

// Provider/patient messages in the line-tagged format used inside ```chat
// fences (no fence).
std::string FormatChatLines(const std::vector<ChatMessage>& messages);

// Extracts the first ```chat fenced block and parses it. Annotations must
// name entries of `allowed` with matching polarity. Throws kUnparseable or
// kAnnotation.
std::vector<ChatMessage> ParseChatBlock(std::string_view response,
                                        const std::vector<CaseEntry>& allowed);

inline constexpr std::string_view kAnnotationOpen = "[findings:";

// "System: ...\nProvider: ...\nPatient: ..." lines. With annotations, each
// patient line ends with " [findings: id+, id-]".
std::string RenderChatText(const ChatRecord& chat, bool with_annotations);

}  // namespace rarescale

#endif  // RARESCALE_CHAT_SIMULATOR_H_
