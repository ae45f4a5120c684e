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

#include "rarescale/mock_responders.h"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "rarescale/error.h"
#include "rarescale/evaluation.h"
#include "rarescale/rng.h"

namespace rarescale {
namespace {

using nlohmann::json;

struct PromptFinding {
  std::string id;
  std::string name;
  bool present = true;
};

std::string Flatten(const ChatTurnRequest& request) {
  std::string text;
  for (const auto& m : request.messages) text += m.text + "\n";
  return text;
}

std::string Trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string Lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Lines strictly between a line equal to `open` and the next line equal to
// `close`.
std::vector<std::string> Block(const std::string& text, const std::string& open,
                               const std::string& close) {
  std::vector<std::string> out;
  bool inside = false;
  for (const auto& raw : Lines(text)) {
    std::string line = Trim(raw);
    if (!inside) {
      inside = line == open;
      continue;
    }
    if (line == close) break;
    out.push_back(raw);
  }
  return out;
}

// Value after the first line starting with prefix.
std::string LineValue(const std::string& text, const std::string& prefix) {
  for (const auto& raw : Lines(text)) {
    std::string line = Trim(raw);
    if (line.rfind(prefix, 0) == 0) return Trim(line.substr(prefix.size()));
  }
  return "";
}

// "- [id] Name (present): definition"
std::vector<PromptFinding> ParseFindingLines(const std::vector<std::string>& lines) {
  std::vector<PromptFinding> out;
  for (const auto& raw : lines) {
    std::string line = Trim(raw);
    if (line.rfind("- [", 0) != 0) continue;
    std::size_t close = line.find("] ");
    if (close == std::string::npos) continue;
    PromptFinding f;
    f.id = line.substr(3, close - 3);
    std::string rest = line.substr(close + 2);
    std::size_t pos = rest.find(" (present)");
    std::size_t neg = rest.find(" (absent)");
    if (neg != std::string::npos && (pos == std::string::npos || neg < pos)) {
      pos = neg;
      f.present = false;
    }
    if (pos == std::string::npos) continue;
    f.name = rest.substr(0, pos);
    out.push_back(std::move(f));
  }
  return out;
}

int IntOption(const json& options, const char* key, int fallback) {
  return options.contains(key) ? options.at(key).get<int>() : fallback;
}

bool BoolOption(const json& options, const char* key, bool fallback) {
  return options.contains(key) ? options.at(key).get<bool>() : fallback;
}

std::string Describe(const PromptFinding& f, std::size_t variant) {
  std::string name = Lower(f.name);
  if (f.present) {
    static const char* kPresent[] = {"I have been dealing with ", "lately I get ",
                                     "I keep noticing "};
    return kPresent[variant % 3] + name;
  }
  static const char* kAbsent[] = {"I have not had any ", "no, there has been no ",
                                  "I can't say I've had "};
  return kAbsent[variant % 3] + name;
}

std::string Capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string PatientLine(const std::vector<PromptFinding>& group, std::size_t variant) {
  if (group.empty()) return "I'm not sure, nothing else comes to mind.";
  std::string text;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i) text += i + 1 == group.size() ? ", and " : ", ";
    text += Describe(group[i], variant + i);
  }
  return Capitalize(text) + ".";
}

std::string Annotations(const std::vector<PromptFinding>& group) {
  if (group.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i) out += "; ";
    out += group[i].id + (group[i].present ? " (present)" : " (absent)");
  }
  return out;
}

const char* ProviderLine(std::size_t turn) {
  static const char* kFollowUps[] = {
      "Can you tell me more about how you have been feeling?",
      "Have you noticed anything else that seems different?",
      "How about your general health, anything else going on?",
      "Is there anything else you think I should know?",
  };
  return turn == 0 ? "What brings you in today?" : kFollowUps[(turn - 1) % 4];
}

std::string Conversation(const std::vector<PromptFinding>& findings, std::size_t per_message,
                         std::size_t first_message) {
  std::string out = "```chat\n";
  std::size_t turn = 0;
  std::size_t i = 0;
  while (i < findings.size() || turn == 0) {
    std::size_t take = turn == 0 ? first_message : per_message;
    take = std::min(take, findings.size() - i);
    std::vector<PromptFinding> group(findings.begin() + i, findings.begin() + i + take);
    out += std::string("PROVIDER: ") + ProviderLine(turn) + "\n";
    out += "PATIENT: " + PatientLine(group, turn) + "\n";
    out += "FINDINGS: " + Annotations(group) + "\n";
    i += take;
    ++turn;
  }
  return out + "```\n";
}

std::string ChatSingle(const ChatTurnRequest& request, const json& options) {
  std::string text = Flatten(request);
  auto findings = ParseFindingLines(Block(text, "FINDINGS TO COVER:", "END FINDINGS"));
  int drop = std::max(0, IntOption(options, "drop", 0));
  findings.resize(findings.size() - std::min<std::size_t>(findings.size(), drop));
  auto per = static_cast<std::size_t>(std::max(1, IntOption(options, "per_message", 2)));
  std::size_t first = BoolOption(options, "overload", false) ? 4 : per;
  return Conversation(findings, per, first);
}

std::string ChatTurn(const ChatTurnRequest& request, const json& options) {
  std::string text = Flatten(request);
  auto needed = ParseFindingLines(Block(text, "FINDINGS TO ADD:", "END FINDINGS"));
  int withhold = std::max(0, IntOption(options, "withhold", 0));
  needed.resize(needed.size() - std::min<std::size_t>(needed.size(), withhold));
  auto per = static_cast<std::size_t>(std::max(1, IntOption(options, "per_turn", 2)));
  if (needed.size() > per) needed.resize(per);

  auto conversation = Block(text, "CONVERSATION SO FAR:", "END CONVERSATION");
  std::size_t turn = 0;
  for (const auto& line : conversation) {
    if (Trim(line).rfind("PROVIDER:", 0) == 0) ++turn;
  }
  return "```chat\nPROVIDER: " + std::string(ProviderLine(turn)) + "\nPATIENT: " +
         PatientLine(needed, turn) + "\nFINDINGS: " + Annotations(needed) + "\n```\n";
}

std::string Checker(const ChatTurnRequest& request, const json& options) {
  std::string text = Flatten(request);
  if (!BoolOption(options, "fix", true)) {
    std::string out = "```chat\n";
    for (const auto& line : Block(text, "CURRENT CONVERSATION:", "END CONVERSATION")) {
      out += line + "\n";
    }
    return out + "```\n";
  }
  auto findings = ParseFindingLines(Block(text, "FINDINGS TO COVER:", "END FINDINGS"));
  return Conversation(findings, 2, 2);
}

std::string Ddx(const ChatTurnRequest& request, const json&) {
  static const char* kCommon[] = {
      "Viral upper respiratory infection", "Gastroesophageal reflux disease",
      "Iron deficiency anemia",            "Tension-type headache",
      "Generalized anxiety disorder",
  };
  std::string text = Flatten(request);
  std::string out = "STEP 1:\n";
  for (int i = 0; i < 5; ++i) out += std::to_string(i + 1) + ". " + kCommon[i] + "\n";
  std::vector<std::string> final_list;
  auto section = Block(text, std::string(kCandidateSectionOpen), std::string(kCandidateSectionClose));
  for (const auto& line : ParseNameList(
           [&] {
             std::string joined;
             for (const auto& l : section) joined += l + "\n";
             return joined;
           }(),
           "")) {
    if (line != "(none)") final_list.push_back(line);
  }
  for (int i = 0; final_list.size() < 5; ++i) final_list.push_back(kCommon[i]);
  out += "FINAL DDX:\n";
  for (std::size_t i = 0; i < final_list.size(); ++i) {
    out += std::to_string(i + 1) + ". " + final_list[i] + "\n";
  }
  return out;
}

std::string JudgeBinaryReply(const ChatTurnRequest& request, const json&) {
  std::string text = Flatten(request);
  return NamesMatch(LineValue(text, "PREDICTED DIAGNOSIS:"), LineValue(text, "REFERENCE DIAGNOSIS:"))
             ? "yes"
             : "no";
}

std::string JudgeSimilarityReply(const ChatTurnRequest& request, const json&) {
  std::string text = Flatten(request);
  std::string reference = LineValue(text, "REFERENCE DIAGNOSIS:");
  std::string joined;
  for (const auto& l : Block(text, "DIFFERENTIAL DIAGNOSIS:", "END DIFFERENTIAL")) joined += l + "\n";
  for (const auto& name : ParseNameList(joined, "")) {
    if (NamesMatch(name, reference)) return "exact match";
  }
  return "unrelated";
}

std::string Profile(const ChatTurnRequest& request, const json& options) {
  static const char* kFirst[] = {"Alex", "Maria", "Sam", "Priya", "Jordan", "Wei", "Fatima", "Lucas"};
  static const char* kLast[] = {"Rivera", "Okafor", "Nguyen", "Schmidt", "Haddad", "Kowalski"};
  std::string text = Flatten(request);
  std::uint64_t h = HashString(text);
  std::string gender = LineValue(text, "gender:");
  if (gender.empty()) gender = h % 2 ? "female" : "male";
  if (BoolOption(options, "contradict", false)) gender = gender == "male" ? "female" : "male";
  int age = 40;
  std::string band = LineValue(text, "age: between");
  if (!band.empty()) {
    std::istringstream in(band);
    int lo = 0, hi = 0;
    std::string and_word;
    if (in >> lo >> and_word >> hi) age = (lo + hi) / 2;
  }
  std::ostringstream out;
  out << "name: " << kFirst[h % 8] << ' ' << kLast[(h / 8) % 6] << "\n"
      << "gender: " << gender << "\n"
      << "age: " << age << "\n"
      << "race: " << (h % 3 == 0 ? "Hispanic" : h % 3 == 1 ? "Black" : "Asian") << "\n"
      << "education: " << (h % 2 ? "high school diploma" : "bachelor's degree") << "\n"
      << "location: " << (h % 2 ? "Porto, Portugal" : "Austin, United States") << "\n";
  return out.str();
}

std::string Candidates(const ChatTurnRequest&, const json& options) {
  std::string out = "CANDIDATES:\n";
  if (options.contains("names")) {
    for (const auto& n : options.at("names")) out += n.get<std::string>() + "\n";
  }
  return out;
}

std::string NegativeScreen(const ChatTurnRequest&, const json& options) {
  std::string answer = options.contains("answer") ? options.at("answer").get<std::string>() : "yes";
  return "ANSWER: " + answer +
         "\nEXPLANATION: The reported history neither confirms nor rules out this disease.\n";
}

}  // namespace

std::shared_ptr<const ResponderRegistry> BuiltinResponders() {
  auto registry = std::make_shared<ResponderRegistry>();
  registry->Register("chat", ChatSingle);
  registry->Register("chat-turn", ChatTurn);
  registry->Register("checker", Checker);
  registry->Register("ddx", Ddx);
  registry->Register("judge-binary", JudgeBinaryReply);
  registry->Register("judge-similarity", JudgeSimilarityReply);
  registry->Register("profile", Profile);
  registry->Register("candidates", Candidates);
  registry->Register("negative-screen", NegativeScreen);
  return registry;
}

MockScript DefaultMockScript() {
  static const std::pair<const char*, const char*> kRoutes[] = {
      {"TASK: chat-single", "chat"},
      {"TASK: chat-turn", "chat-turn"},
      {"TASK: chat-check", "checker"},
      {"TASK: ddx", "ddx"},
      {"TASK: judge-binary", "judge-binary"},
      {"TASK: judge-similarity", "judge-similarity"},
      {"TASK: profile-fill", "profile"},
      {"TASK: candidate-gen", "candidates"},
      {"TASK: negative-screen", "negative-screen"},
  };
  MockScript script;
  for (const auto& [task, responder] : kRoutes) {
    MockEntry e;
    e.contains = task;
    e.responder = responder;
    e.repeat = true;
    script.entries.push_back(std::move(e));
  }
  return script;
}

std::unique_ptr<LlmClient> MakeClient(const LlmConfig& config) {
  config.Validate();
  if (config.backend == Backend::kRemote) return std::make_unique<RemoteClient>(config);
  MockScript script =
      config.mock_script.empty() ? DefaultMockScript() : MockScript::Load(config.mock_script);
  return std::make_unique<MockClient>(std::move(script), config.model, BuiltinResponders());
}

}  // namespace rarescale
