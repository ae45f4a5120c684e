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

#include "rarescale/dataset_store.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "rarescale/error.h"
#include "rarescale/rng.h"

namespace rarescale {
namespace {

using nlohmann::json;

json EntriesToJson(const std::vector<CaseEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"id", e.finding_id}, {"polarity", PolarityName(e.polarity)}});
  }
  return arr;
}

std::vector<CaseEntry> EntriesFromJson(const json& arr) {
  std::vector<CaseEntry> out;
  for (const auto& e : arr) {
    std::string pol = e.at("polarity").get<std::string>();
    if (pol != "present" && pol != "absent") {
      throw Error(ErrorCode::kParse, "bad polarity '" + pol + "'");
    }
    out.push_back({e.at("id").get<std::string>(),
                   pol == "present" ? Polarity::kPresent : Polarity::kAbsent});
  }
  return out;
}

json DdxToJson(const RankedDdx& ddx) {
  json arr = json::array();
  for (const auto& e : ddx.entries) arr.push_back({{"disease", e.disease_id}, {"score", e.score}});
  return arr;
}

RankedDdx DdxFromJson(const json& arr) {
  RankedDdx ddx;
  for (const auto& e : arr) {
    ddx.entries.push_back({e.at("disease").get<std::string>(), e.at("score").get<long>()});
  }
  return ddx;
}

json ProfileToJson(const DemographicProfile& p) {
  return {{"name", p.name},   {"gender", p.gender},       {"age", p.age},
          {"race", p.race},   {"education", p.education}, {"location", p.location}};
}

DemographicProfile ProfileFromJson(const json& j) {
  DemographicProfile p;
  j.at("name").get_to(p.name);
  j.at("gender").get_to(p.gender);
  j.at("age").get_to(p.age);
  j.at("race").get_to(p.race);
  j.at("education").get_to(p.education);
  j.at("location").get_to(p.location);
  return p;
}

Speaker SpeakerFromName(const std::string& s) {
  if (s == "system") return Speaker::kSystem;
  if (s == "provider") return Speaker::kProvider;
  if (s == "patient") return Speaker::kPatient;
  throw Error(ErrorCode::kParse, "bad message role '" + s + "'");
}

template <typename F>
auto Guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad ") + what + " record: " + e.what());
  }
}

std::string Fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

void MeanStd(const std::vector<double>& xs, double& mean, double& stdev) {
  double sum = 0;
  for (double x : xs) sum += x;
  mean = sum / static_cast<double>(xs.size());
  double sq = 0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  stdev = std::sqrt(sq / static_cast<double>(xs.size()));
}

}  // namespace

json CaseToJson(const SimulatedCase& c) {
  const StructuredCase& s = c.structured;
  json snapshots = json::array();
  for (const auto& snap : c.trace.snapshots) {
    snapshots.push_back({{"step", snap.step}, {"ddx", DdxToJson(snap.ddx)}});
  }
  return {
      {"case_id", s.case_id},
      {"seed_disease", s.seed_disease},
      {"findings", EntriesToJson(s.findings.entries)},
      {"ddx", DdxToJson(s.ddx)},
      {"demographics", s.demographics},
      {"trace",
       {{"snapshots", snapshots},
        {"skipped", c.trace.skipped},
        {"prioritized", c.trace.prioritized}}},
      {"rng", {{"seed", c.trace.rng_seed}, {"attempt", c.trace.attempt}}},
  };
}

SimulatedCase CaseFromJson(const json& j) {
  return Guard("case", [&] {
    SimulatedCase c;
    StructuredCase& s = c.structured;
    j.at("case_id").get_to(s.case_id);
    j.at("seed_disease").get_to(s.seed_disease);
    s.findings.entries = EntriesFromJson(j.at("findings"));
    s.ddx = DdxFromJson(j.at("ddx"));
    j.at("demographics").get_to(s.demographics);
    const json& trace = j.at("trace");
    for (const auto& snap : trace.at("snapshots")) {
      c.trace.snapshots.push_back({snap.at("step").get<int>(), DdxFromJson(snap.at("ddx"))});
    }
    trace.at("skipped").get_to(c.trace.skipped);
    trace.at("prioritized").get_to(c.trace.prioritized);
    j.at("rng").at("seed").get_to(c.trace.rng_seed);
    j.at("rng").at("attempt").get_to(c.trace.attempt);
    return c;
  });
}

json ChatToJson(const ChatRecord& chat) {
  json messages = json::array();
  for (const auto& m : chat.messages) {
    messages.push_back(
        {{"role", SpeakerName(m.role)}, {"text", m.text}, {"findings", EntriesToJson(m.findings)}});
  }
  return {
      {"case_id", chat.case_id},
      {"seed_disease", chat.seed_disease},
      {"profile", ProfileToJson(chat.profile)},
      {"messages", messages},
      {"mode", ChatModeName(chat.meta.mode)},
      {"model", chat.meta.model},
      {"repair_attempts", chat.meta.repair_attempts},
      {"discarded", chat.meta.discarded},
      {"needs_repair", chat.meta.needs_repair},
  };
}

ChatRecord ChatFromJson(const json& j) {
  return Guard("chat", [&] {
    ChatRecord chat;
    j.at("case_id").get_to(chat.case_id);
    j.at("seed_disease").get_to(chat.seed_disease);
    chat.profile = ProfileFromJson(j.at("profile"));
    for (const auto& m : j.at("messages")) {
      chat.messages.push_back({SpeakerFromName(m.at("role").get<std::string>()),
                               m.at("text").get<std::string>(), EntriesFromJson(m.at("findings"))});
    }
    std::string mode = j.at("mode").get<std::string>();
    if (mode != "single" && mode != "turnwise") throw Error(ErrorCode::kParse, "bad chat mode");
    chat.meta.mode = mode == "single" ? ChatMode::kSingle : ChatMode::kTurnwise;
    j.at("model").get_to(chat.meta.model);
    j.at("repair_attempts").get_to(chat.meta.repair_attempts);
    j.at("discarded").get_to(chat.meta.discarded);
    chat.meta.needs_repair = j.value("needs_repair", false);
    return chat;
  });
}

json RecordToJson(const CorpusRecord& r) {
  return {
      {"id", r.id()},
      {"case", CaseToJson(r.sim)},
      {"chat", ChatToJson(r.chat)},
      {"provenance",
       {{"generator_model", r.provenance.generator_model},
        {"sim_seed", r.provenance.sim_seed},
        {"attempt", r.provenance.attempt},
        {"chat_seed", r.provenance.chat_seed}}},
  };
}

CorpusRecord RecordFromJson(const json& j) {
  return Guard("corpus", [&] {
    CorpusRecord r;
    r.sim = CaseFromJson(j.at("case"));
    r.chat = ChatFromJson(j.at("chat"));
    const json& p = j.at("provenance");
    p.at("generator_model").get_to(r.provenance.generator_model);
    p.at("sim_seed").get_to(r.provenance.sim_seed);
    p.at("attempt").get_to(r.provenance.attempt);
    p.at("chat_seed").get_to(r.provenance.chat_seed);
    return r;
  });
}

std::vector<json> ReadJsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse,
                  path + ":" + std::to_string(line_no) + ": " + std::string(e.what()));
    }
  }
  return rows;
}

void WriteJsonl(const std::string& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::vector<SimulatedCase> ReadCases(const std::string& path) {
  std::vector<SimulatedCase> out;
  for (const auto& row : ReadJsonl(path)) out.push_back(CaseFromJson(row));
  return out;
}

std::vector<ChatRecord> ReadChats(const std::string& path) {
  std::vector<ChatRecord> out;
  for (const auto& row : ReadJsonl(path)) out.push_back(ChatFromJson(row));
  return out;
}

std::vector<CorpusRecord> ReadRecords(const std::string& path) {
  std::vector<CorpusRecord> out;
  for (const auto& row : ReadJsonl(path)) out.push_back(RecordFromJson(row));
  return out;
}

void WriteRecords(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(RecordToJson(r));
  WriteJsonl(path, rows);
}

std::vector<CorpusRecord> JoinCorpus(const std::vector<SimulatedCase>& cases,
                                     const std::vector<ChatRecord>& chats) {
  std::map<std::string, const SimulatedCase*> by_id;
  for (const auto& c : cases) by_id[c.structured.case_id] = &c;
  std::vector<CorpusRecord> out;
  for (const auto& chat : chats) {
    if (chat.meta.discarded) continue;
    auto it = by_id.find(chat.case_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kIntegrity, "chat references unknown case '" + chat.case_id + "'");
    }
    CorpusRecord r;
    r.sim = *it->second;
    r.chat = chat;
    r.provenance.generator_model = chat.meta.model;
    r.provenance.sim_seed = r.sim.trace.rng_seed;
    r.provenance.attempt = r.sim.trace.attempt;
    r.provenance.chat_seed = DeriveSeed(r.sim.trace.rng_seed, "chat:" + chat.case_id, 0);
    out.push_back(std::move(r));
  }
  return out;
}

void SplitSpec::Validate() const {
  if (!(train > 0 && val > 0 && test > 0) || std::fabs(train + val + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "split ratios must be positive and sum to 1");
  }
}

std::string StructuredCaseKey(const StructuredCase& c) {
  std::vector<std::string> items;
  for (const auto& e : c.findings.entries) {
    items.push_back(e.finding_id + (e.polarity == Polarity::kPresent ? "+" : "-"));
  }
  std::sort(items.begin(), items.end());
  std::string key = c.seed_disease + "|";
  for (const auto& item : items) key += item + ",";
  return key;
}

SplitResult SplitCorpus(std::vector<CorpusRecord> records, const SplitSpec& spec) {
  spec.Validate();
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to split");

  std::map<std::string, std::vector<CorpusRecord>> strata;
  for (auto& r : records) strata[r.sim.structured.seed_disease].push_back(std::move(r));

  SplitResult out;
  const std::array<double, 3> ratios = {spec.train, spec.val, spec.test};
  for (auto& [disease, group] : strata) {
    std::stable_sort(group.begin(), group.end(),
                     [](const CorpusRecord& a, const CorpusRecord& b) { return a.id() < b.id(); });
    Rng rng(DeriveSeed(spec.seed, "split:" + disease, 0));
    rng.Shuffle(group);

    // Largest-remainder allocation; ties go to train, then val, then test.
    const std::size_t n = group.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      double exact = ratios[k] * static_cast<double>(n);
      counts[k] = static_cast<std::size_t>(std::floor(exact));
      remainders[k] = exact - std::floor(exact);
      assigned += counts[k];
    }
    while (assigned < n) {
      int best = 0;
      for (int k = 1; k < 3; ++k) {
        if (remainders[k] > remainders[best]) best = k;
      }
      ++counts[best];
      remainders[best] = -1;
      ++assigned;
    }
    if (n >= 3 && counts[0] == 0) {
      int donor = counts[1] >= counts[2] ? 1 : 2;
      --counts[donor];
      ++counts[0];
    }
    std::size_t i = 0;
    for (; i < counts[0]; ++i) out.train.push_back(std::move(group[i]));
    for (; i < counts[0] + counts[1]; ++i) out.val.push_back(std::move(group[i]));
    for (; i < n; ++i) out.test.push_back(std::move(group[i]));
  }

  std::set<std::string> held_out;
  for (const auto& r : out.val) held_out.insert(StructuredCaseKey(r.sim.structured));
  for (const auto& r : out.test) held_out.insert(StructuredCaseKey(r.sim.structured));
  std::vector<CorpusRecord> kept;
  for (auto& r : out.train) {
    if (held_out.count(StructuredCaseKey(r.sim.structured))) {
      out.dropped_ids.push_back(r.id());
    } else {
      kept.push_back(std::move(r));
    }
  }
  out.train = std::move(kept);
  return out;
}

SplitStats CorpusStats(const std::string& split, const std::vector<CorpusRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kTooFew, "split '" + split + "' is empty");
  std::vector<double> findings, messages;
  for (const auto& r : records) {
    findings.push_back(static_cast<double>(r.sim.structured.findings.entries.size()));
    messages.push_back(static_cast<double>(std::count_if(
        r.chat.messages.begin(), r.chat.messages.end(),
        [](const ChatMessage& m) { return m.role != Speaker::kSystem; })));
  }
  SplitStats s;
  s.split = split;
  s.size = records.size();
  MeanStd(findings, s.findings_mean, s.findings_std);
  MeanStd(messages, s.messages_mean, s.messages_std);
  return s;
}

std::string FormatStats(const std::vector<SplitStats>& stats) {
  std::ostringstream out;
  out << "split\tsize\tfindings\tmessages\n";
  for (const auto& s : stats) {
    out << s.split << '\t' << s.size << '\t' << Fixed2(s.findings_mean) << " +- "
        << Fixed2(s.findings_std) << '\t' << Fixed2(s.messages_mean) << " +- "
        << Fixed2(s.messages_std) << '\n';
  }
  return out.str();
}

json StatsToJson(const std::vector<SplitStats>& stats) {
  json arr = json::array();
  for (const auto& s : stats) {
    arr.push_back({{"split", s.split},
                   {"size", s.size},
                   {"findings_mean", s.findings_mean},
                   {"findings_std", s.findings_std},
                   {"messages_mean", s.messages_mean},
                   {"messages_std", s.messages_std}});
  }
  return arr;
}

TrainingPair MakeTrainingPair(const KnowledgeBase& kb, const CorpusRecord& record) {
  TrainingPair pair;
  pair.id = record.id();
  pair.input = RenderChatText(record.chat, /*with_annotations=*/false);
  for (const auto& e : record.sim.structured.ddx.entries) {
    pair.target.push_back(kb.disease(e.disease_id).name);
  }
  return pair;
}

std::vector<std::string> AuditTrainingInputs(const KnowledgeBase& kb,
                                             const std::vector<TrainingPair>& pairs) {
  std::string alternation;
  for (const auto& f : kb.findings()) {
    if (!alternation.empty()) alternation += '|';
    alternation += std::regex_replace(f.id, std::regex(R"([.^$|()\[\]{}*+?\\])"), R"(\$&)");
  }
  std::regex id_pattern("(^|[^A-Za-z0-9_])(" + alternation + ")(?![A-Za-z0-9_])");
  std::regex marker_pattern(R"(\[findings:|FINDINGS:)");
  std::vector<std::string> hits;
  for (const auto& p : pairs) {
    std::smatch m;
    auto begin = p.input.cbegin();
    while (!alternation.empty() && std::regex_search(begin, p.input.cend(), m, id_pattern)) {
      hits.push_back(p.id + ": finding id '" + m[2].str() + "'");
      begin = m[0].second;
    }
    if (std::regex_search(p.input, m, marker_pattern)) {
      hits.push_back(p.id + ": annotation marker '" + m[0].str() + "'");
    }
  }
  return hits;
}

std::size_t ExportTrainingPairs(const KnowledgeBase& kb, const std::vector<CorpusRecord>& records,
                                const std::string& path) {
  std::vector<TrainingPair> pairs;
  for (const auto& r : records) {
    if (r.chat.meta.discarded) {
      throw Error(ErrorCode::kInvalidArgument, "record '" + r.id() + "' has a discarded chat");
    }
    pairs.push_back(MakeTrainingPair(kb, r));
  }
  auto hits = AuditTrainingInputs(kb, pairs);
  if (!hits.empty()) {
    throw Error(ErrorCode::kLeak, std::to_string(hits.size()) + " label leaks, first: " + hits[0]);
  }
  std::vector<json> rows;
  for (const auto& p : pairs) rows.push_back({{"id", p.id}, {"input", p.input}, {"target", p.target}});
  WriteJsonl(path, rows);
  return pairs.size();
}

std::vector<TrainingPair> ReadTrainingPairs(const std::string& path) {
  std::vector<TrainingPair> out;
  for (const auto& row : ReadJsonl(path)) {
    out.push_back(Guard("training pair", [&] {
      TrainingPair p;
      row.at("id").get_to(p.id);
      row.at("input").get_to(p.input);
      row.at("target").get_to(p.target);
      return p;
    }));
  }
  return out;
}

}  // namespace rarescale
