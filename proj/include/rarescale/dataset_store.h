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

#ifndef RARESCALE_DATASET_STORE_H_
#define RARESCALE_DATASET_STORE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "rarescale/case_simulator.h"
#include "rarescale/chat_simulator.h"
#include "rarescale/knowledge_base.h"

namespace rarescale {

// --- record formats ---------------------------------------------------------

nlohmann::json CaseToJson(const SimulatedCase& c);
SimulatedCase CaseFromJson(const nlohmann::json& j);

nlohmann::json ChatToJson(const ChatRecord& chat);
ChatRecord ChatFromJson(const nlohmann::json& j);

struct Provenance {
  std::string generator_model;
  std::uint64_t sim_seed = 0;
  int attempt = 0;
  std::uint64_t chat_seed = 0;

  bool operator==(const Provenance&) const = default;
};

// A structured case with its retained chat.
struct CorpusRecord {
  SimulatedCase sim;
  ChatRecord chat;
  Provenance provenance;

  const std::string& id() const { return sim.structured.case_id; }
  bool operator==(const CorpusRecord&) const = default;
};

nlohmann::json RecordToJson(const CorpusRecord& r);
CorpusRecord RecordFromJson(const nlohmann::json& j);

// One JSON document per line; keys in sorted order. Throws kIo / kParse.
std::vector<nlohmann::json> ReadJsonl(const std::string& path);
void WriteJsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

std::vector<SimulatedCase> ReadCases(const std::string& path);
std::vector<ChatRecord> ReadChats(const std::string& path);
std::vector<CorpusRecord> ReadRecords(const std::string& path);
void WriteRecords(const std::string& path, const std::vector<CorpusRecord>& records);

// Pairs every retained chat with its case. Discarded chats are skipped.
// Throws kIntegrity for a chat whose case is missing.
std::vector<CorpusRecord> JoinCorpus(const std::vector<SimulatedCase>& cases,
                                     const std::vector<ChatRecord>& chats);

// --- splits ---------------------------------------------------------------

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument unless ratios are positive and sum to 1.
  void Validate() const;
};

// Seed disease plus the sorted multiset of (finding, polarity); sampling
// order does not matter.
std::string StructuredCaseKey(const StructuredCase& c);

struct SplitResult {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> val;
  std::vector<CorpusRecord> test;
  // Train records dropped because their structured case also occurs in
  // val or test.
  std::vector<std::string> dropped_ids;
};

// Stratified by seed disease (largest-remainder allocation per stratum, at
// least one train record for strata of three or more), then deduplicated.
// Throws kInvalidArgument on empty input or bad ratios.
SplitResult SplitCorpus(std::vector<CorpusRecord> records, const SplitSpec& spec);

// --- statistics ------------------------------------------------------------

struct SplitStats {
  std::string split;
  std::size_t size = 0;
  double findings_mean = 0;
  double findings_std = 0;  // population standard deviation
  double messages_mean = 0;  // provider + patient messages
  double messages_std = 0;
};

// Throws kTooFew for an empty split.
SplitStats CorpusStats(const std::string& split, const std::vector<CorpusRecord>& records);
std::string FormatStats(const std::vector<SplitStats>& stats);
nlohmann::json StatsToJson(const std::vector<SplitStats>& stats);

// --- candidate-model training pairs ----------------------------------------

struct TrainingPair {
  std::string id;
  std::string input;                // chat text without annotations
  std::vector<std::string> target;  // DDx disease names, expert-system order

  bool operator==(const TrainingPair&) const = default;
};

TrainingPair MakeTrainingPair(const KnowledgeBase& kb, const CorpusRecord& record);

// Every finding-id or annotation-marker occurrence across the inputs, as
// "<pair id>: <hit>" strings. Empty means clean.
std::vector<std::string> AuditTrainingInputs(const KnowledgeBase& kb,
                                             const std::vector<TrainingPair>& pairs);

// Writes pairs.jsonl. Throws kLeak (nothing written) if the audit fails.
std::size_t ExportTrainingPairs(const KnowledgeBase& kb, const std::vector<CorpusRecord>& records,
                                const std::string& path);
std::vector<TrainingPair> ReadTrainingPairs(const std::string& path);

}  // namespace rarescale

#endif  // RARESCALE_DATASET_STORE_H_
