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

#ifndef RARESCALE_CLI_H_
#define RARESCALE_CLI_H_

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rarescale/case_simulator.h"
#include "rarescale/chat_simulator.h"
#include "rarescale/dataset_store.h"
#include "rarescale/knowledge_base.h"
#include "rarescale/llm_gateway.h"
#include "rarescale/scorer.h"

namespace rarescale {

struct ChatStageConfig {
  ChatMode mode = ChatMode::kSingle;
  int turn_cap = 0;  // 0 = 2 x chat findings
  int phrasings_per_finding = 3;
  int max_cases_per_disease = 0;  // 0 = every valid case
  bool llm_profile = false;       // profile-fill prompt instead of the local sampler
};

struct EvalStageConfig {
  // "test", "val", "train" or "corpus" (every retained chat).
  std::string records = "test";
  std::string matcher = "exact";  // "exact" or "judge"
  bool similarity = true;
  std::string candidate_backend = "reference";  // eval-candidates
  std::string ddx_candidates = "none";          // eval-ddx: none|reference|external
};

// Stage names for per-stage LLM settings: chat, checker, profile, ddx,
// judge, candidates, negatives. Each stage inherits from "default".
struct PipelineConfig {
  std::string kb_path;
  std::string out_dir;
  std::string prompts_dir;  // optional template overrides
  std::uint64_t seed = 7;
  int workers = 4;
  ScoreWeights weights;
  SimConfig sim;
  SynthParams synth;
  std::map<std::string, LlmConfig> llm;
  SplitSpec split;
  ChatStageConfig chat;
  EvalStageConfig eval;

  LlmConfig StageLlm(const std::string& stage) const;
};

// Relative paths inside j resolve against base_dir. Throws kConfig.
PipelineConfig PipelineConfigFromJson(const nlohmann::json& j, const std::string& base_dir);
PipelineConfig LoadPipelineConfig(const std::string& path);

// args excludes the program name. Returns the process exit code; failures
// print one "error: <code>: <message>" line to err.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rarescale

#endif  // RARESCALE_CLI_H_
