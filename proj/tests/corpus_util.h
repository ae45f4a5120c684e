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

#ifndef RARESCALE_TESTS_CORPUS_UTIL_H_
#define RARESCALE_TESTS_CORPUS_UTIL_H_

#include <random>
#include <string>
#include <vector>

#include "rarescale/dataset_store.h"

namespace rarescale::testing {

// A corpus record with one patient message per finding.
inline CorpusRecord MakeRecord(const std::string& id, const std::string& disease,
                               const std::vector<CaseEntry>& findings,
                               const std::vector<std::string>& ddx = {}) {
  CorpusRecord r;
  r.sim.structured.case_id = id;
  r.sim.structured.seed_disease = disease;
  r.sim.structured.findings.entries = findings;
  for (std::size_t i = 0; i < ddx.size(); ++i) {
    r.sim.structured.ddx.entries.push_back({ddx[i], static_cast<long>(100 - i)});
  }
  r.chat.case_id = id;
  r.chat.seed_disease = disease;
  r.chat.profile = {"Pat Doe", "female", 33, "Asian", "Some college", "Cork, Ireland"};
  r.chat.messages.push_back({Speaker::kSystem, "Patient profile.", {}});
  for (const auto& f : findings) {
    r.chat.messages.push_back({Speaker::kProvider, "Anything else?", {}});
    r.chat.messages.push_back(
        {Speaker::kPatient, f.polarity == Polarity::kPresent ? "Yes, that happens." : "No.", {f}});
  }
  r.chat.meta.model = "mock";
  r.provenance = {"mock", 1, 0, 2};
  return r;
}

inline std::vector<CaseEntry> RandomEntries(std::mt19937_64& gen, int n_findings, int pool) {
  std::vector<int> ids(pool);
  for (int i = 0; i < pool; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), gen);
  std::vector<CaseEntry> out;
  for (int i = 0; i < n_findings; ++i) {
    out.push_back({"f" + std::to_string(ids[i]), gen() % 2 ? Polarity::kPresent : Polarity::kAbsent});
  }
  return out;
}

}  // namespace rarescale::testing

#endif  // RARESCALE_TESTS_CORPUS_UTIL_H_
