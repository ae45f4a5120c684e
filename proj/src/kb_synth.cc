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

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <set>
#include <string>

#include "rarescale/error.h"
#include "rarescale/knowledge_base.h"
#include "rarescale/rng.h"

namespace rarescale {
namespace {

constexpr std::array<std::string_view, 36> kSymptomNouns = {
    "headache",        "fever",           "cough",         "fatigue",
    "joint pain",      "rash",            "nausea",        "vomiting",
    "diarrhea",        "abdominal pain",  "chest pain",    "dyspnea",
    "palpitations",    "dizziness",       "blurred vision", "hearing loss",
    "muscle weakness", "numbness",        "tremor",        "seizures",
    "night sweats",    "weight loss",     "jaundice",      "back pain",
    "swollen glands",  "hair loss",       "dry mouth",     "hoarseness",
    "leg swelling",    "itching",         "bruising",      "confusion",
    "neck stiffness",  "eye pain",        "urinary urgency", "chills"};

constexpr std::array<std::string_view, 12> kQualifiers = {
    "intermittent", "severe",    "chronic",   "sudden",
    "mild",         "recurrent", "nocturnal", "progressive",
    "episodic",     "persistent", "localized", "diffuse"};

constexpr std::array<std::string_view, 14> kExposures = {
    "smoking",          "organ transplant", "recent travel",  "animal contact",
    "immunosuppression", "alcohol use",     "family history", "chemotherapy",
    "recent surgery",   "farm work",        "tick bite",      "contaminated water",
    "long-haul flight", "pregnancy"};

constexpr std::array<std::string_view, 16> kSyllables = {
    "mor", "van", "tel", "zor", "ki", "lan", "dre", "sol",
    "bar", "the", "nix", "ca",  "ru", "pel", "os",  "ga"};

constexpr std::array<std::string_view, 8> kDiseaseSuffixes = {
    "syndrome", "disease", "fever",   "dystrophy",
    "myopathy", "anemia",  "ataxia", "encephalitis"};

constexpr std::array<std::string_view, 10> kCategories = {
    "Neurological disorders",    "Cardiovascular disorders",
    "Infectious diseases",       "Metabolic disorders",
    "Autoimmune disorders",      "Respiratory disorders",
    "Gastrointestinal disorders", "Hematologic disorders",
    "Musculoskeletal disorders", "Dermatologic disorders"};

struct AgeBand {
  const char* id;
  const char* value;
  const char* name;
};

constexpr std::array<AgeBand, 4> kAgeBands = {{
    {"d_age_00_17", "0-17", "Age 0 to 17 years"},
    {"d_age_18_25", "18-25", "Age 18 to 25 years"},
    {"d_age_26_55", "26-55", "Age 26 to 55 years"},
    {"d_age_56_plus", "56+", "Age 56 years or older"},
}};

std::string Capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string FormatId(const char* prefix, int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, index);
  return buf;
}

std::string InventName(Rng& rng) {
  std::string stem;
  int parts = static_cast<int>(rng.Between(2, 3));
  for (int i = 0; i < parts; ++i) stem += kSyllables[rng.Below(kSyllables.size())];
  return Capitalize(stem) + " " +
         std::string(kDiseaseSuffixes[rng.Below(kDiseaseSuffixes.size())]);
}

std::string Unique(std::string name, std::set<std::string>& used) {
  if (used.insert(name).second) return name;
  for (int n = 2;; ++n) {
    std::string candidate = name + " type " + std::to_string(n);
    if (used.insert(candidate).second) return candidate;
  }
}

}  // namespace

KnowledgeBase SynthKb(const SynthParams& p) {
  if (p.n_diseases < 1 || p.links_min < 1 || p.links_min > p.links_max ||
      p.n_findings < p.links_max) {
    throw Error(ErrorCode::kInfeasible,
                "synth_kb: need n_diseases >= 1, 1 <= links_min <= links_max <= "
                "n_findings (got n_diseases=" + std::to_string(p.n_diseases) +
                    ", n_findings=" + std::to_string(p.n_findings) + ", links=" +
                    std::to_string(p.links_min) + ".." + std::to_string(p.links_max) + ")");
  }
  Rng rng(DeriveSeed(p.seed, "synth-kb", 0));

  std::vector<Finding> findings;
  findings.push_back({"d_sex_female", "Female sex", std::nullopt, 1,
                      FindingKind::kDemographic, "sex", "female"});
  findings.push_back({"d_sex_male", "Male sex", std::nullopt, 1,
                      FindingKind::kDemographic, "sex", "male"});
  for (const auto& band : kAgeBands) {
    findings.push_back({band.id, band.name, std::nullopt, 1,
                        FindingKind::kDemographic, "age", band.value});
  }

  std::set<std::string> used_names;
  std::vector<std::size_t> symptom_slots;  // indexes into findings
  std::vector<std::size_t> pool;
  for (int i = 0; i < p.n_findings; ++i) {
    Finding f;
    f.id = FormatId("f", i, 4);
    // The first finding is always a symptom so every disease can link one.
    bool predisposing = i > 0 && rng.Bernoulli(0.15);
    if (predisposing) {
      f.kind = FindingKind::kPredisposing;
      f.name = Unique("History of " +
                          std::string(kExposures[rng.Below(kExposures.size())]),
                      used_names);
    } else {
      f.kind = FindingKind::kSymptom;
      f.name = Unique(
          Capitalize(std::string(kQualifiers[rng.Below(kQualifiers.size())]) + " " +
                     std::string(kSymptomNouns[rng.Below(kSymptomNouns.size())])),
          used_names);
    }
    f.import_score = static_cast<int>(rng.Between(1, 5));
    if (rng.Bernoulli(0.5)) {
      std::string lower = f.name;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      f.definition = "Patient-reported " + lower + ", described in plain language.";
    }
    if (f.kind == FindingKind::kSymptom) symptom_slots.push_back(findings.size());
    pool.push_back(findings.size());
    findings.push_back(std::move(f));
  }
  // Pair up a few symptoms into mutually exclusive groups.
  for (std::size_t k = 0; k + 1 < symptom_slots.size(); k += 20) {
    std::string group = FormatId("x", static_cast<int>(k / 20), 3);
    findings[symptom_slots[k]].exclusion_group = group;
    findings[symptom_slots[k + 1]].exclusion_group = group;
  }

  std::vector<DiseaseEntry> diseases;
  std::set<std::string> used_disease_names;
  for (int i = 0; i < p.n_diseases; ++i) {
    DiseaseEntry d;
    d.id = FormatId("d", i, 3);
    d.name = Unique(InventName(rng), used_disease_names);
    if (rng.Bernoulli(1.0 / 6.0)) {
      std::string alias = InventName(rng);
      std::replace(alias.begin(), alias.end(), ' ', '_');
      std::transform(alias.begin(), alias.end(), alias.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      d.name += " alias " + alias;
    }
    std::size_t first = rng.Below(kCategories.size());
    d.categories.emplace_back(kCategories[first]);
    if (rng.Bernoulli(0.3)) {
      std::size_t second = (first + 1 + rng.Below(kCategories.size() - 1)) % kCategories.size();
      d.categories.emplace_back(kCategories[second]);
    }

    int n_links = static_cast<int>(rng.Between(p.links_min, p.links_max));
    std::vector<std::size_t> chosen = pool;
    // Partial Fisher-Yates: the first n_links entries are a uniform sample.
    for (int k = 0; k < n_links; ++k) {
      std::size_t j = k + rng.Below(chosen.size() - k);
      std::swap(chosen[k], chosen[j]);
    }
    chosen.resize(n_links);
    bool has_symptom = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t idx) {
      return findings[idx].kind == FindingKind::kSymptom;
    });
    if (!has_symptom) {
      std::size_t replacement;
      do {
        replacement = symptom_slots[rng.Below(symptom_slots.size())];
      } while (std::find(chosen.begin(), chosen.end(), replacement) != chosen.end());
      chosen[0] = replacement;
    }
    for (std::size_t idx : chosen) {
      d.links[findings[idx].id] = Link{static_cast<int>(rng.Between(1, 5)),
                                       static_cast<int>(rng.Between(1, 5))};
    }

    d.links["d_sex_female"] = Link{1, static_cast<int>(rng.Between(2, 5))};
    d.links["d_sex_male"] = Link{1, static_cast<int>(rng.Between(2, 5))};
    std::size_t band_start = rng.Below(kAgeBands.size());
    std::size_t band_count = 1 + rng.Below(kAgeBands.size() - band_start);
    for (std::size_t b = band_start; b < band_start + band_count; ++b) {
      d.links[kAgeBands[b].id] = Link{static_cast<int>(rng.Between(1, 2)),
                                      static_cast<int>(rng.Between(1, 5))};
    }
    diseases.push_back(std::move(d));
  }
  return KnowledgeBase(std::move(findings), std::move(diseases));
}

}  // namespace rarescale
