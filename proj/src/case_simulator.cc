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

#include "rarescale/case_simulator.h"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "rarescale/error.h"

namespace rarescale {
namespace {

struct Candidate {
  const Finding* finding;
  Link link;
};

// Descending frequency, then import desc, then id asc.
bool FrequencyOrder(const Candidate& a, const Candidate& b) {
  if (a.link.frequency != b.link.frequency) return a.link.frequency > b.link.frequency;
  if (a.finding->import_score != b.finding->import_score) {
    return a.finding->import_score > b.finding->import_score;
  }
  return a.finding->id < b.finding->id;
}

class AttemptState {
 public:
  AttemptState(const KnowledgeBase& kb, const ScoreWeights& weights,
               const DiseaseEntry& seed, const SimConfig& config)
      : kb_(kb), weights_(weights), seed_(seed), config_(config) {}

  void Run(Rng& rng, SimTrace& trace, StructuredCase& out) {
    SampleDemographics(rng, out);

    std::vector<Candidate> predisposing, symptoms;
    for (const auto& [fid, link] : seed_.links) {
      const Finding& f = kb_.finding(fid);
      if (f.kind == FindingKind::kPredisposing) predisposing.push_back({&f, link});
      if (f.kind == FindingKind::kSymptom) symptoms.push_back({&f, link});
    }
    std::sort(predisposing.begin(), predisposing.end(), FrequencyOrder);
    std::sort(symptoms.begin(), symptoms.end(), FrequencyOrder);
    std::vector<Candidate> order = std::move(predisposing);
    order.insert(order.end(), symptoms.begin(), symptoms.end());

    std::size_t next = 0;
    while (Size() < config_.max_findings) {
      Candidate candidate{};
      bool prioritized = false;
      if (!priority_.empty()) {
        candidate = priority_.front();
        priority_.pop_front();
        prioritized = true;
      } else if (next < order.size()) {
        candidate = order[next++];
      } else {
        break;
      }
      if (considered_.count(candidate.finding->id)) continue;
      considered_.insert(candidate.finding->id);

      const Finding& f = *candidate.finding;
      if (f.exclusion_group && present_groups_.count(*f.exclusion_group)) {
        trace.skipped.push_back(f.id);
        continue;
      }
      double p = config_.present_prob[candidate.link.frequency - 1];
      if (prioritized) p *= config_.overlap_present_scale;
      bool present = rng.Uniform01() < p;
      Add(f, present ? Polarity::kPresent : Polarity::kAbsent);
      MaybeCheckpoint(trace);
    }

    out.findings = findings_;
    out.ddx = RankDdx(kb_, weights_, findings_);
    trace.snapshots.push_back({Size(), out.ddx});
  }

 private:
  int Size() const { return static_cast<int>(findings_.entries.size()); }

  void Add(const Finding& f, Polarity polarity) {
    findings_.entries.push_back({f.id, polarity});
    considered_.insert(f.id);
    if (polarity == Polarity::kPresent && f.exclusion_group) {
      present_groups_.insert(*f.exclusion_group);
    }
  }

  // Exactly one PRESENT finding per demographic group linked to the seed,
  // drawn with weight present_prob[frequency].
  void SampleDemographics(Rng& rng, StructuredCase& out) {
    std::map<std::string, std::vector<Candidate>> groups;
    for (const auto& [fid, link] : seed_.links) {
      const Finding& f = kb_.finding(fid);
      if (f.kind == FindingKind::kDemographic) {
        groups[*f.exclusion_group].push_back({&f, link});
      }
    }
    for (auto& [group, members] : groups) {
      double total = 0;
      for (const auto& m : members) total += config_.present_prob[m.link.frequency - 1];
      const Candidate* chosen = &members.back();
      if (total > 0) {
        double u = rng.Uniform01() * total;
        for (const auto& m : members) {
          u -= config_.present_prob[m.link.frequency - 1];
          if (u < 0) {
            chosen = &m;
            break;
          }
        }
      } else {
        chosen = &members[rng.Below(members.size())];
      }
      Add(*chosen->finding, Polarity::kPresent);
      out.demographics[group] = chosen->finding->value.value_or(chosen->finding->name);
      for (const auto& m : members) considered_.insert(m.finding->id);
    }
  }

  void MaybeCheckpoint(SimTrace& trace) {
    if (checkpoint_done_ || Size() < config_.ddx_checkpoint_after) return;
    checkpoint_done_ = true;
    RankedDdx ddx = RankDdx(kb_, weights_, findings_);
    trace.snapshots.push_back({Size(), ddx});

    std::vector<Candidate> overlap;
    std::set<std::string_view> queued;
    for (const auto& member : ddx.entries) {
      if (member.disease_id == seed_.id) continue;
      const DiseaseEntry& other = kb_.disease(member.disease_id);
      for (const auto& [fid, link] : seed_.links) {
        if (considered_.count(fid) || queued.count(fid)) continue;
        const Finding& f = kb_.finding(fid);
        if (f.kind == FindingKind::kDemographic) continue;
        if (other.FindLink(fid) == nullptr) continue;
        queued.insert(fid);
        overlap.push_back({&f, link});
      }
    }
    std::sort(overlap.begin(), overlap.end(), FrequencyOrder);
    for (const auto& c : overlap) {
      priority_.push_back(c);
      trace.prioritized.push_back(c.finding->id);
    }
  }

  const KnowledgeBase& kb_;
  const ScoreWeights& weights_;
  const DiseaseEntry& seed_;
  const SimConfig& config_;

  CaseFindings findings_;
  std::set<std::string, std::less<>> considered_;
  std::set<std::string> present_groups_;
  std::deque<Candidate> priority_;
  bool checkpoint_done_ = false;
};

}  // namespace

void SimConfig::Validate() const {
  for (double p : present_prob) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "present_prob values must lie in [0, 1]");
    }
  }
  if (max_attempts < 1 || min_valid < 0 || min_valid > max_attempts) {
    throw Error(ErrorCode::kInvalidArgument,
                "need max_attempts >= 1 and 0 <= min_valid <= max_attempts");
  }
  if (ddx_checkpoint_after < 1) {
    throw Error(ErrorCode::kInvalidArgument, "ddx_checkpoint_after must be >= 1");
  }
  if (max_findings < 1 || min_findings < 0 || min_findings > max_findings) {
    throw Error(ErrorCode::kInvalidArgument,
                "need max_findings >= 1 and 0 <= min_findings <= max_findings");
  }
  if (!(overlap_present_scale >= 0.0 && overlap_present_scale <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "overlap_present_scale must lie in [0, 1]");
  }
}

std::string_view InvalidReasonName(InvalidReason reason) {
  switch (reason) {
    case InvalidReason::kTooFewFindings: return "too-few-findings";
    case InvalidReason::kEmptyDdx: return "empty-ddx";
    case InvalidReason::kSeedNotTop: return "seed-not-top";
    case InvalidReason::kSeedTied: return "seed-tied";
  }
  return "unknown";
}

std::uint64_t AttemptSeed(const SimConfig& config, std::string_view seed_disease,
                          int attempt) {
  return DeriveSeed(config.rng_seed, seed_disease, static_cast<std::uint64_t>(attempt));
}

SampleOutcome SampleCase(const KnowledgeBase& kb, const ScoreWeights& weights,
                         std::string_view seed_disease, const SimConfig& config,
                         Rng& rng, int attempt) {
  const DiseaseEntry& seed = kb.disease(seed_disease);
  SimTrace trace;
  trace.rng_seed = config.rng_seed;
  trace.attempt = attempt;

  StructuredCase structured;
  structured.seed_disease = seed.id;
  structured.case_id = seed.id + "#" + std::to_string(attempt);
  AttemptState(kb, weights, seed, config).Run(rng, trace, structured);

  const auto& ranked = structured.ddx.entries;
  std::optional<InvalidReason> reason;
  if (static_cast<int>(structured.findings.entries.size()) < config.min_findings) {
    reason = InvalidReason::kTooFewFindings;
  } else if (ranked.empty()) {
    reason = InvalidReason::kEmptyDdx;
  } else if (ranked[0].disease_id != seed.id) {
    bool tied = std::any_of(ranked.begin(), ranked.end(), [&](const ScoredDisease& e) {
      return e.disease_id == seed.id && e.score == ranked[0].score;
    });
    reason = tied ? InvalidReason::kSeedTied : InvalidReason::kSeedNotTop;
  } else if (ranked.size() > 1 && ranked[1].score == ranked[0].score) {
    reason = InvalidReason::kSeedTied;
  }
  if (reason) return InvalidAttempt{*reason, std::move(trace)};
  return SimulatedCase{std::move(structured), std::move(trace)};
}

DiseaseSimulation SimulateDisease(const KnowledgeBase& kb, const ScoreWeights& weights,
                                  std::string_view seed_disease,
                                  const SimConfig& config) {
  config.Validate();
  kb.disease(seed_disease);
  CaseSet set;
  set.disease_id = std::string(seed_disease);
  set.attempts = config.max_attempts;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(AttemptSeed(config, seed_disease, attempt));
    auto outcome = SampleCase(kb, weights, seed_disease, config, rng, attempt);
    if (auto* ok = std::get_if<SimulatedCase>(&outcome)) {
      set.cases.push_back(std::move(*ok));
    }
  }
  int valid = static_cast<int>(set.cases.size());
  if (valid < config.min_valid) {
    return Excluded{set.disease_id, config.max_attempts, valid};
  }
  return set;
}

std::vector<DiseaseSimulation> SimulateAll(const KnowledgeBase& kb,
                                           const ScoreWeights& weights,
                                           const SimConfig& config, int workers) {
  config.Validate();
  const auto& diseases = kb.diseases();
  std::vector<DiseaseSimulation> results(diseases.size());
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = cursor++; i < diseases.size(); i = cursor++) {
      try {
        results[i] = SimulateDisease(kb, weights, diseases[i].id, config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  int n = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<std::string> DiscardedDiagnoses(const SimTrace& trace) {
  if (trace.snapshots.size() < 2) {
    throw Error(ErrorCode::kTooFew, "discarded_diagnoses needs at least two snapshots");
  }
  const RankedDdx& final_ddx = trace.snapshots.back().ddx;
  std::vector<std::string> out;
  for (std::size_t s = 0; s + 1 < trace.snapshots.size(); ++s) {
    for (const auto& e : trace.snapshots[s].ddx.entries) {
      if (final_ddx.Contains(e.disease_id)) continue;
      if (std::find(out.begin(), out.end(), e.disease_id) != out.end()) continue;
      out.push_back(e.disease_id);
    }
  }
  return out;
}

}  // namespace rarescale
