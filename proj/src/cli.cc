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

#include "rarescale/cli.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "rarescale/error.h"
#include "rarescale/evaluation.h"
#include "rarescale/rng.h"
#include "rarescale/wilcoxon.h"

namespace rarescale {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kStages = {"chat",  "checker",    "profile",  "ddx",
                                       "judge", "candidates", "negatives"};

std::string Resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

template <typename T>
void Get(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

ChatMode ParseChatMode(const std::string& s) {
  if (s == "single") return ChatMode::kSingle;
  if (s == "turnwise") return ChatMode::kTurnwise;
  throw Error(ErrorCode::kConfig, "unknown chat mode '" + s + "' (single|turnwise)");
}

// Runs fn(0..n-1) on up to `workers` threads; rethrows the first failure.
void ParallelFor(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), 1,
                                                std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string OneLine(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string TsvField(std::string s) {
  for (char& c : s) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

struct Run {
  PipelineConfig config;
  std::ostream& out;

  std::string OutPath(const std::string& name) const {
    if (config.out_dir.empty()) {
      throw Error(ErrorCode::kUsage, "an output directory is required (--out)");
    }
    return (fs::path(config.out_dir) / name).string();
  }

  void EnsureOut() const {
    std::error_code ec;
    fs::create_directories(OutPath("."), ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + config.out_dir + "'");
  }

  std::string KbPath() const {
    if (!config.kb_path.empty()) return config.kb_path;
    if (!config.out_dir.empty() && fs::exists(OutPath("kb.txt"))) return OutPath("kb.txt");
    throw Error(ErrorCode::kUsage, "no knowledge base given (--kb)");
  }

  KnowledgeBase Kb() const { return LoadKb(KbPath()); }

  TemplateSet Templates() const {
    return config.prompts_dir.empty() ? TemplateSet::Defaults()
                                      : TemplateSet::FromDirectory(config.prompts_dir);
  }

  std::vector<CorpusRecord> EvalRecords() const {
    const std::string& which = config.eval.records;
    if (which == "corpus") {
      return JoinCorpus(ReadCases(OutPath("cases.jsonl")), ReadChats(OutPath("chats.jsonl")));
    }
    if (which == "train" || which == "val" || which == "test") {
      return ReadRecords(OutPath(which + ".jsonl"));
    }
    throw Error(ErrorCode::kConfig, "eval.records must be test|val|train|corpus");
  }
};

int KbValidate(Run& run) {
  std::string path = run.KbPath();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  KnowledgeBase kb = ParseKb(buf.str());
  ValidationReport report = ValidateKb(kb);
  for (const auto& v : report) {
    run.out << v.rule << '\t' << v.entity << '\t' << v.detail << '\n';
  }
  run.out << report.size() << " violations\n";
  if (!report.empty()) {
    throw Error(ErrorCode::kIntegrity, std::to_string(report.size()) + " violations in '" +
                                           path + "'");
  }
  return 0;
}

int KbSynth(Run& run) {
  run.EnsureOut();
  SynthParams params = run.config.synth;
  params.seed = run.config.seed;
  KnowledgeBase kb = SynthKb(params);
  SaveKb(kb, run.OutPath("kb.txt"));
  run.out << "wrote " << kb.diseases().size() << " diseases, " << kb.findings().size()
          << " findings to " << run.OutPath("kb.txt") << '\n';
  return 0;
}

int Simulate(Run& run) {
  KnowledgeBase kb = run.Kb();
  run.EnsureOut();
  SimConfig sim = run.config.sim;
  sim.rng_seed = run.config.seed;
  auto results = SimulateAll(kb, run.config.weights, sim, run.config.workers);

  std::vector<json> rows;
  std::string report = "disease\tname\tstatus\tvalid\n";
  int included = 0, excluded = 0;
  for (const auto& result : results) {
    if (const auto* set = std::get_if<CaseSet>(&result)) {
      ++included;
      for (const auto& c : set->cases) rows.push_back(CaseToJson(c));
      report += set->disease_id + '\t' + TsvField(kb.disease(set->disease_id).name) +
                "\tincluded\t" + std::to_string(set->cases.size()) + "/" +
                std::to_string(set->attempts) + "\n";
    } else {
      const auto& ex = std::get<Excluded>(result);
      ++excluded;
      report += ex.disease_id + '\t' + TsvField(kb.disease(ex.disease_id).name) + "\texcluded\t" +
                std::to_string(ex.valid) + "/" + std::to_string(ex.attempts) + "\n";
    }
  }
  WriteJsonl(run.OutPath("cases.jsonl"), rows);
  WriteText(run.OutPath("simulation_report.tsv"), report);
  run.out << report;
  run.out << rows.size() << " cases; " << included << " diseases included, " << excluded
          << " excluded\n";
  return 0;
}

int Chats(Run& run) {
  KnowledgeBase kb = run.Kb();
  TemplateSet templates = run.Templates();
  auto cases = ReadCases(run.OutPath("cases.jsonl"));
  const ChatStageConfig& cfg = run.config.chat;

  // Diseases run in parallel; cases of one disease run in order so the phrase
  // bank evolves deterministically.
  std::map<std::string, std::vector<const SimulatedCase*>> by_disease;
  for (const auto& c : cases) {
    auto& list = by_disease[c.structured.seed_disease];
    if (cfg.max_cases_per_disease <= 0 ||
        static_cast<int>(list.size()) < cfg.max_cases_per_disease) {
      list.push_back(&c);
    }
  }
  std::vector<std::string> diseases;
  for (const auto& [d, list] : by_disease) diseases.push_back(d);

  auto chat_llm = MakeClient(run.config.StageLlm("chat"));
  auto checker_llm = MakeClient(run.config.StageLlm("checker"));
  std::unique_ptr<LlmClient> profile_llm;
  if (cfg.llm_profile) profile_llm = MakeClient(run.config.StageLlm("profile"));

  PhraseBank bank;
  ChatContext gen{kb, templates, *chat_llm, bank, cfg.phrasings_per_finding};
  ChatContext check{kb, templates, *checker_llm, bank, cfg.phrasings_per_finding};

  std::vector<std::vector<ChatRecord>> per_disease(diseases.size());
  ParallelFor(diseases.size(), run.config.workers, [&](std::size_t i) {
    for (const SimulatedCase* sc : by_disease.at(diseases[i])) {
      const StructuredCase& c = sc->structured;
      Rng rng(DeriveSeed(run.config.seed, "profile:" + c.case_id, 0));
      ChatRecord chat;
      chat.case_id = c.case_id;
      chat.seed_disease = c.seed_disease;
      chat.meta.mode = cfg.mode;
      chat.meta.model = chat_llm->model_name();
      try {
        chat.profile = BuildProfile(c, profile_llm.get(), templates, rng);
        chat = cfg.mode == ChatMode::kSingle
                   ? GenerateChatSingle(gen, c, chat.profile)
                   : GenerateChatTurnwise(gen, c, chat.profile, cfg.turn_cap);
        chat = VerifyAndRepair(check, std::move(chat), c);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnparseable && e.code() != ErrorCode::kAnnotation &&
            e.code() != ErrorCode::kProfileContradiction) {
          throw;
        }
        chat.messages.clear();
        chat.meta.discarded = true;
      }
      per_disease[i].push_back(std::move(chat));
    }
  });

  std::vector<json> rows;
  std::size_t retained = 0, discarded = 0;
  for (const auto& list : per_disease) {
    for (const auto& chat : list) {
      rows.push_back(ChatToJson(chat));
      (chat.meta.discarded ? discarded : retained) += 1;
    }
  }
  WriteJsonl(run.OutPath("chats.jsonl"), rows);
  WriteText(run.OutPath("phrase_bank.json"), bank.ToJson().dump(1) + "\n");
  run.out << rows.size() << " chats; " << retained << " retained, " << discarded
          << " discarded\n";
  return 0;
}

std::pair<bool, std::string> ParseScreen(const std::string& reply) {
  std::istringstream in(reply);
  std::string line, answer, explanation;
  bool have_answer = false;
  while (std::getline(in, line)) {
    if (line.rfind("ANSWER:", 0) == 0) {
      answer = line.substr(7);
      have_answer = true;
    } else if (line.rfind("EXPLANATION:", 0) == 0) {
      explanation = line.substr(12);
      explanation.erase(0, explanation.find_first_not_of(' '));
    }
  }
  if (!have_answer) throw Error(ErrorCode::kUnparseable, "screen reply has no ANSWER: line");
  return {ParseYesNo(answer), explanation};
}

int Negatives(Run& run) {
  KnowledgeBase kb = run.Kb();
  TemplateSet templates = run.Templates();
  auto corpus = JoinCorpus(ReadCases(run.OutPath("cases.jsonl")),
                           ReadChats(run.OutPath("chats.jsonl")));
  auto llm = MakeClient(run.config.StageLlm("negatives"));

  struct Item {
    const CorpusRecord* record;
    std::string disease;
  };
  std::vector<Item> items;
  for (const auto& r : corpus) {
    if (r.sim.trace.snapshots.size() < 2) continue;
    for (auto& d : DiscardedDiagnoses(r.sim.trace)) items.push_back({&r, d});
  }

  std::vector<json> rows(items.size());
  std::vector<std::string> review(items.size());
  ParallelFor(items.size(), run.config.workers, [&](std::size_t i) {
    const CorpusRecord& r = *items[i].record;
    const std::string& name = kb.disease(items[i].disease).name;
    std::string chat_text = RenderChatText(r.chat, false);
    std::string prompt =
        templates.Get("negative_screen").Render({{"disease", name}, {"chat", chat_text}});
    auto [keep, explanation] =
        ParseScreen(llm->Complete(ChatTurnRequest::FromPrompt(prompt)).text);
    rows[i] = {{"case_id", r.id()},     {"seed_disease", r.sim.structured.seed_disease},
               {"disease", items[i].disease}, {"disease_name", name},
               {"kept", keep},          {"explanation", explanation}};
    if (keep) {
      review[i] = r.id() + '\t' + items[i].disease + '\t' + TsvField(name) + '\t' +
                  TsvField(explanation) + '\t' + TsvField(chat_text) + '\n';
    }
  });

  std::string sheet = "case_id\tdisease\tdisease_name\tscreen_explanation\tchat\n";
  std::size_t kept = 0;
  for (const auto& line : review) {
    if (line.empty()) continue;
    sheet += line;
    ++kept;
  }
  WriteJsonl(run.OutPath("negatives.jsonl"), rows);
  WriteText(run.OutPath("negatives_review.tsv"), sheet);
  run.out << items.size() << " discarded-diagnosis targets; " << kept
          << " kept by the screen for review\n";
  return 0;
}

int Split(Run& run) {
  auto corpus = JoinCorpus(ReadCases(run.OutPath("cases.jsonl")),
                           ReadChats(run.OutPath("chats.jsonl")));
  SplitSpec spec = run.config.split;
  spec.seed = run.config.seed;
  SplitResult result = SplitCorpus(std::move(corpus), spec);
  WriteRecords(run.OutPath("train.jsonl"), result.train);
  WriteRecords(run.OutPath("val.jsonl"), result.val);
  WriteRecords(run.OutPath("test.jsonl"), result.test);
  std::string report = "dropped\t" + std::to_string(result.dropped_ids.size()) + "\n";
  for (const auto& id : result.dropped_ids) report += id + "\n";
  WriteText(run.OutPath("split_report.txt"), report);
  run.out << "train " << result.train.size() << ", val " << result.val.size() << ", test "
          << result.test.size() << "; dropped " << result.dropped_ids.size()
          << " train duplicates\n";
  return 0;
}

int Stats(Run& run) {
  std::vector<SplitStats> stats;
  for (const char* split : {"train", "val", "test"}) {
    stats.push_back(CorpusStats(split, ReadRecords(run.OutPath(std::string(split) + ".jsonl"))));
  }
  std::string text = FormatStats(stats);
  WriteText(run.OutPath("stats.txt"), text);
  WriteText(run.OutPath("stats.json"), StatsToJson(stats).dump(1) + "\n");
  run.out << text;
  return 0;
}

int ExportPairs(Run& run) {
  KnowledgeBase kb = run.Kb();
  auto records = ReadRecords(run.OutPath("train.jsonl"));
  std::size_t n = ExportTrainingPairs(kb, records, run.OutPath("pairs.jsonl"));
  run.out << n << " training pairs written\n";
  return 0;
}

std::optional<CandidateList> Candidates(const std::string& backend, const KnowledgeBase& kb,
                                        const PipelineConfig& config, LlmClient* llm,
                                        const TemplateSet& templates, const CorpusRecord& r) {
  if (backend == "none") return std::nullopt;
  if (backend == "reference") return ReferenceCandidates(kb, config.weights, r.sim.structured.findings);
  if (backend == "external") return ExternalCandidates(*llm, templates, RenderChatText(r.chat, false));
  throw Error(ErrorCode::kUsage, "unknown candidate backend '" + backend + "'");
}

void WriteReport(Run& run, const std::string& stem, const std::string& title,
                 const EvalReport& report, const std::vector<json>& verdicts) {
  WriteJsonl(run.OutPath(stem + "_verdicts.jsonl"), verdicts);
  WriteText(run.OutPath(stem + "_report.json"), EvalReportToJson(report).dump(1) + "\n");
  std::string text = FormatEvalReport(report, title);
  WriteText(run.OutPath(stem + "_report.txt"), text);
  run.out << text;
}

json RankJson(const MatchRank& rank) { return rank ? json(*rank) : json(nullptr); }

int EvalCandidates(Run& run, const std::string& backend) {
  if (backend == "none") throw Error(ErrorCode::kUsage, "eval-candidates needs a backend");
  KnowledgeBase kb = run.Kb();
  TemplateSet templates = run.Templates();
  auto records = run.EvalRecords();
  std::unique_ptr<LlmClient> llm;
  if (backend == "external") llm = MakeClient(run.config.StageLlm("candidates"));

  std::vector<CandidateList> lists(records.size());
  ParallelFor(records.size(), run.config.workers, [&](std::size_t i) {
    lists[i] = *Candidates(backend, kb, run.config, llm.get(), templates, records[i]);
  });

  std::vector<MatchRank> ranks;
  std::vector<ScoredResult> results;
  std::vector<json> verdicts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string& seed = records[i].sim.structured.seed_disease;
    MatchRank rank = ExactMatchRank(lists[i].names, kb.disease(seed).name);
    ranks.push_back(rank);
    results.push_back({seed, rank});
    verdicts.push_back({{"id", records[i].id()},
                        {"seed_disease", seed},
                        {"candidates", lists[i].names},
                        {"rank", RankJson(rank)},
                        {"reciprocal_rank", ReciprocalRank(rank)}});
  }
  EvalReport report;
  report.metrics = MetricsFromRanks(ranks);
  report.categories = CategoryBreakdown(results, kb);
  WriteReport(run, "candidates_" + backend, "candidate generation (" + backend + ")", report,
              verdicts);
  return 0;
}

int EvalDdx(Run& run, const std::string& backend, const std::string& baseline_path) {
  KnowledgeBase kb = run.Kb();
  TemplateSet templates = run.Templates();
  auto records = run.EvalRecords();
  const EvalStageConfig& cfg = run.config.eval;
  if (cfg.matcher != "exact" && cfg.matcher != "judge") {
    throw Error(ErrorCode::kConfig, "eval.matcher must be exact|judge");
  }
  auto ddx_llm = MakeClient(run.config.StageLlm("ddx"));
  auto judge_llm = MakeClient(run.config.StageLlm("judge"));
  std::unique_ptr<LlmClient> cand_llm;
  if (backend == "external") cand_llm = MakeClient(run.config.StageLlm("candidates"));

  struct Row {
    DdxResult ddx;
    std::optional<CandidateList> candidates;
    MatchRank rank;
    std::optional<SimilarityLabel> label;
  };
  std::vector<Row> rows(records.size());
  ParallelFor(records.size(), run.config.workers, [&](std::size_t i) {
    const CorpusRecord& r = records[i];
    const std::string& seed_name = kb.disease(r.sim.structured.seed_disease).name;
    std::string chat_text = RenderChatText(r.chat, false);
    Row& row = rows[i];
    row.candidates = Candidates(backend, kb, run.config, cand_llm.get(), templates, r);
    row.ddx = RunDdx(*ddx_llm, templates, chat_text, row.candidates);
    if (cfg.matcher == "judge") {
      BinaryJudge judge(*judge_llm, templates);
      row.rank = judge.Judge(row.ddx.names, seed_name);
    } else {
      row.rank = ExactMatchRank(row.ddx.names, seed_name);
    }
    if (cfg.similarity) row.label = JudgeSimilarity(*judge_llm, templates, row.ddx.names, seed_name);
  });

  EvalReport report;
  std::vector<MatchRank> ranks;
  std::vector<ScoredResult> results;
  std::vector<json> verdicts;
  std::map<std::string, double> rr_by_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Row& row = rows[i];
    const std::string& seed = records[i].sim.structured.seed_disease;
    ranks.push_back(row.rank);
    results.push_back({seed, row.rank});
    rr_by_id[records[i].id()] = ReciprocalRank(row.rank);
    json v = {{"id", records[i].id()},
              {"seed_disease", seed},
              {"ddx", row.ddx.names},
              {"from_candidates", row.ddx.from_candidates},
              {"rank", RankJson(row.rank)},
              {"reciprocal_rank", ReciprocalRank(row.rank)},
              {"warnings", row.ddx.warnings}};
    v["candidates"] = row.candidates ? json(row.candidates->names) : json(nullptr);
    if (row.label) {
      std::string label(SimilarityLabelName(*row.label));
      v["similarity"] = label;
      ++report.label_distribution[label];
    }
    verdicts.push_back(std::move(v));
  }
  report.metrics = MetricsFromRanks(ranks);
  report.categories = CategoryBreakdown(results, kb);

  if (!baseline_path.empty()) {
    std::vector<double> current, base;
    std::vector<MatchRank> base_ranks;
    for (const auto& row : ReadJsonl(baseline_path)) {
      std::string id = row.at("id").get<std::string>();
      auto it = rr_by_id.find(id);
      if (it == rr_by_id.end()) continue;
      current.push_back(it->second);
      base.push_back(row.at("reciprocal_rank").get<double>());
      const json& rank = row.at("rank");
      base_ranks.push_back(rank.is_null() ? MatchRank{} : MatchRank{rank.get<int>()});
    }
    report.paired_n = current.size();
    if (!base_ranks.empty()) report.baseline = MetricsFromRanks(base_ranks);
    try {
      report.p_value = WilcoxonSignedRank(current, base).p_value;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTooFew) throw;
      run.out << "paired test skipped: " << e.what() << '\n';
    }
  }
  WriteReport(run, "ddx_" + backend, "differential diagnosis (candidates: " + backend + ")",
              report, verdicts);
  return 0;
}

struct Flags {
  std::string config, kb, out, mode, backend, baseline;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void AddCommonFlags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "pipeline config (JSON)");
  cmd->add_option("--kb", f.kb, "knowledge base file");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--workers", f.workers, "worker threads");
}

}  // namespace

LlmConfig PipelineConfig::StageLlm(const std::string& stage) const {
  if (auto it = llm.find(stage); it != llm.end()) return it->second;
  if (auto it = llm.find("default"); it != llm.end()) return it->second;
  return LlmConfig{};
}

PipelineConfig PipelineConfigFromJson(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "config must be a JSON object");
  PipelineConfig c;
  try {
    Get(j, "kb", c.kb_path);
    Get(j, "out", c.out_dir);
    Get(j, "prompts", c.prompts_dir);
    Get(j, "seed", c.seed);
    Get(j, "workers", c.workers);
    c.kb_path = Resolve(c.kb_path, base_dir);
    c.out_dir = Resolve(c.out_dir, base_dir);
    c.prompts_dir = Resolve(c.prompts_dir, base_dir);

    if (j.contains("weights")) {
      const json& w = j.at("weights");
      Get(w, "es_weight", c.weights.es_weight);
      Get(w, "freq_penalty", c.weights.freq_penalty);
      Get(w, "import_penalty", c.weights.import_penalty);
      c.weights.Validate();
    }
    if (j.contains("sim")) {
      const json& s = j.at("sim");
      Get(s, "present_prob", c.sim.present_prob);
      Get(s, "max_attempts", c.sim.max_attempts);
      Get(s, "min_valid", c.sim.min_valid);
      Get(s, "ddx_checkpoint_after", c.sim.ddx_checkpoint_after);
      Get(s, "max_findings", c.sim.max_findings);
      Get(s, "min_findings", c.sim.min_findings);
      Get(s, "overlap_present_scale", c.sim.overlap_present_scale);
      c.sim.Validate();
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      Get(s, "n_diseases", c.synth.n_diseases);
      Get(s, "n_findings", c.synth.n_findings);
      Get(s, "links_min", c.synth.links_min);
      Get(s, "links_max", c.synth.links_max);
    }
    if (j.contains("split")) {
      const json& s = j.at("split");
      Get(s, "train", c.split.train);
      Get(s, "val", c.split.val);
      Get(s, "test", c.split.test);
      c.split.Validate();
    }
    if (j.contains("chat")) {
      const json& s = j.at("chat");
      if (s.contains("mode")) c.chat.mode = ParseChatMode(s.at("mode").get<std::string>());
      Get(s, "turn_cap", c.chat.turn_cap);
      Get(s, "phrasings_per_finding", c.chat.phrasings_per_finding);
      Get(s, "max_cases_per_disease", c.chat.max_cases_per_disease);
      Get(s, "llm_profile", c.chat.llm_profile);
    }
    if (j.contains("eval")) {
      const json& s = j.at("eval");
      Get(s, "records", c.eval.records);
      Get(s, "matcher", c.eval.matcher);
      Get(s, "similarity", c.eval.similarity);
      Get(s, "candidate_backend", c.eval.candidate_backend);
      Get(s, "ddx_candidates", c.eval.ddx_candidates);
    }
    if (j.contains("llm")) {
      const json& l = j.at("llm");
      if (!l.is_object()) throw Error(ErrorCode::kConfig, "'llm' must be an object");
      LlmConfig base;
      if (l.contains("default")) base = LlmConfigFromJson(l.at("default"));
      base.mock_script = Resolve(base.mock_script, base_dir);
      c.llm["default"] = base;
      for (const auto& [stage, value] : l.items()) {
        if (stage == "default") continue;
        if (!kStages.count(stage)) throw Error(ErrorCode::kConfig, "unknown LLM stage '" + stage + "'");
        LlmConfig sc = LlmConfigFromJson(value, base);
        if (value.contains("mock_script")) sc.mock_script = Resolve(sc.mock_script, base_dir);
        c.llm[stage] = sc;
      }
      for (const auto& [stage, sc] : c.llm) sc.Validate();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
  if (!c.kb_path.empty() && !fs::exists(c.kb_path)) {
    throw Error(ErrorCode::kConfig, "knowledge base '" + c.kb_path + "' not found");
  }
  if (!c.prompts_dir.empty() && !fs::is_directory(c.prompts_dir)) {
    throw Error(ErrorCode::kConfig, "prompt directory '" + c.prompts_dir + "' not found");
  }
  for (const auto& [stage, sc] : c.llm) {
    if (!sc.mock_script.empty() && !fs::exists(sc.mock_script)) {
      throw Error(ErrorCode::kConfig, "mock script '" + sc.mock_script + "' not found");
    }
  }
  return c;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return PipelineConfigFromJson(j, fs::path(path).parent_path().string());
}

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const std::vector<std::pair<std::string, std::string>> kCommands = {
      {"kb-validate", "check a knowledge base file"},
      {"kb-synth", "write a synthetic knowledge base to <out>/kb.txt"},
      {"simulate", "simulate structured cases for every disease"},
      {"chats", "generate chats for the simulated cases"},
      {"negatives", "screen discarded diagnoses as near-miss negatives"},
      {"split", "build train/val/test splits"},
      {"stats", "corpus statistics per split"},
      {"export-pairs", "export candidate-model training pairs"},
      {"eval-candidates", "evaluate candidate generation"},
      {"eval-ddx", "evaluate the final differential diagnosis"},
  };
  auto fail = [&err](ErrorCode code, const std::string& message) {
    err << "error: " << ErrorCodeName(code) << ": " << OneLine(message) << '\n';
    return code == ErrorCode::kUsage ? 2 : 1;
  };
  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    bool known = std::any_of(kCommands.begin(), kCommands.end(),
                             [&](const auto& c) { return c.first == args[0]; });
    if (!known) return fail(ErrorCode::kUsage, "unknown subcommand '" + args[0] + "'");
  }

  CLI::App app("rarescale: rare-disease chat corpus and differential-diagnosis evaluation",
               "rarescale");
  app.require_subcommand(1);
  Flags flags;
  std::map<std::string, CLI::App*> cmds;
  for (const auto& [name, help] : kCommands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    AddCommonFlags(cmd, flags);
    cmds[name] = cmd;
  }
  cmds["chats"]->add_option("--mode", flags.mode, "single or turnwise");
  for (const char* name : {"eval-candidates", "eval-ddx"}) {
    cmds[name]->add_option("--backend", flags.backend, "candidate backend: none|reference|external");
  }
  cmds["eval-ddx"]->add_option("--baseline", flags.baseline, "verdict file of a baseline run");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCode::kUsage, e.what());
  }

  try {
    PipelineConfig config;
    if (!flags.config.empty()) config = LoadPipelineConfig(flags.config);
    if (!flags.kb.empty()) config.kb_path = flags.kb;
    if (!flags.out.empty()) config.out_dir = flags.out;
    if (flags.seed) config.seed = *flags.seed;
    if (flags.workers) config.workers = *flags.workers;
    if (!flags.mode.empty()) config.chat.mode = ParseChatMode(flags.mode);
    if (config.workers < 1) throw Error(ErrorCode::kUsage, "--workers must be at least 1");

    Run run{std::move(config), out};
    std::string name = app.get_subcommands().front()->get_name();
    if (name == "kb-validate") return KbValidate(run);
    if (name == "kb-synth") return KbSynth(run);
    if (name == "simulate") return Simulate(run);
    if (name == "chats") return Chats(run);
    if (name == "negatives") return Negatives(run);
    if (name == "split") return Split(run);
    if (name == "stats") return Stats(run);
    if (name == "export-pairs") return ExportPairs(run);
    if (name == "eval-candidates") {
      return EvalCandidates(run, flags.backend.empty() ? run.config.eval.candidate_backend
                                                       : flags.backend);
    }
    if (name == "eval-ddx") {
      return EvalDdx(run, flags.backend.empty() ? run.config.eval.ddx_candidates : flags.backend,
                     flags.baseline);
    }
    return fail(ErrorCode::kUsage, "unknown subcommand '" + name + "'");
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::kIo, e.what());
  }
}

}  // namespace rarescale
