// Copyright 2026 The modegate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "modegate/harness.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <spdlog/spdlog.h>

#include "modegate/answers.h"
#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

std::filesystem::path scores_path(const RunConfig& c) {
  return std::filesystem::path(c.cache_dir) / "scores.jsonl";
}

std::filesystem::path reports_dir(const RunConfig& c) {
  return std::filesystem::path(c.cache_dir) / "reports";
}

std::filesystem::path early_exit_path(const RunConfig& c) {
  return std::filesystem::path(c.cache_dir) / "early_exit.jsonl";
}

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& c) {
  if (!c.backend.mock_fixture.empty()) return MockBackend::from_file(c.backend.mock_fixture);
  if (c.backend.reasoner_url.empty()) {
    throw InvalidArgument("set backend.reasoner_url or backend.mock_fixture");
  }
  EndpointConfig reasoner{c.backend.reasoner_url, c.backend.model, c.backend.api_key_env};
  std::optional<EndpointConfig> verifier;
  if (!c.backend.verifier_url.empty()) {
    verifier = EndpointConfig{
        c.backend.verifier_url,
        c.backend.verifier_model.empty() ? c.backend.model : c.backend.verifier_model,
        c.backend.verifier_api_key_env.empty() ? c.backend.api_key_env
                                               : c.backend.verifier_api_key_env};
  }
  return std::make_unique<OpenAIBackend>(std::move(reasoner), std::move(verifier),
                                         c.backend.parallelism);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  pool.clear();
  if (first) std::rethrow_exception(first);
}

CompletionRequest primary_request(const RunConfig& c, const QuestionRecord& q, bool nothinking,
                                  std::uint64_t sample_index) {
  CompletionRequest r;
  r.prompt = render_prompt(nothinking ? PromptKind::kNoThinking : PromptKind::kThinking, q,
                           c.markers, c.fake_thought);
  r.params = c.sampling;
  r.sample_index = sample_index;
  r.question_id = q.id;
  r.purpose = nothinking ? "nothinking" : "thinking";
  return r;
}

ProbeInputs load_probe_inputs(const RunConfig& c) {
  ProbeInputs in;
  if (!c.hidden_states_path.empty() && std::filesystem::exists(c.hidden_states_path)) {
    in.hidden_states = HiddenStateStore::from_file(c.hidden_states_path);
  }
  if (!c.probe_weights_path.empty() && std::filesystem::exists(c.probe_weights_path)) {
    in.probe = MlpWeights::from_file(c.probe_weights_path);
  }
  return in;
}

ScorerContext make_scorer_context(const RunConfig& c, CompletionBackend* backend,
                                  const ProbeInputs& inputs) {
  ScorerContext ctx;
  ctx.backend = backend;
  ctx.markers = c.markers;
  ctx.thought = c.fake_thought;
  ctx.run_params = c.sampling;
  ctx.dynasor_samples = c.dynasor_samples;
  ctx.induced_max_tokens = c.induced_max_tokens;
  ctx.verdict_max_tokens = c.verdict_max_tokens;
  ctx.seed = c.seed;
  ctx.hidden_states = inputs.hidden_states ? &*inputs.hidden_states : nullptr;
  ctx.probe = inputs.probe ? &*inputs.probe : nullptr;
  return ctx;
}

std::vector<PlannedRequest> plan_generation(const RunConfig& c,
                                            const std::vector<QuestionRecord>& questions) {
  const bool dynasor =
      std::find(c.scorers.begin(), c.scorers.end(), ScorerKind::kDynasor) != c.scorers.end();
  const ScorerContext ctx = make_scorer_context(c, nullptr, {});
  std::vector<PlannedRequest> plan;
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const QuestionRecord& q = questions[qi];
    for (int s = 0; s < c.samples_per_question; ++s) {
      const auto sample = static_cast<std::uint64_t>(s);
      plan.push_back({primary_request(c, q, false, sample), "thinking", qi, true});
      plan.push_back({primary_request(c, q, true, sample), "nothinking", qi, true});
    }
    if (dynasor) {
      for (CompletionRequest& r : dynasor_requests(q, ctx)) {
        plan.push_back({std::move(r), "dynasor_probe", qi, false});
      }
    }
  }
  return plan;
}

GenerateSummary phase_generate(const RunConfig& c, const std::vector<QuestionRecord>& questions,
                               CompletionBackend& backend, GenerationCache& cache,
                               const GenerateOptions& options) {
  c.validate();
  const std::vector<PlannedRequest> plan = plan_generation(c, questions);
  GenerateSummary summary;
  summary.planned = plan.size();
  std::atomic<std::size_t> cached{0}, generated{0}, errors{0}, claimed{0};
  std::atomic<bool> interrupted{false};

  parallel_for(plan.size(), c.backend.parallelism, [&](std::size_t i) {
    const PlannedRequest& p = plan[i];
    const std::string key = request_key(p.request.prompt, p.request.params, p.request.sample_index);
    if (cache.contains(key)) {
      ++cached;
      return;
    }
    if (options.max_new_records && claimed++ >= *options.max_new_records) {
      interrupted = true;
      return;
    }
    CacheRecord r;
    r.key = key;
    r.question_id = p.request.question_id;
    r.mode = p.mode;
    r.sample_index = p.request.sample_index;
    try {
      r.completion = backend.complete(p.request);
      if (p.graded) r.graded = grade_generation(r.completion, questions[p.question]);
      ++generated;
    } catch (const std::exception& e) {
      spdlog::error("{} [{} sample {}]: {}", p.request.question_id, p.mode,
                    p.request.sample_index, e.what());
      r.completion = Completion{};
      r.completion.finish_reason = FinishReason::kError;
      r.error = e.what();
      ++errors;
    }
    cache.append(std::move(r));
  });

  summary.cached = cached;
  summary.generated = generated;
  summary.errors = errors;
  summary.interrupted = interrupted;
  return summary;
}

json score_row_to_json(const ScoreRow& row) {
  json j;
  if (row.score) {
    j = score_to_json(row.question_id, *row.score);
  } else {
    j = {{"id", row.question_id},
         {"scorer", std::string(to_string(row.scorer))},
         {"value", nullptr}};
    if (!row.missing.empty()) j["missing"] = row.missing;
    if (!row.error.empty()) j["error"] = row.error;
  }
  j["dataset"] = row.dataset;
  return j;
}

ScoreRow score_row_from_json(const json& j) {
  ScoreRow row;
  row.dataset = j.at("dataset").get<std::string>();
  row.question_id = j.at("id").get<std::string>();
  row.scorer = parse_scorer_kind(j.at("scorer").get<std::string>());
  if (!j.at("value").is_null()) {
    row.score = score_from_json(j);
  } else {
    row.missing = j.value("missing", std::string());
    row.error = j.value("error", std::string());
  }
  return row;
}

std::vector<ScoreRow> load_scores(const std::filesystem::path& path) {
  std::vector<ScoreRow> rows;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    try {
      rows.push_back(score_row_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return rows;
}

ScoreSummary phase_score(const RunConfig& c, const std::vector<QuestionRecord>& questions,
                         CompletionBackend& backend, GenerationCache& cache) {
  c.validate();
  const ProbeInputs inputs = load_probe_inputs(c);
  CachingBackend cached(backend, cache);
  const ScorerContext ctx = make_scorer_context(c, &cached, inputs);

  std::vector<ScoreRow> rows(questions.size() * c.scorers.size());
  parallel_for(rows.size(), c.backend.parallelism, [&](std::size_t i) {
    const QuestionRecord& q = questions[i / c.scorers.size()];
    ScoreRow& row = rows[i];
    row.dataset = q.dataset;
    row.question_id = q.id;
    row.scorer = c.scorers[i % c.scorers.size()];
    try {
      row.score = score(row.scorer, q, ctx);
    } catch (const MissingFeature& e) {
      row.missing = e.what();
    } catch (const BackendError& e) {
      spdlog::error("{} [{}]: {}", q.id, to_string(row.scorer), e.what());
      row.error = e.what();
    }
  });

  std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tuple(a.dataset, a.question_id, to_string(a.scorer)) <
           std::tuple(b.dataset, b.question_id, to_string(b.scorer));
  });
  ScoreSummary summary;
  std::string out;
  for (const ScoreRow& row : rows) {
    summary.missing += row.missing.empty() ? 0 : 1;
    summary.errors += row.error.empty() ? 0 : 1;
    out += score_row_to_json(row).dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  write_file_atomic(scores_path(c), out);
  summary.rows = std::move(rows);
  return summary;
}

std::vector<PairedInstance> paired_instances(const RunConfig& c,
                                             const std::vector<QuestionRecord>& questions,
                                             const GenerationCache& cache,
                                             const std::vector<ScoreRow>& scores,
                                             std::size_t* unpaired) {
  std::map<std::pair<std::string, std::string>, std::map<ScorerKind, ScoreValue>> by_question;
  for (const ScoreRow& row : scores) {
    if (row.score) by_question[{row.dataset, row.question_id}][row.scorer] = *row.score;
  }
  std::vector<PairedInstance> out;
  std::size_t skipped = 0;
  for (const QuestionRecord& q : questions) {
    auto outcome = [&](bool nothinking) -> std::optional<BranchOutcome> {
      const CompletionRequest r = primary_request(c, q, nothinking, 0);
      auto rec = cache.find(request_key(r.prompt, r.params, r.sample_index));
      if (!rec || rec->completion.finish_reason == FinishReason::kError) return std::nullopt;
      const GradedAnswer g = rec->graded ? *rec->graded : grade_generation(rec->completion, q);
      return BranchOutcome{g.correct, rec->completion.n_tokens};
    };
    auto thinking = outcome(false);
    auto nothinking = outcome(true);
    if (!thinking || !nothinking) {
      ++skipped;
      continue;
    }
    PairedInstance inst;
    inst.question_id = q.id;
    inst.thinking = *thinking;
    inst.nothinking = *nothinking;
    if (auto it = by_question.find({q.dataset, q.id}); it != by_question.end()) {
      inst.scores = it->second;
    }
    out.push_back(std::move(inst));
  }
  if (unpaired) *unpaired = skipped;
  return out;
}

namespace {

std::string file_stem(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return out;
}

json table_row(const SweepPoint& p, const SweepPoint& thinking) {
  json row{{"acc", p.accuracy * 100.0},
           {"tok", p.mean_tokens},
           {"nr", p.nothinking_ratio * 100.0},
           {"n", p.n},
           {"delta_acc_vs_thinking", (p.accuracy - thinking.accuracy) * 100.0}};
  row["delta_tok_pct"] = thinking.mean_tokens > 0.0
                             ? json((p.mean_tokens - thinking.mean_tokens) / thinking.mean_tokens * 100.0)
                             : json(nullptr);
  return row;
}

bool binary_verdict(ScorerKind k) {
  return k == ScorerKind::kFlashThink || k == ScorerKind::kPreJudge;
}

json calibration_json(std::span<const PairedInstance> instances, ScorerKind k, int bins) {
  if (binary_verdict(k)) return {{"status", "skipped"}, {"reason", "binary verdict scorer"}};
  try {
    const CalibrationReport r = calibration_report(instances, k, bins);
    json j{{"status", "ok"},
           {"roc_auc", r.roc_auc},
           {"n_bins", r.n_bins},
           {"positives", r.positives},
           {"negatives", r.negatives}};
    j["ece"] = r.ece ? json(*r.ece) : json(nullptr);
    j["brier"] = r.brier ? json(*r.brier) : json(nullptr);
    return j;
  } catch (const UndefinedMetric& e) {
    return {{"status", "undefined"}, {"reason", e.what()}};
  }
}

}  // namespace

json phase_evaluate(const RunConfig& c, const std::vector<QuestionRecord>& questions,
                    const GenerationCache& cache, const std::vector<ScoreRow>& scores) {
  c.validate();
  std::map<std::string, std::vector<QuestionRecord>> datasets;
  for (const QuestionRecord& q : questions) datasets[q.dataset].push_back(q);

  const std::filesystem::path dir = reports_dir(c);
  std::filesystem::create_directories(dir / "curves");
  json grid = c.lambda_grid;
  json report{{"metadata",
               {{"tok_counts", "generated_only"},
                {"positive_class", "nothinking_correct"},
                {"selection_rule", "argmax accuracy; ties to fewer mean tokens, then lower lambda"},
                {"sample_index", 0},
                {"lambda_grid", grid},
                {"alpha", c.alpha},
                {"ece_bins", c.ece_bins},
                {"seed", c.seed},
                {"random_p_grid", c.random_p_grid},
                {"units", {{"acc", "percent"}, {"nr", "percent"}, {"tok", "tokens"},
                           {"delta_acc_vs_thinking", "points"}, {"delta_tok_pct", "percent"}}}}},
              {"datasets", json::object()}};

  for (const auto& [name, qs] : datasets) {
    std::size_t unpaired = 0;
    const auto instances = paired_instances(c, qs, cache, scores, &unpaired);
    json d{{"questions", qs.size()}, {"paired", instances.size()}, {"unpaired", unpaired}};
    if (instances.empty()) {
      d["status"] = "no paired generations";
      report["datasets"][name] = std::move(d);
      continue;
    }
    const SweepPoint thinking = baseline_point(instances, false);
    const SweepPoint nothinking = baseline_point(instances, true);
    d["baselines"] = {{"thinking", table_row(thinking, thinking)},
                      {"nothinking", table_row(nothinking, thinking)}};

    json rows = json::object();
    for (ScorerKind k : c.scorers) {
      const std::string scorer(to_string(k));
      const auto scored = std::count_if(instances.begin(), instances.end(),
                                        [&](const PairedInstance& i) { return i.scores.count(k); });
      if (scored == 0) {
        rows[scorer] = {{"status", "no scores"}, {"excluded", instances.size()}};
        continue;
      }
      const auto curve = sweep_thresholds(instances, k, c.lambda_grid);
      const std::string csv = "curves/" + file_stem(name) + "__" + scorer + ".csv";
      write_file_atomic(dir / csv, curve_csv(curve));
      const SweepPoint& best = select_best(curve);
      json row = table_row(best, thinking);
      row["lambda"] = best.lambda;
      json entry{{"status", "ok"},
                 {"best", std::move(row)},
                 {"excluded", best.excluded},
                 {"curve", csv},
                 {"calibration", calibration_json(instances, k, c.ece_bins)}};
      rows[scorer] = std::move(entry);
    }
    d["scorers"] = std::move(rows);

    const auto random = random_baseline_curve(instances, c.random_p_grid, c.seed);
    const std::string random_csv = "curves/" + file_stem(name) + "__random.csv";
    write_file_atomic(dir / random_csv, curve_csv(random));
    json points = json::array();
    for (const SweepPoint& p : random) {
      json row = table_row(p, thinking);
      row["p_exit"] = p.lambda;
      points.push_back(std::move(row));
    }
    d["random_baseline"] = {{"curve", random_csv}, {"points", std::move(points)}};
    report["datasets"][name] = std::move(d);
  }
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  return report;
}

std::string render_report_table(const json& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %-12s %8s %10s %8s %9s %9s %7s\n", "dataset", "method",
                "acc", "tok", "nr", "d_acc", "d_tok%", "lambda");
  out << line;
  auto emit = [&](const std::string& ds, const std::string& method, const json& row) {
    const json& dt = row.at("delta_tok_pct");
    std::snprintf(line, sizeof line, "%-16s %-12s %8.2f %10.1f %8.2f %+9.2f %9s %7s\n", ds.c_str(),
                  method.c_str(), row.at("acc").get<double>(), row.at("tok").get<double>(),
                  row.at("nr").get<double>(), row.at("delta_acc_vs_thinking").get<double>(),
                  dt.is_null() ? "n/a" : format_number(std::round(dt.get<double>() * 100) / 100).c_str(),
                  row.contains("lambda") ? format_number(row["lambda"].get<double>()).c_str() : "-");
    out << line;
  };
  for (const auto& [name, d] : report.at("datasets").items()) {
    if (!d.contains("baselines")) {
      out << name << ": " << d.value("status", std::string("empty")) << '\n';
      continue;
    }
    emit(name, "thinking", d["baselines"]["thinking"]);
    emit(name, "nothinking", d["baselines"]["nothinking"]);
    for (const auto& [scorer, entry] : d["scorers"].items()) {
      if (entry.value("status", std::string()) != "ok") {
        out << name << ' ' << scorer << ": " << entry.value("status", std::string()) << '\n';
        continue;
      }
      emit(name, scorer, entry["best"]);
    }
  }
  return out.str();
}

}  // namespace modegate
