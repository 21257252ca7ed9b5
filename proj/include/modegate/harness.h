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

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modegate/backend.h"
#include "modegate/cache.h"
#include "modegate/config.h"
#include "modegate/metrics.h"
#include "modegate/probe.h"
#include "modegate/question.h"
#include "modegate/scorers.h"

namespace modegate {

// Output layout under cache_dir.
std::filesystem::path scores_path(const RunConfig& config);
std::filesystem::path reports_dir(const RunConfig& config);
std::filesystem::path early_exit_path(const RunConfig& config);

// Mock backend when backend.mock_fixture is set, otherwise the OpenAI-compatible client.
std::unique_ptr<CompletionBackend> make_backend(const RunConfig& config);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// The Thinking / NoThinking request for one question and sample.
CompletionRequest primary_request(const RunConfig& config, const QuestionRecord& q,
                                  bool nothinking, std::uint64_t sample_index);

struct PlannedRequest {
  CompletionRequest request;
  std::string mode;
  std::size_t question = 0;  // index into the dataset
  bool graded = false;
};

// Every phase-1 request in a fixed order: per question, each sample's Thinking then NoThinking,
// then the Dynasor probes when that scorer is enabled.
std::vector<PlannedRequest> plan_generation(const RunConfig& config,
                                            const std::vector<QuestionRecord>& questions);

struct ProbeInputs {
  std::optional<HiddenStateStore> hidden_states;
  std::optional<MlpWeights> probe;
};
ProbeInputs load_probe_inputs(const RunConfig& config);

ScorerContext make_scorer_context(const RunConfig& config, CompletionBackend* backend,
                                  const ProbeInputs& inputs);

struct GenerateOptions {
  // Stop issuing requests once this many new records were written (simulated interruption).
  std::optional<std::size_t> max_new_records;
};

struct GenerateSummary {
  std::size_t planned = 0;
  std::size_t cached = 0;
  std::size_t generated = 0;
  std::size_t errors = 0;
  bool interrupted = false;
};

GenerateSummary phase_generate(const RunConfig& config, const std::vector<QuestionRecord>& questions,
                               CompletionBackend& backend, GenerationCache& cache,
                               const GenerateOptions& options = {});

struct ScoreRow {
  std::string dataset;
  std::string question_id;
  ScorerKind scorer = ScorerKind::kDeer;
  std::optional<ScoreValue> score;
  std::string missing;  // set when a required feature is absent
  std::string error;    // set when a backend call failed
};

nlohmann::json score_row_to_json(const ScoreRow& row);
ScoreRow score_row_from_json(const nlohmann::json& j);
std::vector<ScoreRow> load_scores(const std::filesystem::path& path);

struct ScoreSummary {
  std::vector<ScoreRow> rows;  // sorted by dataset, question id, scorer
  std::size_t missing = 0;
  std::size_t errors = 0;
};

// Scores every (question, enabled scorer) on the fake thought and writes scores.jsonl atomically.
// Monitor requests go through the generation cache.
ScoreSummary phase_score(const RunConfig& config, const std::vector<QuestionRecord>& questions,
                         CompletionBackend& backend, GenerationCache& cache);

// Joins graded sample-0 generations with the score rows for one dataset. Questions lacking a
// successful Thinking or NoThinking generation are skipped and counted in `unpaired`.
std::vector<PairedInstance> paired_instances(const RunConfig& config,
                                             const std::vector<QuestionRecord>& questions,
                                             const GenerationCache& cache,
                                             const std::vector<ScoreRow>& scores,
                                             std::size_t* unpaired = nullptr);

// Writes reports/report.json and reports/curves/<dataset>__<scorer>.csv; returns the report.
nlohmann::json phase_evaluate(const RunConfig& config, const std::vector<QuestionRecord>& questions,
                              const GenerationCache& cache, const std::vector<ScoreRow>& scores);

// Fixed-width text rendering of report.json, one row per (dataset, scorer).
std::string render_report_table(const nlohmann::json& report);

}  // namespace modegate
