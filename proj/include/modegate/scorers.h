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

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "modegate/backend.h"
#include "modegate/probe.h"
#include "modegate/prompting.h"
#include "modegate/question.h"

namespace modegate {

enum class ScorerKind { kFlashThink, kPromptConf, kDynasor, kPreJudge, kProbeConf, kDeer, kEntropy, kRandom };

inline constexpr std::array<ScorerKind, 7> kMonitorScorers = {
    ScorerKind::kFlashThink, ScorerKind::kPromptConf, ScorerKind::kDynasor, ScorerKind::kPreJudge,
    ScorerKind::kProbeConf,  ScorerKind::kDeer,       ScorerKind::kEntropy,
};

std::string_view to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(std::string_view name);

enum class Orientation { kHigherExits, kLowerExits };

std::string_view to_string(Orientation orientation);
Orientation parse_orientation(std::string_view name);

// Maximum of -p log2 p over p in (0, 1], reached at p = 1/e.
inline constexpr double kEntropyCeiling = 1.0 / (std::numbers::e * std::numbers::ln2);

struct ScoreValue {
  ScorerKind scorer = ScorerKind::kDeer;
  double value = 0.0;
  Orientation orientation = Orientation::kHigherExits;
  nlohmann::json aux = nlohmann::json::object();
};

nlohmann::json score_to_json(const std::string& question_id, const ScoreValue& score);
ScoreValue score_from_json(const nlohmann::json& j);

// Everything a monitor may need besides the question. `thought` is the fake thought for
// zero-step mode selection, or the reasoning generated so far during early exit.
struct ScorerContext {
  CompletionBackend* backend = nullptr;
  ChatMarkers markers;
  FakeThought thought;
  SamplingParams run_params;
  int dynasor_samples = 3;
  int induced_max_tokens = 32;
  int verdict_max_tokens = 16;
  std::int64_t seed = 0;
  const HiddenStateStore* hidden_states = nullptr;
  const MlpWeights* probe = nullptr;
  double random_p_exit = 0.5;
};

// Greedy parameters for induced trial answers and verdict calls.
SamplingParams induced_params(const SamplingParams& run, int max_new_tokens);
// Per-sample parameters for Dynasor probes: run temperature, seed from the
// (seed, question id, "dynasor", index) sub-stream.
SamplingParams dynasor_params(const ScorerContext& ctx, const QuestionRecord& q, int index);
// The exact requests issued by score_dynasor, in sample order.
std::vector<CompletionRequest> dynasor_requests(const QuestionRecord& q, const ScorerContext& ctx);

ScoreValue score_flashthink(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_promptconf(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_dynasor(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_prejudge(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_probeconf(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_deer(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_entropy(const QuestionRecord& q, const ScorerContext& ctx);
ScoreValue score_random(const QuestionRecord& q, double p_exit, std::int64_t seed);
// The uniform draw behind score_random: counter-based on (seed, question id), order-independent.
double random_draw(std::string_view question_id, std::int64_t seed);

ScoreValue score(ScorerKind kind, const QuestionRecord& q, const ScorerContext& ctx);

// Pure formula kernels shared by the monitors.
double geometric_mean_confidence(std::span<const double> max_logprobs);
double mean_surprisal_term(std::span<const double> realized_logprobs);
// Size of the largest answer-equivalence class divided by the number of trial answers;
// absent answers are singletons.
double max_agreement_ratio(std::span<const std::optional<std::string>> answers, AnswerType type);

// Greedy grouping of trial answers into equivalence classes; returns class sizes.
std::vector<int> agreement_classes(std::span<const std::optional<std::string>> answers,
                                   AnswerType type);

// Index range [first, last) of the tokens that form the induced answer. `inside_box` means the
// prompt already opened a \boxed{ group and the answer ends at the matching close brace.
struct TokenRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const { return last - first; }
};
TokenRange induced_answer_tokens(const std::vector<TokenInfo>& tokens, bool inside_box);

struct Decision {
  bool exit = false;
};

// higher_exits: exit when value > lambda. lower_exits: exit when value <= alpha * ceiling.
Decision decide(const ScoreValue& score, double lambda, double alpha);

}  // namespace modegate
