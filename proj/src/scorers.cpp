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

#include "modegate/scorers.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "modegate/answers.h"
#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::kFlashThink: return "flashthink";
    case ScorerKind::kPromptConf: return "promptconf";
    case ScorerKind::kDynasor: return "dynasor";
    case ScorerKind::kPreJudge: return "prejudge";
    case ScorerKind::kProbeConf: return "probeconf";
    case ScorerKind::kDeer: return "deer";
    case ScorerKind::kEntropy: return "entropy";
    case ScorerKind::kRandom: return "random";
  }
  throw InvalidArgument("unknown scorer kind");
}

ScorerKind parse_scorer_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "dynasor-cot" || lower == "dynasor_cot") lower = "dynasor";
  if (lower == "pre-judge" || lower == "pre_judge") lower = "prejudge";
  for (ScorerKind k : kMonitorScorers) {
    if (to_string(k) == lower) return k;
  }
  if (lower == "random") return ScorerKind::kRandom;
  throw InvalidArgument("unknown scorer '" + std::string(name) + "'");
}

std::string_view to_string(Orientation o) {
  return o == Orientation::kHigherExits ? "higher_exits" : "lower_exits";
}

Orientation parse_orientation(std::string_view name) {
  if (name == "higher_exits") return Orientation::kHigherExits;
  if (name == "lower_exits") return Orientation::kLowerExits;
  throw FormatError("unknown orientation '" + std::string(name) + "'");
}

json score_to_json(const std::string& question_id, const ScoreValue& s) {
  return {{"id", question_id},
          {"scorer", std::string(to_string(s.scorer))},
          {"value", s.value},
          {"orientation", std::string(to_string(s.orientation))},
          {"aux", s.aux}};
}

ScoreValue score_from_json(const json& j) {
  ScoreValue s;
  s.scorer = parse_scorer_kind(j.at("scorer").get<std::string>());
  s.value = j.at("value").get<double>();
  s.orientation = parse_orientation(j.at("orientation").get<std::string>());
  s.aux = j.value("aux", json::object());
  return s;
}

SamplingParams induced_params(const SamplingParams& run, int max_new_tokens) {
  SamplingParams p;
  p.temperature = 0.0;
  p.max_new_tokens = max_new_tokens;
  p.top_logprobs = std::max(run.top_logprobs, 1);
  return p;
}

SamplingParams dynasor_params(const ScorerContext& ctx, const QuestionRecord& q, int index) {
  SamplingParams p;
  p.temperature = ctx.run_params.temperature;
  p.max_new_tokens = ctx.induced_max_tokens;
  p.top_logprobs = ctx.run_params.top_logprobs;
  const std::uint64_t word =
      stable_hash64({std::to_string(ctx.seed), q.id, "dynasor", std::to_string(index)});
  p.seed = static_cast<std::int64_t>(word & 0x7fffffffULL);
  return p;
}

std::vector<CompletionRequest> dynasor_requests(const QuestionRecord& q, const ScorerContext& ctx) {
  if (ctx.dynasor_samples < 1) throw InvalidArgument("dynasor_samples must be >= 1");
  const std::string prompt = render_prompt(PromptKind::kDynasorProbe, q, ctx.markers, ctx.thought);
  std::vector<CompletionRequest> out;
  for (int i = 0; i < ctx.dynasor_samples; ++i) {
    out.push_back({prompt, dynasor_params(ctx, q, i), Role::kReasoner,
                   static_cast<std::uint64_t>(i), q.id, "dynasor_probe"});
  }
  return out;
}

namespace {

CompletionBackend& need_backend(const ScorerContext& ctx) {
  if (!ctx.backend) throw InvalidArgument("scorer context has no backend");
  return *ctx.backend;
}

Completion call(const ScorerContext& ctx, const QuestionRecord& q, PromptKind kind,
                SamplingParams params, Role role, std::string_view purpose) {
  CompletionRequest req;
  req.prompt = render_prompt(kind, q, ctx.markers, ctx.thought);
  req.params = std::move(params);
  req.role = role;
  req.question_id = q.id;
  req.purpose = purpose;
  return need_backend(ctx).complete(req);
}

constexpr std::array<std::string_view, 10> kConfidenceLabels = {
    "Almost no chance", "Highly unlikely",  "Chances are slight", "Unlikely",
    "Less than even",   "Better than even", "Likely",             "Very good chance",
    "Highly likely",    "Almost certain",
};

std::vector<std::size_t> token_offsets(const std::vector<TokenInfo>& tokens, std::string& text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(tokens.size() + 1);
  text.clear();
  for (const TokenInfo& t : tokens) {
    offsets.push_back(text.size());
    text += t.text;
  }
  offsets.push_back(text.size());
  return offsets;
}

}  // namespace

TokenRange induced_answer_tokens(const std::vector<TokenInfo>& tokens, bool inside_box) {
  std::string text;
  const auto offsets = token_offsets(tokens, text);
  std::size_t begin = 0, end = text.size();
  if (inside_box) {
    if (auto body = read_open_boxed(text)) end = body->size();
  } else {
    constexpr std::string_view kOpen = "\\boxed{";
    const std::size_t open = text.rfind(kOpen);
    if (open != std::string::npos) {
      begin = open + kOpen.size();
      if (auto body = read_open_boxed(std::string_view(text).substr(begin))) {
        end = begin + body->size();
      }
    }
  }
  TokenRange range{tokens.size(), tokens.size()};
  if (begin >= end) return {0, 0};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool overlaps = offsets[i + 1] > begin && offsets[i] < end;
    if (overlaps && range.first == tokens.size()) range.first = i;
    if (overlaps) range.last = i + 1;
  }
  if (range.first == tokens.size()) return {0, 0};
  return range;
}

double geometric_mean_confidence(std::span<const double> max_logprobs) {
  if (max_logprobs.empty()) return 0.0;
  double sum = 0.0;
  for (double lp : max_logprobs) sum += std::min(lp, 0.0);
  return std::exp(sum / static_cast<double>(max_logprobs.size()));
}

double mean_surprisal_term(std::span<const double> realized_logprobs) {
  if (realized_logprobs.empty()) return kEntropyCeiling;
  double sum = 0.0;
  for (double lp : realized_logprobs) {
    const double clamped = std::min(lp, 0.0);
    const double p = std::exp(clamped);
    // -p log2 p, written with the natural log to stay exact at p = 1.
    sum += -p * clamped / std::numbers::ln2;
  }
  const double mean = sum / static_cast<double>(realized_logprobs.size());
  return std::clamp(mean, 0.0, kEntropyCeiling);
}

std::vector<int> agreement_classes(std::span<const std::optional<std::string>> answers,
                                   AnswerType type) {
  std::vector<int> sizes;
  std::vector<std::optional<std::size_t>> representative;  // nullopt for singleton failures
  for (std::size_t i = 0; i < answers.size(); ++i) {
    bool placed = false;
    if (answers[i]) {
      for (std::size_t c = 0; c < sizes.size(); ++c) {
        if (representative[c] &&
            answers_equivalent(*answers[*representative[c]], *answers[i], type)) {
          ++sizes[c];
          placed = true;
          break;
        }
      }
    }
    if (!placed) {
      sizes.push_back(1);
      representative.push_back(answers[i] ? std::optional<std::size_t>(i) : std::nullopt);
    }
  }
  return sizes;
}

double max_agreement_ratio(std::span<const std::optional<std::string>> answers, AnswerType type) {
  if (answers.empty()) throw InvalidArgument("no trial answers");
  const auto sizes = agreement_classes(answers, type);
  const int largest = *std::max_element(sizes.begin(), sizes.end());
  return static_cast<double>(largest) / static_cast<double>(answers.size());
}

ScoreValue score_flashthink(const QuestionRecord& q, const ScorerContext& ctx) {
  const Completion c = call(ctx, q, PromptKind::kFlashThinkVerifier,
                            induced_params(ctx.run_params, ctx.verdict_max_tokens),
                            Role::kVerifier, "flashthink");
  ScoreValue s{ScorerKind::kFlashThink, 0.0, Orientation::kHigherExits, json::object()};
  s.aux["reply"] = c.text;
  std::string word;
  auto it = std::find_if(c.text.begin(), c.text.end(),
                         [](unsigned char ch) { return std::isalpha(ch) != 0; });
  for (; it != c.text.end() && std::isalpha(static_cast<unsigned char>(*it)); ++it) {
    word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(*it))));
  }
  if (word == "yes") {
    s.value = 1.0;
  } else if (word != "no") {
    s.aux["parse_failed"] = true;
  }
  return s;
}

ScoreValue score_promptconf(const QuestionRecord& q, const ScorerContext& ctx) {
  const Completion c = call(ctx, q, PromptKind::kPromptConf,
                            induced_params(ctx.run_params, ctx.verdict_max_tokens),
                            Role::kReasoner, "promptconf");
  ScoreValue s{ScorerKind::kPromptConf, 0.0, Orientation::kHigherExits, json::object()};
  s.aux["continuation"] = c.text;
  if (c.text.empty() || !std::isdigit(static_cast<unsigned char>(c.text.front()))) {
    s.aux["parse_failed"] = true;
    return s;
  }
  const int bin = c.text.front() - '0';
  s.value = bin / 10.0;
  s.aux["bin"] = bin;
  s.aux["label"] = std::string(kConfidenceLabels[static_cast<std::size_t>(bin)]);
  return s;
}

ScoreValue score_dynasor(const QuestionRecord& q, const ScorerContext& ctx) {
  std::vector<std::optional<std::string>> answers;
  json trials = json::array();
  for (const CompletionRequest& req : dynasor_requests(q, ctx)) {
    const Completion c = need_backend(ctx).complete(req);
    auto answer = read_open_boxed(c.text);
    if (answer && answer->find_first_not_of(" \t\n") == std::string::npos) answer.reset();
    trials.push_back(answer ? json(*answer) : json(nullptr));
    answers.push_back(std::move(answer));
  }
  ScoreValue s{ScorerKind::kDynasor, max_agreement_ratio(answers, q.answer_type),
               Orientation::kHigherExits, json::object()};
  s.aux["trial_answers"] = std::move(trials);
  if (std::none_of(answers.begin(), answers.end(), [](const auto& a) { return a.has_value(); })) {
    s.aux["all_unparsed"] = true;
  }
  return s;
}

ScoreValue score_prejudge(const QuestionRecord& q, const ScorerContext& ctx) {
  const Completion c = call(ctx, q, PromptKind::kPreJudge,
                            induced_params(ctx.run_params, ctx.verdict_max_tokens),
                            Role::kReasoner, "prejudge");
  ScoreValue s{ScorerKind::kPreJudge, 0.0, Orientation::kHigherExits, json::object()};
  s.aux["continuation"] = c.text;
  std::string lower = c.text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  const auto t = lower.find("true");
  const auto f = lower.find("false");
  if (t == std::string::npos && f == std::string::npos) {
    s.aux["parse_failed"] = true;
  } else if (f < t) {
    s.value = 1.0;  // no slow thinking required: exit to NoThinking
  }
  return s;
}

ScoreValue score_probeconf(const QuestionRecord& q, const ScorerContext& ctx) {
  if (!ctx.hidden_states || !ctx.probe) {
    throw MissingFeature("probeconf needs a hidden-state store and probe weights");
  }
  const std::vector<double>* record = ctx.hidden_states->find(q.id);
  if (!record) throw MissingFeature("no hidden-state record for question '" + q.id + "'");
  ScoreValue s{ScorerKind::kProbeConf, mlp_forward(*ctx.probe, *record),
               Orientation::kHigherExits, json::object()};
  s.aux["dim"] = record->size();
  return s;
}

ScoreValue score_deer(const QuestionRecord& q, const ScorerContext& ctx) {
  const Completion c = call(ctx, q, PromptKind::kDeerInduce,
                            induced_params(ctx.run_params, ctx.induced_max_tokens),
                            Role::kReasoner, "deer");
  ScoreValue s{ScorerKind::kDeer, 0.0, Orientation::kHigherExits, json::object()};
  const TokenRange range = induced_answer_tokens(c.tokens, true);
  s.aux["trial_answer"] = read_open_boxed(c.text).value_or(c.text);
  if (range.size() == 0) {
    s.aux["empty_answer"] = true;
    return s;
  }
  std::vector<double> max_lps;
  json probs = json::array();
  for (std::size_t i = range.first; i < range.last; ++i) {
    max_lps.push_back(c.tokens[i].max_logprob());
    probs.push_back(std::exp(std::min(0.0, max_lps.back())));
  }
  s.value = geometric_mean_confidence(max_lps);
  s.aux["token_max_probs"] = std::move(probs);
  return s;
}

ScoreValue score_entropy(const QuestionRecord& q, const ScorerContext& ctx) {
  const Completion c = call(ctx, q, PromptKind::kEntropyContext,
                            induced_params(ctx.run_params, ctx.induced_max_tokens),
                            Role::kReasoner, "entropy");
  ScoreValue s{ScorerKind::kEntropy, kEntropyCeiling, Orientation::kLowerExits, json::object()};
  const TokenRange range = induced_answer_tokens(c.tokens, false);
  s.aux["trial_answer"] = extract_boxed(c.text).value_or(c.text);
  if (range.size() == 0) {
    s.aux["empty_answer"] = true;
    return s;
  }
  std::vector<double> lps;
  json terms = json::array();
  for (std::size_t i = range.first; i < range.last; ++i) {
    lps.push_back(c.tokens[i].logprob);
    const double p = std::exp(std::min(0.0, c.tokens[i].logprob));
    terms.push_back(p * -std::min(0.0, c.tokens[i].logprob) / std::numbers::ln2);
  }
  s.value = mean_surprisal_term(lps);
  s.aux["token_terms"] = std::move(terms);
  return s;
}

double random_draw(std::string_view question_id, std::int64_t seed) {
  return unit_interval(stable_hash64({"random", std::to_string(seed), question_id}));
}

ScoreValue score_random(const QuestionRecord& q, double p_exit, std::int64_t seed) {
  const double u = random_draw(q.id, seed);
  ScoreValue s{ScorerKind::kRandom, u < p_exit ? 1.0 : 0.0, Orientation::kHigherExits,
               json::object()};
  s.aux["u"] = u;
  s.aux["p_exit"] = p_exit;
  return s;
}

ScoreValue score(ScorerKind kind, const QuestionRecord& q, const ScorerContext& ctx) {
  switch (kind) {
    case ScorerKind::kFlashThink: return score_flashthink(q, ctx);
    case ScorerKind::kPromptConf: return score_promptconf(q, ctx);
    case ScorerKind::kDynasor: return score_dynasor(q, ctx);
    case ScorerKind::kPreJudge: return score_prejudge(q, ctx);
    case ScorerKind::kProbeConf: return score_probeconf(q, ctx);
    case ScorerKind::kDeer: return score_deer(q, ctx);
    case ScorerKind::kEntropy: return score_entropy(q, ctx);
    case ScorerKind::kRandom: return score_random(q, ctx.random_p_exit, ctx.seed);
  }
  throw InvalidArgument("unknown scorer kind");
}

Decision decide(const ScoreValue& score, double lambda, double alpha) {
  if (score.orientation == Orientation::kHigherExits) return {score.value > lambda};
  return {score.value <= alpha * kEntropyCeiling};
}

}  // namespace modegate
