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

#include "modegate/earlyexit.h"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "modegate/prompting.h"

namespace modegate {

using nlohmann::json;

std::string_view to_string(ChunkStrategy strategy) {
  return strategy == ChunkStrategy::kParagraph ? "paragraph" : "token_interval";
}

ChunkStrategy parse_chunk_strategy(std::string_view name) {
  if (name == "paragraph") return ChunkStrategy::kParagraph;
  if (name == "token_interval") return ChunkStrategy::kTokenInterval;
  throw InvalidArgument("unknown chunk strategy '" + std::string(name) + "'");
}

void ChunkBoundary::validate() const {
  if (strategy == ChunkStrategy::kTokenInterval && interval_tokens < 1) {
    throw InvalidArgument("interval_tokens must be positive");
  }
}

bool ChunkBoundary::standard_interval() const {
  return interval_tokens == 32 || interval_tokens == 64 || interval_tokens == 128;
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::vector<std::size_t> offsets_of(const std::vector<TokenInfo>& tokens) {
  std::vector<std::size_t> offsets{0};
  for (const TokenInfo& t : tokens) offsets.push_back(offsets.back() + t.text.size());
  return offsets;
}

// Cut points inside [begin, end) before each "Wait" that opens a sentence.
void wait_cuts(std::string_view text, std::size_t begin, std::size_t end,
               std::vector<std::size_t>& cuts) {
  for (std::size_t pos = text.find("Wait", begin); pos != std::string_view::npos && pos < end;
       pos = text.find("Wait", pos + 1)) {
    if (pos == begin || (text[pos - 1] != ' ' && text[pos - 1] != '\n')) continue;
    std::size_t prev = pos;
    while (prev > begin && (text[prev - 1] == ' ' || text[prev - 1] == '\n')) --prev;
    const char before = prev == begin ? '.' : text[prev - 1];
    if (before == '.' || before == '?' || before == '!' || text[pos - 1] == '\n') {
      cuts.push_back(pos);
    }
  }
}

void attach_tokens(std::vector<ChunkSpan>& spans, const std::vector<TokenInfo>& tokens) {
  if (tokens.empty()) return;
  const auto offsets = offsets_of(tokens);
  for (ChunkSpan& s : spans) {
    s.first_token = tokens.size();
    s.last_token = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (offsets[i + 1] > s.begin && offsets[i] < s.end) {
        if (s.first_token == tokens.size()) s.first_token = i;
        s.last_token = i + 1;
      }
    }
    if (s.first_token == tokens.size()) s.first_token = s.last_token = 0;
  }
}

}  // namespace

std::vector<ChunkSpan> segment_chunks(std::string_view thought, const std::vector<TokenInfo>& tokens,
                                      const ChunkBoundary& boundary) {
  boundary.validate();
  std::vector<ChunkSpan> spans;
  if (boundary.strategy == ChunkStrategy::kTokenInterval) {
    const auto offsets = offsets_of(tokens);
    const auto step = static_cast<std::size_t>(boundary.interval_tokens);
    for (std::size_t i = 0; i < tokens.size(); i += step) {
      const std::size_t j = std::min(tokens.size(), i + step);
      spans.push_back({offsets[i], offsets[j], i, j});
    }
    return spans;
  }

  std::size_t start = 0;
  while (start <= thought.size()) {
    std::size_t sep = thought.find("\n\n", start);
    const std::size_t end = sep == std::string_view::npos ? thought.size() : sep;
    std::vector<std::size_t> cuts{start};
    if (boundary.split_on_wait) wait_cuts(thought, start, end, cuts);
    cuts.push_back(end);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      if (!blank(thought.substr(cuts[k], cuts[k + 1] - cuts[k]))) {
        spans.push_back({cuts[k], cuts[k + 1], 0, 0});
      }
    }
    if (sep == std::string_view::npos) break;
    start = sep + 2;
  }
  attach_tokens(spans, tokens);
  return spans;
}

json exit_trace_to_json(const std::string& question_id, const ExitTrace& t) {
  json scores = json::array();
  for (const ScoreValue& s : t.per_chunk_scores) scores.push_back(score_to_json(question_id, s));
  json j{{"kind", "early_exit"},
         {"id", question_id},
         {"chunks_seen", t.chunks_seen},
         {"per_chunk_scores", std::move(scores)},
         {"exited_at", t.exited_at ? json(*t.exited_at) : json(nullptr)},
         {"zero_step_score",
          t.zero_step_score ? score_to_json(question_id, *t.zero_step_score) : json(nullptr)},
         {"final_text", t.final_text},
         {"total_tokens", t.total_tokens},
         {"natural_end", t.natural_end}};
  return j;
}

ExitTrace exit_trace_from_json(const json& j) {
  if (j.value("kind", std::string()) != "early_exit") throw FormatError("not an early_exit record");
  ExitTrace t;
  t.chunks_seen = j.at("chunks_seen").get<std::size_t>();
  for (const json& s : j.at("per_chunk_scores")) t.per_chunk_scores.push_back(score_from_json(s));
  if (!j.at("exited_at").is_null()) t.exited_at = j.at("exited_at").get<std::size_t>();
  if (!j.at("zero_step_score").is_null()) t.zero_step_score = score_from_json(j["zero_step_score"]);
  t.final_text = j.at("final_text").get<std::string>();
  t.total_tokens = j.at("total_tokens").get<std::int64_t>();
  t.natural_end = j.value("natural_end", false);
  return t;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class Loop {
 public:
  Loop(const QuestionRecord& q, const EarlyExitOptions& o, const ScorerContext& ctx)
      : q_(q), o_(o), ctx_(ctx) {}

  ExitTrace run() {
    try {
      return o_.budget == 0 ? zero_step() : chunked();
    } catch (const EarlyExitFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw EarlyExitFailure(e.what(), trace_);
    }
  }

 private:
  Completion call(const std::string& prompt, SamplingParams params, std::string_view purpose) {
    CompletionRequest req;
    req.prompt = prompt;
    req.params = std::move(params);
    req.question_id = q_.id;
    req.purpose = purpose;
    Completion c = ctx_.backend->complete(req);
    if (c.finish_reason == FinishReason::kError) throw BackendError("generation errored", false);
    return c;
  }

  std::int64_t remaining() const {
    return static_cast<std::int64_t>(ctx_.run_params.max_new_tokens) - trace_.total_tokens;
  }

  SamplingParams tail_params() const {
    SamplingParams p = ctx_.run_params;
    p.max_new_tokens = static_cast<int>(std::max<std::int64_t>(remaining(), 1));
    return p;
  }

  void append(const Completion& c) {
    trace_.final_text += c.text;
    trace_.total_tokens += c.n_tokens;
  }

  ExitTrace zero_step() {
    const ScoreValue s = score(o_.scorer, q_, ctx_);
    trace_.zero_step_score = s;
    const bool exit = decide(s, o_.lambda, o_.alpha).exit;
    const PromptKind kind = exit ? PromptKind::kNoThinking : PromptKind::kThinking;
    if (exit) trace_.exited_at = 0;
    append(call(render_prompt(kind, q_, ctx_.markers, ctx_.thought), ctx_.run_params,
                exit ? "nothinking" : "thinking"));
    trace_.natural_end = !exit;
    return trace_;
  }

  ExitTrace chunked() {
    const std::string prefix = render_prompt(PromptKind::kThinking, q_, ctx_.markers);
    const std::string& close = ctx_.markers.think_close;
    const bool paragraph = o_.boundary.strategy == ChunkStrategy::kParagraph;
    for (int i = 1; i <= o_.budget && remaining() > 0; ++i) {
      SamplingParams p = ctx_.run_params;
      if (paragraph) {
        p.stop_sequences.push_back("\n\n");
        p.max_new_tokens = static_cast<int>(remaining());
      } else {
        p.max_new_tokens =
            static_cast<int>(std::min<std::int64_t>(o_.boundary.interval_tokens, remaining()));
      }
      const Completion c = call(prefix + trace_.final_text, p, "early_exit_chunk");
      append(c);
      if (trace_.final_text.find(close) != std::string::npos) {
        trace_.natural_end = true;
        // The thinking phase closed inside this chunk; let the conclusion run to the end.
        if (paragraph && c.finish_reason == FinishReason::kStop && remaining() > 0) {
          trace_.final_text += "\n\n";
          append(call(prefix + trace_.final_text, tail_params(), "conclusion"));
        }
        return trace_;
      }
      const bool ended = c.finish_reason == FinishReason::kStop && (!paragraph || c.text.empty());
      if (ended) {
        trace_.natural_end = true;
        return trace_;
      }
      if (paragraph && c.finish_reason == FinishReason::kStop) trace_.final_text += "\n\n";

      trace_.chunks_seen = static_cast<std::size_t>(i);
      ScorerContext monitor = ctx_;
      monitor.thought.text = trim(trace_.final_text);
      const ScoreValue s = score(o_.scorer, q_, monitor);
      trace_.per_chunk_scores.push_back(s);
      if (decide(s, o_.lambda, o_.alpha).exit) {
        trace_.exited_at = static_cast<std::size_t>(i);
        trace_.final_text += render_early_exit_suffix(ctx_.markers);
        if (remaining() > 0) append(call(prefix + trace_.final_text, tail_params(), "conclusion"));
        return trace_;
      }
    }
    // Budget spent without an exit: finish the run without further monitoring.
    if (remaining() > 0) append(call(prefix + trace_.final_text, tail_params(), "continuation"));
    trace_.natural_end = trace_.final_text.find(close) != std::string::npos;
    return trace_;
  }

  const QuestionRecord& q_;
  const EarlyExitOptions& o_;
  const ScorerContext& ctx_;
  ExitTrace trace_;
};

}  // namespace

ExitTrace run_early_exit(const QuestionRecord& q, const EarlyExitOptions& options,
                         const ScorerContext& ctx) {
  if (!ctx.backend) throw InvalidArgument("early exit needs a backend");
  if (options.budget < 0) throw InvalidArgument("budget must be >= 0");
  options.boundary.validate();
  if (options.boundary.strategy == ChunkStrategy::kTokenInterval &&
      !options.boundary.standard_interval()) {
    spdlog::warn("interval of {} tokens is outside the usual 32/64/128 cadence",
                 options.boundary.interval_tokens);
  }
  return Loop(q, options, ctx).run();
}

}  // namespace modegate
