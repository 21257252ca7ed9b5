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

#include <doctest.h>

#include <cmath>

#include "modegate/earlyexit.h"
#include "modegate/prompting.h"
#include "test_support.h"

using namespace modegate;
using testing::ScriptedBackend;
using testing::tokens_completion;

namespace {

const QuestionRecord kQ{"e1", "Compute 40 + 2.", "42", AnswerType::kNumeric, "d"};

std::size_t count_of(const std::string& s, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

Completion chunk(std::string text, int tokens, FinishReason fr = FinishReason::kStop) {
  Completion c;
  c.text = std::move(text);
  c.n_tokens = tokens;
  c.finish_reason = fr;
  return c;
}

// Reasoner that writes "Step k." paragraphs and whose DEER confidence follows `conf` by the
// number of paragraphs already visible in the monitored thought.
struct Scripted {
  std::vector<double> conf;
  int generated_tokens = 0;
  int fail_on_chunk = -1;
  int chunks = 0;
  std::unique_ptr<ScriptedBackend> backend;

  Scripted() {
    backend = std::make_unique<ScriptedBackend>([this](const CompletionRequest& req) {
      if (req.purpose == "deer") {
        const std::string marker = "Step ";
        const std::size_t seen = count_of(req.prompt, marker);
        const double p = conf.at(std::min(std::max<std::size_t>(seen, 1), conf.size()) - 1);
        return tokens_completion({{"42", std::log(p)}, {"}", -0.01}});
      }
      if (req.purpose == "early_exit_chunk") {
        ++chunks;
        if (chunks == fail_on_chunk) throw BackendError("upstream down", false);
        generated_tokens += 7;
        return chunk("Step " + std::to_string(chunks) + ". Some work.", 7);
      }
      generated_tokens += 5;
      return chunk("So the final answer is $\\boxed{42}$.", 5);
    });
  }
};

ScorerContext ctx_for(CompletionBackend& b) {
  ScorerContext ctx;
  ctx.backend = &b;
  ctx.run_params.max_new_tokens = 1000;
  return ctx;
}

}  // namespace

TEST_CASE("paragraph segmentation") {
  ChunkBoundary b;
  const std::string t = "First idea.\n\nSecond idea.\n\n\n\nThird.  \n\n  ";
  const auto spans = segment_chunks(t, {}, b);
  REQUIRE(spans.size() == 3);
  CHECK(t.substr(spans[0].begin, spans[0].end - spans[0].begin) == "First idea.");
  CHECK(t.substr(spans[1].begin, spans[1].end - spans[1].begin) == "Second idea.");
  CHECK(t.substr(spans[2].begin, spans[2].end - spans[2].begin) == "Third.  ");
  CHECK(segment_chunks("", {}, b).empty());
  CHECK(segment_chunks("\n\n\n\n", {}, b).empty());
}

TEST_CASE("wait boundaries split inside a paragraph") {
  ChunkBoundary b;
  b.split_on_wait = true;
  const std::string t = "So x is 3. Wait, check that. Awaiting nothing.\n\nWait here too";
  const auto spans = segment_chunks(t, {}, b);
  REQUIRE(spans.size() == 3);
  CHECK(t.substr(spans[0].begin, spans[0].end - spans[0].begin) == "So x is 3. ");
  CHECK(t.substr(spans[1].begin, spans[1].end - spans[1].begin) ==
        "Wait, check that. Awaiting nothing.");
  CHECK(t.substr(spans[2].begin, spans[2].end - spans[2].begin) == "Wait here too");
  b.split_on_wait = false;
  CHECK(segment_chunks(t, {}, b).size() == 2);
}

TEST_CASE("token interval segmentation and token attachment") {
  std::vector<TokenInfo> toks;
  std::string text;
  for (int i = 0; i < 10; ++i) {
    toks.push_back({"t" + std::to_string(i) + (i == 4 ? "\n\n" : " "), -0.1, {}});
    text += toks.back().text;
  }
  ChunkBoundary b;
  b.strategy = ChunkStrategy::kTokenInterval;
  b.interval_tokens = 4;
  const auto spans = segment_chunks(text, toks, b);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].first_token == 0);
  CHECK(spans[0].last_token == 4);
  CHECK(spans[2].first_token == 8);
  CHECK(spans[2].last_token == 10);
  CHECK(spans[2].end == text.size());

  const auto paras = segment_chunks(text, toks, ChunkBoundary{});
  REQUIRE(paras.size() == 2);
  CHECK(paras[0].first_token == 0);
  CHECK(paras[0].last_token == 5);
  CHECK(paras[1].first_token == 5);
  CHECK(paras[1].last_token == 10);

  b.interval_tokens = 0;
  CHECK_THROWS_AS(segment_chunks(text, toks, b), InvalidArgument);
  CHECK(parse_chunk_strategy("token_interval") == ChunkStrategy::kTokenInterval);
  CHECK_THROWS_AS(parse_chunk_strategy("sentence"), InvalidArgument);
}

TEST_CASE("exits at the first chunk whose confidence clears lambda") {
  Scripted s;
  s.conf = {0.5, 0.9, 0.95};
  const ScorerContext ctx = ctx_for(*s.backend);
  EarlyExitOptions o;
  o.lambda = 0.8;
  const ExitTrace t = run_early_exit(kQ, o, ctx);
  REQUIRE(t.exited_at);
  CHECK(*t.exited_at == 2);
  CHECK(t.chunks_seen == 2);
  REQUIRE(t.per_chunk_scores.size() == 2);
  CHECK(t.per_chunk_scores[0].value == doctest::Approx(0.5));
  CHECK(t.per_chunk_scores[1].value == doctest::Approx(0.9));
  CHECK_FALSE(t.natural_end);
  const std::string suffix = render_early_exit_suffix(ctx.markers);
  CHECK(t.final_text == "Step 1. Some work.\n\nStep 2. Some work.\n\n" + suffix +
                            "So the final answer is $\\boxed{42}$.");
  CHECK(t.total_tokens == s.generated_tokens);
  CHECK(t.total_tokens == 7 + 7 + 5);

  const auto seen = s.backend->seen();
  const std::string prefix = render_prompt(PromptKind::kThinking, kQ, ctx.markers);
  // chunk, deer, chunk, deer, conclusion
  REQUIRE(seen.size() == 5);
  CHECK(seen[0].prompt == prefix);
  CHECK(seen[0].params.stop_sequences == std::vector<std::string>{"\n\n"});
  CHECK(seen[2].prompt == prefix + "Step 1. Some work.\n\n");
  FakeThought thought{"Step 1. Some work.\n\nStep 2. Some work."};
  CHECK(seen[3].prompt == render_prompt(PromptKind::kDeerInduce, kQ, ctx.markers, thought));
  CHECK(seen[4].purpose == "conclusion");
  CHECK(seen[4].prompt == prefix + "Step 1. Some work.\n\nStep 2. Some work.\n\n" + suffix);
  CHECK(seen[4].params.max_new_tokens == 1000 - 14);
}

TEST_CASE("lambda of one never exits and stops at the budget") {
  Scripted s;
  s.conf = {0.99, 0.999, 1.0};
  const ScorerContext ctx = ctx_for(*s.backend);
  EarlyExitOptions o;
  o.lambda = 1.0;
  o.budget = 3;
  const ExitTrace t = run_early_exit(kQ, o, ctx);
  CHECK_FALSE(t.exited_at);
  CHECK(t.chunks_seen == 3);
  CHECK(t.per_chunk_scores.size() == 3);
  CHECK(t.total_tokens == 3 * 7 + 5);
  CHECK(t.total_tokens == s.generated_tokens);
  CHECK(s.backend->seen().back().purpose == "continuation");
}

TEST_CASE("budget zero is zero-step mode selection") {
  for (double p : {0.3, 0.95}) {
    Scripted s;
    s.conf = {p};
    const ScorerContext ctx = ctx_for(*s.backend);
    EarlyExitOptions o;
    o.lambda = 0.8;
    o.budget = 0;
    const ExitTrace t = run_early_exit(kQ, o, ctx);
    REQUIRE(t.zero_step_score);
    // Same score and decision as scoring the fake thought directly.
    Scripted fresh;
    fresh.conf = {p};
    const ScoreValue direct = score(ScorerKind::kDeer, kQ, ctx_for(*fresh.backend));
    CHECK(t.zero_step_score->value == direct.value);
    const bool exit = decide(direct, 0.8, 1.0).exit;
    CHECK(t.exited_at.has_value() == exit);
    if (exit) CHECK(*t.exited_at == 0);
    const auto seen = s.backend->seen();
    REQUIRE(seen.size() == 2);
    CHECK(seen[1].prompt == render_prompt(exit ? PromptKind::kNoThinking : PromptKind::kThinking,
                                          kQ, ctx.markers));
    CHECK(t.total_tokens == 5);
    CHECK(t.chunks_seen == 0);
  }
}

TEST_CASE("natural end of thinking stops monitoring") {
  int calls = 0;
  ScriptedBackend backend([&](const CompletionRequest& req) {
    if (req.purpose == "deer") return tokens_completion({{"4", std::log(0.1)}, {"}", -0.1}});
    ++calls;
    if (calls == 1) return chunk("Think a bit.", 4);
    if (calls == 2) return chunk("Done.\n</think>", 3);
    return chunk("The answer is $\\boxed{4}$.", 6);
  });
  const ScorerContext ctx = ctx_for(backend);
  const ExitTrace t = run_early_exit(kQ, EarlyExitOptions{}, ctx);
  CHECK(t.natural_end);
  CHECK_FALSE(t.exited_at);
  CHECK(t.chunks_seen == 1);
  CHECK(t.total_tokens == 13);
  CHECK(t.final_text == "Think a bit.\n\nDone.\n</think>\n\nThe answer is $\\boxed{4}$.");
}

TEST_CASE("token interval cadence") {
  int chunks = 0;
  ScriptedBackend backend([&](const CompletionRequest& req) {
    if (req.purpose == "deer") return tokens_completion({{"4", std::log(0.2)}, {"}", -0.1}});
    if (req.purpose == "early_exit_chunk") {
      CHECK(req.params.max_new_tokens == 32);
      CHECK(req.params.stop_sequences.empty());
      ++chunks;
      return chunk("abc ", 32, FinishReason::kLength);
    }
    return chunk("end", 2);
  });
  const ScorerContext ctx = ctx_for(backend);
  EarlyExitOptions o;
  o.boundary.strategy = ChunkStrategy::kTokenInterval;
  o.boundary.interval_tokens = 32;
  o.budget = 4;
  const ExitTrace t = run_early_exit(kQ, o, ctx);
  CHECK(chunks == 4);
  CHECK(t.total_tokens == 4 * 32 + 2);
  CHECK(t.final_text == "abc abc abc abc end");
}

TEST_CASE("a backend failure carries the partial trace") {
  Scripted s;
  s.conf = {0.1, 0.1, 0.1, 0.1};
  s.fail_on_chunk = 3;
  const ScorerContext ctx = ctx_for(*s.backend);
  EarlyExitOptions o;
  o.lambda = 0.9;
  try {
    run_early_exit(kQ, o, ctx);
    FAIL("expected a failure");
  } catch (const EarlyExitFailure& e) {
    CHECK(e.partial().chunks_seen == 2);
    CHECK(e.partial().per_chunk_scores.size() == 2);
    CHECK(e.partial().total_tokens == 14);
    CHECK(std::string(e.what()).find("upstream down") != std::string::npos);
  }
}

TEST_CASE("entropy monitors exit on low uncertainty") {
  ScriptedBackend backend([](const CompletionRequest& req) {
    if (req.purpose == "entropy") {
      return tokens_completion({{"\\boxed{", -0.01}, {"7", -1e-6}, {"}", -0.01}});
    }
    return chunk("Step.", 3);
  });
  const ScorerContext ctx = ctx_for(backend);
  EarlyExitOptions o;
  o.scorer = ScorerKind::kEntropy;
  o.alpha = 0.1;
  const ExitTrace t = run_early_exit(kQ, o, ctx);
  REQUIRE(t.exited_at);
  CHECK(*t.exited_at == 1);
}

TEST_CASE("trace json round trip and argument errors") {
  Scripted s;
  s.conf = {0.9};
  const ScorerContext ctx = ctx_for(*s.backend);
  const ExitTrace t = run_early_exit(kQ, EarlyExitOptions{}, ctx);
  const auto j = exit_trace_to_json(kQ.id, t);
  CHECK(j["kind"] == "early_exit");
  const ExitTrace back = exit_trace_from_json(j);
  CHECK(back.exited_at == t.exited_at);
  CHECK(back.final_text == t.final_text);
  CHECK(back.total_tokens == t.total_tokens);
  CHECK(back.per_chunk_scores.size() == t.per_chunk_scores.size());
  CHECK_THROWS_AS(exit_trace_from_json(nlohmann::json{{"kind", "generation"}}), FormatError);

  EarlyExitOptions bad;
  bad.budget = -1;
  CHECK_THROWS_AS(run_early_exit(kQ, bad, ctx), InvalidArgument);
  ScorerContext empty;
  CHECK_THROWS_AS(run_early_exit(kQ, EarlyExitOptions{}, empty), InvalidArgument);
}
