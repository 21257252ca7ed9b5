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

#include <httplib.h>

#include <cmath>
#include <thread>

#include "modegate/cache.h"
#include "modegate/errors.h"
#include "modegate/gateway.h"
#include "modegate/harness.h"
#include "modegate/util.h"
#include "test_support.h"

using namespace modegate;
using nlohmann::json;
using testing::data_path;
using testing::ScriptedBackend;
using testing::TempDir;
using testing::tokens_completion;

namespace {

RunConfig fixture_config(const TempDir& dir) {
  RunConfig c;
  c.dataset_path = data_path("questions20.jsonl").string();
  c.backend.mock_fixture = data_path("mock20.jsonl").string();
  c.cache_dir = dir.path().string();
  c.backend.parallelism = 4;
  c.hidden_states_path = data_path("hidden20.jsonl").string();
  c.probe_weights_path = data_path("probe20.json").string();
  return c;
}

std::string body_for(const QuestionRecord& q) {
  return json{{"question", q.text}, {"id", q.id}, {"answer_type", std::string(to_string(q.answer_type))}}
      .dump();
}

Completion plain(std::string text, int n) {
  Completion c;
  c.text = std::move(text);
  c.n_tokens = n;
  return c;
}

}  // namespace

TEST_CASE("routing decisions agree with the batch pipeline") {
  TempDir dir("gw");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto backend = make_backend(c);
  GenerationCache cache(c.cache_dir);
  phase_generate(c, questions, *backend, cache);
  const auto rows = phase_score(c, questions, *backend, cache).rows;

  int compared = 0;
  for (ScorerKind k : c.scorers) {
    for (double lambda : {0.1, 0.5, 0.9}) {
      const Gateway gw(c, *backend, k, lambda, lambda);
      for (const QuestionRecord& q : questions) {
        const auto row = std::find_if(rows.begin(), rows.end(), [&](const ScoreRow& r) {
          return r.question_id == q.id && r.scorer == k;
        });
        REQUIRE(row != rows.end());
        REQUIRE(row->score);
        const bool batch_exit = decide(*row->score, lambda, lambda).exit;
        const GatewayResponse res = gw.handle(body_for(q));
        REQUIRE(res.status == 200);
        CHECK(res.body["mode"] == (batch_exit ? "nothinking" : "thinking"));
        CHECK(res.body["score"].get<double>() == row->score->value);
        const CompletionRequest primary = primary_request(c, q, batch_exit, 0);
        const auto rec = cache.find(request_key(primary.prompt, primary.params, 0));
        REQUIRE(rec);
        CHECK(res.body["completion"] == rec->completion.text);
        CHECK(res.body["tokens"] == rec->completion.n_tokens);
        ++compared;
      }
    }
  }
  CHECK(compared == 7 * 3 * 20);
}

TEST_CASE("malformed requests are rejected before any backend call") {
  TempDir dir("gw400");
  ScriptedBackend backend([](const CompletionRequest&) -> Completion { throw std::logic_error("no calls"); });
  RunConfig c;
  c.cache_dir = dir.path().string();
  const Gateway gw(c, backend, ScorerKind::kDeer, 0.5, 1.0);
  for (const std::string body : {"not json", "[1,2]", "{}", R"({"question": ""})", R"({"question": 3})",
                                 R"({"question": "x", "id": 7})", R"({"question": "x", "id": ""})",
                                 R"({"question": "x", "answer_type": "poem"})"}) {
    const GatewayResponse res = gw.handle(body);
    CHECK(res.status == 400);
    CHECK(res.body.contains("error"));
  }
  CHECK(backend.seen().empty());
}

TEST_CASE("backend failures map to 502 with the trace so far") {
  TempDir dir("gw502");
  RunConfig c;
  c.cache_dir = dir.path().string();
  bool fail_scoring = true;
  ScriptedBackend backend([&](const CompletionRequest& req) {
    if (req.purpose == "deer") {
      if (fail_scoring) throw BackendError("verifier unavailable", false);
      return tokens_completion({{"5", -0.01}, {"}", -0.01}});
    }
    throw BackendError("reasoner unavailable", false);
  });
  const Gateway gw(c, backend, ScorerKind::kDeer, 0.5, 1.0);
  GatewayResponse res = gw.handle(R"({"question": "What is 2+3?"})");
  CHECK(res.status == 502);
  CHECK(res.body["trace"]["stage"] == "score");
  fail_scoring = false;
  res = gw.handle(R"({"question": "What is 2+3?"})");
  CHECK(res.status == 502);
  CHECK(res.body["trace"]["stage"] == "generate");
  CHECK(res.body["trace"]["mode"] == "nothinking");
  CHECK(res.body["trace"]["score"]["value"].get<double>() > 0.5);
  CHECK(res.body["error"].get<std::string>().find("reasoner unavailable") != std::string::npos);
}

TEST_CASE("default ids and deterministic responses") {
  TempDir dir("gwid");
  RunConfig c;
  c.cache_dir = dir.path().string();
  ScriptedBackend backend([](const CompletionRequest& req) {
    if (req.purpose == "deer") return tokens_completion({{"5", std::log(0.3)}, {"}", -0.01}});
    return plain("Thinking... \\boxed{5}", 9);
  });
  const Gateway gw(c, backend, ScorerKind::kDeer, 0.5, 1.0);
  const GatewayResponse a = gw.handle(R"({"question": "What is 2+3?"})");
  const GatewayResponse b = gw.handle(R"({"question": "What is 2+3?"})");
  REQUIRE(a.status == 200);
  CHECK(a.body == b.body);
  CHECK(a.body["id"] == "q-" + sha256_hex("What is 2+3?").substr(0, 16));
  CHECK(a.body["mode"] == "thinking");
  CHECK(a.body["tokens"] == 9);
  CHECK(backend.seen().back().prompt ==
        render_prompt(PromptKind::kThinking, "What is 2+3?", c.markers));
}

TEST_CASE("construction rejects unusable routing setups") {
  TempDir dir("gwbad");
  RunConfig c;
  c.cache_dir = dir.path().string();
  ScriptedBackend backend([](const CompletionRequest&) { return plain("", 0); });
  CHECK_THROWS_AS(Gateway(c, backend, ScorerKind::kRandom, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Gateway(c, backend, ScorerKind::kProbeConf, 0.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Gateway(c, backend, ScorerKind::kDeer, 1.5, 1.0), InvalidArgument);
}

TEST_CASE("serves routing over HTTP") {
  TempDir dir("gwhttp");
  const RunConfig c = fixture_config(dir);
  const auto questions = load_dataset(c.dataset_path);
  const auto backend = make_backend(c);
  Gateway gw(c, *backend, ScorerKind::kPromptConf, 0.5, 1.0);
  REQUIRE(gw.bind("127.0.0.1", 0));
  REQUIRE(gw.bound_port() > 0);
  std::thread server([&] { gw.listen_after_bind(); });

  httplib::Client client("127.0.0.1", gw.bound_port());
  client.set_connection_timeout(5);
  for (const QuestionRecord& q : {questions[0], questions[17]}) {
    const auto res = client.Post("/v1/route", body_for(q), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body) == gw.handle(body_for(q)).body);
  }
  const auto bad = client.Post("/v1/route", "{", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  gw.stop();
  server.join();
}
