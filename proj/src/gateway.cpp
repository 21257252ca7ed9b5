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

#include "modegate/gateway.h"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

namespace {

struct RouteFailure : std::runtime_error {
  RouteFailure(const std::string& what, json trace) : std::runtime_error(what), trace(std::move(trace)) {}
  json trace;
};

GatewayResponse error_response(int status, const std::string& message, json trace = nullptr) {
  json body{{"error", message}};
  if (!trace.is_null()) body["trace"] = std::move(trace);
  return {status, std::move(body)};
}

}  // namespace

Gateway::Gateway(RunConfig config, CompletionBackend& backend, ScorerKind scorer, double lambda,
                 double alpha)
    : config_(std::move(config)), backend_(backend), scorer_(scorer), lambda_(lambda), alpha_(alpha) {
  config_.validate();
  if (scorer == ScorerKind::kRandom) throw InvalidArgument("the gateway routes with a monitor scorer");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must lie in [0, 1]");
  inputs_ = load_probe_inputs(config_);
  if (scorer == ScorerKind::kProbeConf && (!inputs_.hidden_states || !inputs_.probe)) {
    throw InvalidArgument("probeconf routing needs hidden_states_path and probe_weights_path");
  }
}

Gateway::~Gateway() { stop(); }

RouteResult Gateway::route(const QuestionRecord& q) const {
  const ScorerContext ctx = make_scorer_context(config_, &backend_, inputs_);
  RouteResult r;
  r.question_id = q.id;
  try {
    r.score = score(scorer_, q, ctx);
  } catch (const std::exception& e) {
    throw RouteFailure(e.what(), {{"question_id", q.id}, {"stage", "score"}});
  }
  r.nothinking = decide(r.score, lambda_, alpha_).exit;
  try {
    r.completion = backend_.complete(primary_request(config_, q, r.nothinking, 0));
  } catch (const std::exception& e) {
    throw RouteFailure(e.what(), {{"question_id", q.id},
                                  {"stage", "generate"},
                                  {"score", score_to_json(q.id, r.score)},
                                  {"mode", r.nothinking ? "nothinking" : "thinking"}});
  }
  return r;
}

GatewayResponse Gateway::handle(const std::string& body) const {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return error_response(400, "request body is not valid JSON");
  if (!j.is_object()) return error_response(400, "request body must be a JSON object");
  auto question = j.find("question");
  if (question == j.end() || !question->is_string() || question->get<std::string>().empty()) {
    return error_response(400, "\"question\" must be a non-empty string");
  }
  QuestionRecord q;
  q.text = question->get<std::string>();
  q.dataset = "gateway";
  q.gold = "";
  if (auto id = j.find("id"); id != j.end()) {
    if (!id->is_string() || id->get<std::string>().empty()) {
      return error_response(400, "\"id\" must be a non-empty string");
    }
    q.id = id->get<std::string>();
  } else {
    q.id = "q-" + sha256_hex(q.text).substr(0, 16);
  }
  if (auto type = j.find("answer_type"); type != j.end()) {
    try {
      q.answer_type = parse_answer_type(type->get<std::string>());
    } catch (const std::exception&) {
      return error_response(400, "unknown answer_type");
    }
  }
  try {
    const RouteResult r = route(q);
    return {200,
            {{"id", r.question_id},
             {"mode", r.nothinking ? "nothinking" : "thinking"},
             {"score", r.score.value},
             {"scorer", std::string(to_string(r.score.scorer))},
             {"completion", r.completion.text},
             {"tokens", r.completion.n_tokens}}};
  } catch (const RouteFailure& e) {
    return error_response(502, e.what(), e.trace);
  }
}

bool Gateway::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->Post("/v1/route", [this](const httplib::Request& req, httplib::Response& res) {
    const GatewayResponse out = handle(req.body);
    res.status = out.status;
    res.set_content(out.body.dump(-1, ' ', false, json::error_handler_t::replace),
                    "application/json");
  });
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) return false;
  port_ = bound;
  return true;
}

void Gateway::listen_after_bind() {
  if (!server_) throw InvalidArgument("bind() first");
  spdlog::info("routing on port {} with {} (lambda {}, alpha {})", port_.load(), to_string(scorer_),
               lambda_, alpha_);
  server_->listen_after_bind();
}

void Gateway::listen(const std::string& host, int port) {
  if (!bind(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  listen_after_bind();
}

void Gateway::stop() {
  if (server_) server_->stop();
}

}  // namespace modegate
