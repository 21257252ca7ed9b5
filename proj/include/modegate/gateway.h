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

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "modegate/backend.h"
#include "modegate/config.h"
#include "modegate/harness.h"
#include "modegate/scorers.h"

namespace httplib {
class Server;
}

namespace modegate {

struct RouteResult {
  std::string question_id;
  ScoreValue score;
  bool nothinking = false;
  Completion completion;
};

struct GatewayResponse {
  int status = 200;
  nlohmann::json body;
};

// Zero-step router: score the question on the fake thought, decide, then generate under the chosen
// template with the same request the batch pipeline issues for sample 0.
class Gateway {
 public:
  Gateway(RunConfig config, CompletionBackend& backend, ScorerKind scorer, double lambda,
          double alpha);
  ~Gateway();

  // Question ids default to "q-" plus the first 16 hex digits of the question's SHA-256.
  RouteResult route(const QuestionRecord& question) const;

  // Body {"question": str, "id"?: str, "answer_type"?: str}. 400 on malformed input (before
  // any backend call), 502 with the partial trace when the backend fails.
  GatewayResponse handle(const std::string& body) const;

  // Binds and serves POST /v1/route until stop(). Port 0 picks a free port; bound_port() reports it.
  void listen(const std::string& host, int port);
  bool bind(const std::string& host, int port);
  void listen_after_bind();
  int bound_port() const { return port_; }
  void stop();

 private:
  RunConfig config_;
  CompletionBackend& backend_;
  ScorerKind scorer_;
  double lambda_;
  double alpha_;
  ProbeInputs inputs_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<int> port_{0};
};

}  // namespace modegate
