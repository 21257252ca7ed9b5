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

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "modegate/backend.h"
#include "modegate/errors.h"

namespace modegate {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

SplitUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = base_url.find('/', host_start);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

// Scoped hold on an InFlightLimiter slot.
class SlotGuard {
 public:
  explicit SlotGuard(InFlightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
  ~SlotGuard() { limiter_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  InFlightLimiter& limiter_;
};

}  // namespace

OpenAIBackend::OpenAIBackend(EndpointConfig reasoner, std::optional<EndpointConfig> verifier,
                             int parallelism, RetryPolicy retry)
    : reasoner_(std::move(reasoner)),
      verifier_(std::move(verifier)),
      retry_(retry),
      limiter_(parallelism) {
  if (reasoner_.base_url.empty()) throw InvalidArgument("reasoner base URL is empty");
  if (retry_.attempts < 1) retry_.attempts = 1;
}

const EndpointConfig& OpenAIBackend::endpoint_for(Role role) const {
  if (role == Role::kVerifier && verifier_ && !verifier_->base_url.empty()) return *verifier_;
  return reasoner_;
}

json OpenAIBackend::build_request_body(const CompletionRequest& request,
                                       const EndpointConfig& endpoint) {
  const SamplingParams& p = request.params;
  json body;
  if (!endpoint.model.empty()) body["model"] = endpoint.model;
  body["prompt"] = request.prompt;
  body["temperature"] = p.temperature;
  body["max_tokens"] = p.max_new_tokens;
  if (p.top_logprobs > 0) body["logprobs"] = p.top_logprobs;
  if (p.seed) body["seed"] = *p.seed;
  if (!p.stop_sequences.empty()) body["stop"] = p.stop_sequences;
  return body;
}

Completion OpenAIBackend::parse_response(const json& body, const SamplingParams& params) {
  const json& choices = body.at("choices");
  if (!choices.is_array() || choices.empty()) throw FormatError("response has no choices");
  const json& choice = choices.at(0);

  Completion c;
  c.text = choice.value("text", std::string());
  if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
    const json& toks = lp->at("tokens");
    const json& lps = lp->at("token_logprobs");
    const json* tops = nullptr;
    if (auto it = lp->find("top_logprobs"); it != lp->end() && it->is_array()) tops = &*it;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      TokenInfo info;
      info.text = toks.at(i).get<std::string>();
      info.logprob = lps.at(i).is_null() ? 0.0 : std::min(0.0, lps.at(i).get<double>());
      if (tops && i < tops->size() && tops->at(i).is_object()) {
        for (const auto& [alt, alt_lp] : tops->at(i).items()) {
          if (!alt_lp.is_null()) info.top.emplace_back(alt, std::min(0.0, alt_lp.get<double>()));
        }
        std::stable_sort(info.top.begin(), info.top.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
      }
      c.tokens.push_back(std::move(info));
    }
  }
  if (!c.tokens.empty()) {
    c.n_tokens = static_cast<int>(c.tokens.size());
  } else if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
    c.n_tokens = usage->value("completion_tokens", 0);
  }
  const std::string finish =
      choice.contains("finish_reason") && choice["finish_reason"].is_string()
          ? choice["finish_reason"].get<std::string>()
          : std::string("stop");
  c.finish_reason = finish == "length" ? FinishReason::kLength : FinishReason::kStop;
  if (c.finish_reason == FinishReason::kLength && c.n_tokens > params.max_new_tokens) {
    c.n_tokens = params.max_new_tokens;
  }
  return c;
}

Completion OpenAIBackend::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw InvalidArgument("prompt is empty");
  const EndpointConfig& endpoint = endpoint_for(request.role);
  const SplitUrl url = split_url(endpoint.base_url);
  const std::string body = build_request_body(request, endpoint).dump();

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  SlotGuard slot(limiter_);
  std::string last_error;
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    httplib::Client client(url.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(600);
    auto res = client.Post(url.path_prefix + "/v1/completions", headers, body, "application/json");
    if (res && res->status == 200) {
      try {
        Completion c = parse_response(json::parse(res->body), request.params);
        record_usage(c);
        return c;
      } catch (const std::exception& e) {
        throw BackendError(std::string("malformed completion response: ") + e.what(), false);
      }
    }
    if (res && res->status != 429 && res->status < 500) {
      throw BackendError("completion request rejected with HTTP " + std::to_string(res->status) +
                             ": " + res->body,
                         false);
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    spdlog::warn("completion attempt {}/{} failed: {}", attempt, retry_.attempts, last_error);
    if (attempt < retry_.attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw BackendError("completion failed after " + std::to_string(retry_.attempts) +
                         " attempts: " + last_error,
                     false);
}

}  // namespace modegate
