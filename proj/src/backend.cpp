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

#include "modegate/backend.h"

#include <algorithm>
#include <cmath>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

void SamplingParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("temperature must be a finite value >= 0");
  }
  if (max_new_tokens < 1) throw InvalidArgument("max_new_tokens must be positive");
  if (top_logprobs < 0) throw InvalidArgument("top_logprobs must be >= 0");
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view name) {
  if (name == "stop" || name == "eos") return FinishReason::kStop;
  if (name == "length") return FinishReason::kLength;
  if (name == "error") return FinishReason::kError;
  throw FormatError("unknown finish reason '" + std::string(name) + "'");
}

std::string canonical_request(std::string_view prompt, const SamplingParams& params,
                              std::uint64_t sample_index) {
  json j;
  j["prompt"] = std::string(prompt);
  j["temperature"] = params.temperature;
  j["max_new_tokens"] = params.max_new_tokens;
  j["top_logprobs"] = params.top_logprobs;
  j["seed"] = params.seed ? json(*params.seed) : json(nullptr);
  j["stop"] = params.stop_sequences;
  j["sample_index"] = sample_index;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string request_key(std::string_view prompt, const SamplingParams& params,
                        std::uint64_t sample_index) {
  return sha256_hex(canonical_request(prompt, params, sample_index));
}

namespace {

json tokens_to_json(const std::vector<TokenInfo>& tokens) {
  json arr = json::array();
  for (const TokenInfo& t : tokens) {
    json top = json::array();
    for (const auto& [text, lp] : t.top) top.push_back(json::array({text, lp}));
    arr.push_back({{"t", t.text}, {"lp", t.logprob}, {"top", std::move(top)}});
  }
  return arr;
}

std::vector<TokenInfo> tokens_from_json(const json& arr) {
  std::vector<TokenInfo> out;
  out.reserve(arr.size());
  for (const json& t : arr) {
    TokenInfo info;
    info.text = t.at("t").get<std::string>();
    info.logprob = t.at("lp").get<double>();
    if (info.logprob > 0.0) throw FormatError("token logprob must be <= 0");
    if (auto it = t.find("top"); it != t.end()) {
      for (const json& alt : *it) {
        info.top.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
      }
      std::stable_sort(info.top.begin(), info.top.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
    }
    out.push_back(std::move(info));
  }
  return out;
}

}  // namespace

json completion_to_json(const Completion& c) {
  return {{"text", c.text},
          {"tokens", tokens_to_json(c.tokens)},
          {"n_tokens", c.n_tokens},
          {"finish", std::string(to_string(c.finish_reason))}};
}

Completion completion_from_json(const json& j) {
  Completion c;
  c.text = j.at("text").get<std::string>();
  if (auto it = j.find("tokens"); it != j.end()) c.tokens = tokens_from_json(*it);
  c.n_tokens = j.value("n_tokens", static_cast<int>(c.tokens.size()));
  c.finish_reason = parse_finish_reason(j.value("finish", std::string("stop")));
  return c;
}

json fixture_line(const std::string& key, const Completion& c) {
  return {{"key", key},
          {"text", c.text},
          {"tokens", tokens_to_json(c.tokens)},
          {"finish", std::string(to_string(c.finish_reason))}};
}

Completion completion_from_fixture(const json& line) {
  Completion c;
  c.text = line.at("text").get<std::string>();
  if (auto it = line.find("tokens"); it != line.end()) c.tokens = tokens_from_json(*it);
  c.n_tokens = static_cast<int>(c.tokens.size());
  c.finish_reason = parse_finish_reason(line.value("finish", std::string("stop")));
  return c;
}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  auto backend = std::make_unique<MockBackend>();
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    json j;
    try {
      j = json::parse(line);
      backend->add(j.at("key").get<std::string>(), completion_from_fixture(j));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  });
  return backend;
}

void MockBackend::add(std::string key, Completion completion) {
  entries_.insert_or_assign(std::move(key), std::move(completion));
}

Completion MockBackend::complete(const CompletionRequest& request) {
  const std::string key = request_key(request.prompt, request.params, request.sample_index);
  auto it = entries_.find(key);
  if (it == entries_.end()) throw FixtureMiss(key);
  Completion out = it->second;
  const auto limit = static_cast<std::size_t>(request.params.max_new_tokens);
  if (out.tokens.size() > limit) {
    out.tokens.resize(limit);
    out.text.clear();
    for (const TokenInfo& t : out.tokens) out.text += t.text;
    out.n_tokens = static_cast<int>(limit);
    out.finish_reason = FinishReason::kLength;
  }
  record_usage(out);
  return out;
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

}  // namespace modegate
