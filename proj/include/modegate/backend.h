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
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

namespace modegate {

// Decoding setup. Defaults follow the evaluated protocol: T = 0.6, 16,384 new tokens, top-20 logprobs.
struct SamplingParams {
  double temperature = 0.6;
  int max_new_tokens = 16384;
  int top_logprobs = 20;
  std::optional<std::int64_t> seed;
  std::vector<std::string> stop_sequences;

  void validate() const;
};

struct TokenInfo {
  std::string text;
  double logprob = 0.0;  // natural log, <= 0
  std::vector<std::pair<std::string, double>> top;  // sorted descending by logprob

  // Probability of the most likely alternative; falls back to the realized token when no
  // alternatives were returned.
  double max_logprob() const { return top.empty() ? logprob : top.front().second; }
};

enum class FinishReason { kStop, kLength, kError };

std::string_view to_string(FinishReason reason);
FinishReason parse_finish_reason(std::string_view name);

struct Completion {
  std::string text;
  std::vector<TokenInfo> tokens;
  int n_tokens = 0;
  FinishReason finish_reason = FinishReason::kStop;
};

enum class Role { kReasoner, kVerifier };

struct CompletionRequest {
  std::string prompt;
  SamplingParams params;
  Role role = Role::kReasoner;
  std::uint64_t sample_index = 0;
  // Bookkeeping only; never part of the request key.
  std::string question_id;
  std::string purpose;
};

// Hex SHA-256 over the canonical JSON of (prompt, params, sample_index). The canonical form is
// the compact, key-sorted, UTF-8 (non-ASCII unescaped) serialization of
//   {"max_new_tokens", "prompt", "sample_index", "seed", "stop", "temperature", "top_logprobs"}
// with seed null when unset.
std::string request_key(std::string_view prompt, const SamplingParams& params,
                        std::uint64_t sample_index);
std::string canonical_request(std::string_view prompt, const SamplingParams& params,
                              std::uint64_t sample_index);

struct UsageCounters {
  std::uint64_t calls = 0;
  std::uint64_t completion_tokens = 0;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;

  UsageCounters usage() const {
    return {calls_.load(std::memory_order_relaxed), tokens_.load(std::memory_order_relaxed)};
  }

 protected:
  void record_usage(const Completion& c) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    tokens_.fetch_add(static_cast<std::uint64_t>(c.n_tokens), std::memory_order_relaxed);
  }

 private:
  std::atomic<std::uint64_t> calls_{0};
  std::atomic<std::uint64_t> tokens_{0};
};

// Fixture line schema:
//   {"key": hex, "text": str, "tokens": [{"t": str, "lp": float, "top": [[str, float], ...]}],
//    "finish": "stop"|"length"}
nlohmann::json fixture_line(const std::string& key, const Completion& completion);
Completion completion_from_fixture(const nlohmann::json& line);

nlohmann::json completion_to_json(const Completion& completion);
Completion completion_from_json(const nlohmann::json& j);

// Pure lookup over a fixture. No network, no clock, no randomness; immutable after load.
class MockBackend final : public CompletionBackend {
 public:
  MockBackend() = default;
  static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& path);

  void add(std::string key, Completion completion);
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }

  // Throws FixtureMiss naming the key. Token lists longer than max_new_tokens are cut with
  // finish_reason = length.
  Completion complete(const CompletionRequest& request) override;

 private:
  std::unordered_map<std::string, Completion> entries_;
};

struct EndpointConfig {
  std::string base_url;
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

// Counting gate on in-flight requests.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(int limit) : available_(limit < 1 ? 1 : limit) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
};

// POST {base_url}/v1/completions against an OpenAI-compatible server. The verifier role may point
// at a different endpoint; when it is unset the reasoner endpoint serves both roles.
class OpenAIBackend final : public CompletionBackend {
 public:
  OpenAIBackend(EndpointConfig reasoner, std::optional<EndpointConfig> verifier,
                int parallelism = 8, RetryPolicy retry = {});

  Completion complete(const CompletionRequest& request) override;

  static nlohmann::json build_request_body(const CompletionRequest& request,
                                           const EndpointConfig& endpoint);
  static Completion parse_response(const nlohmann::json& body, const SamplingParams& params);

 private:
  const EndpointConfig& endpoint_for(Role role) const;

  EndpointConfig reasoner_;
  std::optional<EndpointConfig> verifier_;
  RetryPolicy retry_;
  InFlightLimiter limiter_;
};

}  // namespace modegate
