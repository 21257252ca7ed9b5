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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "modegate/backend.h"
#include "modegate/probe.h"
#include "modegate/prompting.h"
#include "modegate/question.h"

namespace modegate {

// Deterministic stand-in for a reasoning model, used to produce mock fixtures and to exercise the
// pipeline offline. Each question gets a latent ease in [0, 1); NoThinking answers correctly when
// ease > 0.45, a full Thinking run when ease > 0.1, and monitors see confidences that track ease and
// reasoning progress. Prompts are recognized by their rendered shape; stop sequences and
// max_new_tokens are honored.
class SyntheticBackend final : public CompletionBackend {
 public:
  SyntheticBackend(std::vector<QuestionRecord> questions, ChatMarkers markers = {},
                   std::int64_t seed = 7);

  Completion complete(const CompletionRequest& request) override;

  double ease(const QuestionRecord& q) const;
  // Generated text of an uninterrupted Thinking run, starting right after the think-open marker.
  std::string full_thinking(const QuestionRecord& q) const;
  std::size_t paragraph_count(const QuestionRecord& q) const;

 private:
  const QuestionRecord* find_question(std::string_view prompt) const;
  std::string answer_for(const QuestionRecord& q, bool correct, std::uint64_t variant) const;
  double progress(const QuestionRecord& q, std::string_view text) const;
  Completion respond(const QuestionRecord& q, std::string_view text, std::string_view stream,
                     const CompletionRequest& request, double answer_confidence) const;

  std::vector<QuestionRecord> questions_;
  ChatMarkers markers_;
  std::int64_t seed_;
};

// Splits text into pseudo-tokens: words with their leading space, braces and "$" on their own,
// and newline runs kept separate so "\n\n" never straddles two tokens.
std::vector<std::string> pseudo_tokens(std::string_view text);

// Wraps another backend and remembers every request key and completion, for writing a fixture.
class RecordingBackend final : public CompletionBackend {
 public:
  explicit RecordingBackend(CompletionBackend& inner) : inner_(inner) {}

  Completion complete(const CompletionRequest& request) override;
  std::size_t size() const;
  // Fixture lines sorted by key.
  void write_fixture(const std::filesystem::path& path) const;

 private:
  CompletionBackend& inner_;
  mutable std::mutex mu_;
  std::map<std::string, Completion> entries_;
};

// `n` arithmetic questions (every fifth asks for a reduced fraction) in dataset `dataset`.
std::vector<QuestionRecord> synthetic_questions(std::size_t n, const std::string& dataset,
                                                std::int64_t seed);
std::string dataset_jsonl(const std::vector<QuestionRecord>& questions);

// Hidden states whose first coordinate tracks the synthetic ease, plus a small probe reading it.
std::pair<HiddenStateStore, MlpWeights> synthetic_probe_inputs(
    const std::vector<QuestionRecord>& questions, const SyntheticBackend& backend, int dim = 8);

}  // namespace modegate
