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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "modegate/backend.h"
#include "modegate/errors.h"
#include "modegate/scorers.h"

namespace modegate {

enum class ChunkStrategy { kParagraph, kTokenInterval };

std::string_view to_string(ChunkStrategy strategy);
ChunkStrategy parse_chunk_strategy(std::string_view name);

struct ChunkBoundary {
  ChunkStrategy strategy = ChunkStrategy::kParagraph;
  int interval_tokens = 64;
  // Also cut before a sentence opening with "Wait". Approximates action transition points.
  bool split_on_wait = false;

  void validate() const;
  // 32, 64 or 128: the monitoring cadences used by Dynasor-style probing.
  bool standard_interval() const;
};

// Byte range [begin, end) of the thought text, plus the token range when tokens were supplied.
struct ChunkSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t first_token = 0;
  std::size_t last_token = 0;
};

// paragraph: split on blank lines, whitespace-only chunks dropped. token_interval: a boundary
// every interval_tokens tokens plus a final partial chunk; byte offsets follow the token texts.
std::vector<ChunkSpan> segment_chunks(std::string_view thought, const std::vector<TokenInfo>& tokens,
                                      const ChunkBoundary& boundary);

struct ExitTrace {
  std::size_t chunks_seen = 0;
  std::vector<ScoreValue> per_chunk_scores;
  std::optional<std::size_t> exited_at;  // 1-based chunk index; 0 for a zero-step exit
  std::optional<ScoreValue> zero_step_score;
  std::string final_text;  // everything generated after the prompt
  std::int64_t total_tokens = 0;
  bool natural_end = false;  // the model closed its own thinking phase
};

nlohmann::json exit_trace_to_json(const std::string& question_id, const ExitTrace& trace);
ExitTrace exit_trace_from_json(const nlohmann::json& j);

struct EarlyExitOptions {
  ScorerKind scorer = ScorerKind::kDeer;
  double lambda = 0.5;
  double alpha = 1.0;
  ChunkBoundary boundary;
  // Maximum number of monitored chunks. 0 runs zero-step Mode Selection on the fake thought.
  int budget = 16;
};

// Carries the partial trace when a backend call fails mid-loop.
class EarlyExitFailure : public BackendError {
 public:
  EarlyExitFailure(const std::string& what, ExitTrace partial)
      : BackendError(what, false), partial_(std::move(partial)) {}
  const ExitTrace& partial() const noexcept { return partial_; }

 private:
  ExitTrace partial_;
};

// Generates the thinking phase chunk by chunk with the accumulated prefix re-sent each time, scoring
// after every chunk. Monitor calls never feed back into the main trace. `ctx.run_params` drives
// the main generation; `ctx.thought` is the fake thought for the zero-step case.
ExitTrace run_early_exit(const QuestionRecord& q, const EarlyExitOptions& options,
                         const ScorerContext& ctx);

}  // namespace modegate
