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

#include <array>
#include <string>
#include <string_view>

#include "modegate/question.h"

namespace modegate {

// Chat-format markers for one model family. Defaults are the DeepSeek-R1-Distill format.
struct ChatMarkers {
  std::string bos = "<\xEF\xBD\x9C" "begin\xE2\x96\x81of\xE2\x96\x81sentence\xEF\xBD\x9C>";
  std::string user_open = "<\xEF\xBD\x9CUser\xEF\xBD\x9C>";
  std::string assistant_open = "<\xEF\xBD\x9C" "Assistant\xEF\xBD\x9C>";
  std::string think_open = "<think>";
  std::string think_close = "</think>";

  // Throws InvalidArgument unless both think markers are non-empty and distinct.
  void validate() const;
};

enum class PromptKind {
  kThinking,
  kNoThinking,
  kFlashThinkVerifier,
  kPromptConf,
  kDynasorProbe,
  kPreJudge,
  kProbeConfContext,
  kDeerInduce,
  kEntropyContext,
};

inline constexpr std::array<PromptKind, 9> kAllPromptKinds = {
    PromptKind::kThinking,         PromptKind::kNoThinking,   PromptKind::kFlashThinkVerifier,
    PromptKind::kPromptConf,       PromptKind::kDynasorProbe, PromptKind::kPreJudge,
    PromptKind::kProbeConfContext, PromptKind::kDeerInduce,   PromptKind::kEntropyContext,
};

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view name);

// The thought placed between the think markers when no reasoning is generated.
// An empty text renders the empty block `<think></think>`.
struct FakeThought {
  std::string text = "Okay, I think I have finished thinking.";
};

inline constexpr std::string_view kStepByStepInstruction =
    "Please reason step by step, and put your final answer within \\boxed{}.";
inline constexpr std::string_view kDeerAnswerStem = "The final answer is \\boxed{";
inline constexpr std::string_view kDynasorAnswerStem =
    "Oh, I suddenly got the answer to the whole problem, Final Answer: \\boxed{";
inline constexpr std::string_view kPromptConfStem = "Confidence: 0.";
inline constexpr std::string_view kPreJudgeStem = "{'require_slow_thinking':";

// Renders the full input string for `kind`. Pure; the question text is inserted verbatim.
// Logs a warning when the question itself contains the think-close marker.
std::string render_prompt(PromptKind kind, std::string_view question, const ChatMarkers& markers,
                          const FakeThought& fake = {});
std::string render_prompt(PromptKind kind, const QuestionRecord& question,
                          const ChatMarkers& markers, const FakeThought& fake = {});

// Terminator appended to a truncated thought trace to force the conclusion phase.
std::string render_early_exit_suffix(const ChatMarkers& markers);

}  // namespace modegate
