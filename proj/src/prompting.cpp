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

#include "modegate/prompting.h"

#include <spdlog/spdlog.h>

#include "modegate/errors.h"

namespace modegate {

namespace {

// Thought block inside the think markers: "\n\n<text>\n\n", or nothing for the empty block.
std::string thought_block(const FakeThought& fake) {
  if (fake.text.empty()) return {};
  return "\n\n" + fake.text + "\n\n";
}

std::string reasoning_preamble(std::string_view question, const ChatMarkers& m) {
  std::string out = m.bos + m.user_open;
  out += question;
  out += "\n\n";
  out += kStepByStepInstruction;
  out += "\n\n";
  out += m.assistant_open;
  out += m.think_open;
  return out;
}

constexpr std::string_view kFlashThinkInstruction =
    "Based on the following question and thought, please judge whether the thought is "
    "sufficient to support solving the question. Please directly output yes or no instead of "
    "outputting other content.";

constexpr std::string_view kPromptConfInstruction =
    "For the following question, classify your confidence into one of the following classes "
    "based on how likely your answer is to be correct:\n"
    "- \"Almost no chance\" (0.0-0.1)\n"
    "- \"Highly unlikely\" (0.1-0.2)\n"
    "- \"Chances are slight\" (0.2-0.3)\n"
    "- \"Unlikely\" (0.3-0.4)\n"
    "- \"Less than even\" (0.4-0.5)\n"
    "- \"Better than even\" (0.5-0.6)\n"
    "- \"Likely\" (0.6-0.7)\n"
    "- \"Very good chance\" (0.7-0.8)\n"
    "- \"Highly likely\" (0.8-0.9)\n"
    "- \"Almost certain\" (0.9-1.0)\n"
    "Each category reflects the probability that your answer is correct.\n"
    "At the end of your output, format your answer and confidence as\n"
    "Confidence: $SCORE\n"
    "where SCORE is one of the probability ranges of the scores above.\n"
    "Here is the question:\n";

constexpr std::string_view kPreJudgeInstruction =
    "You are a math problem solver. For the following question, determine if it requires slow "
    "thinking or can be solved quickly. You do not need to give me any explanation, just give "
    "me a json with the following keys: require_slow_thinking.\n"
    "For example: {'require_slow_thinking': true}\n"
    "Here is the question:\n";

}  // namespace

void ChatMarkers::validate() const {
  if (think_open.empty() || think_close.empty()) {
    throw InvalidArgument("think_open and think_close must be non-empty");
  }
  if (think_open == think_close) {
    throw InvalidArgument("think_open and think_close must differ");
  }
}

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::kThinking: return "thinking";
    case PromptKind::kNoThinking: return "nothinking";
    case PromptKind::kFlashThinkVerifier: return "flashthink_verifier";
    case PromptKind::kPromptConf: return "promptconf";
    case PromptKind::kDynasorProbe: return "dynasor_probe";
    case PromptKind::kPreJudge: return "prejudge";
    case PromptKind::kProbeConfContext: return "probeconf_context";
    case PromptKind::kDeerInduce: return "deer_induce";
    case PromptKind::kEntropyContext: return "entropy_context";
  }
  throw InvalidArgument("unknown prompt kind " + std::to_string(static_cast<int>(kind)));
}

PromptKind parse_prompt_kind(std::string_view name) {
  for (PromptKind kind : kAllPromptKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown prompt kind '" + std::string(name) + "'");
}

std::string render_prompt(PromptKind kind, std::string_view question, const ChatMarkers& m,
                          const FakeThought& fake) {
  if (question.empty()) throw InvalidArgument("question text is empty");
  if (question.find(m.think_close) != std::string_view::npos) {
    spdlog::warn("question contains the think-close marker '{}'; rendered as-is", m.think_close);
  }

  std::string out;
  switch (kind) {
    case PromptKind::kThinking:
      return reasoning_preamble(question, m);

    case PromptKind::kNoThinking:
    case PromptKind::kProbeConfContext:
      return reasoning_preamble(question, m) + thought_block(fake) + m.think_close;

    case PromptKind::kDynasorProbe:
      out = reasoning_preamble(question, m) + thought_block(fake);
      out += kDynasorAnswerStem;
      return out;

    case PromptKind::kDeerInduce:
      out = reasoning_preamble(question, m) + thought_block(fake) + m.think_close;
      out += "\n\n**Final Answer**\n\n";
      out += kDeerAnswerStem;
      return out;

    case PromptKind::kEntropyContext:
      return reasoning_preamble(question, m) + thought_block(fake);

    case PromptKind::kFlashThinkVerifier:
      out = m.bos + m.user_open + "\n";
      out += kFlashThinkInstruction;
      out += "\n### Question\n";
      out += question;
      out += "\n### Thought\n";
      out += fake.text;
      out += "\n" + m.assistant_open + m.think_open;
      return out;

    case PromptKind::kPromptConf:
      out = m.bos + m.user_open + "\n\n";
      out += kPromptConfInstruction;
      out += question;
      out += "\n\n" + m.assistant_open + m.think_open + "\n" + m.think_close + "\n";
      out += kPromptConfStem;
      return out;

    case PromptKind::kPreJudge:
      out = m.bos + m.user_open + "\n\n";
      out += kPreJudgeInstruction;
      out += question;
      out += "\n\n" + m.assistant_open + m.think_open + "\n" + m.think_close + "\n";
      out += kPreJudgeStem;
      return out;
  }
  throw InvalidArgument("unknown prompt kind " + std::to_string(static_cast<int>(kind)));
}

std::string render_prompt(PromptKind kind, const QuestionRecord& question,
                          const ChatMarkers& markers, const FakeThought& fake) {
  return render_prompt(kind, std::string_view(question.text), markers, fake);
}

std::string render_early_exit_suffix(const ChatMarkers& markers) {
  return markers.think_close + "\n";
}

}  // namespace modegate
