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
#include <optional>
#include <string>
#include <string_view>

#include "modegate/backend.h"
#include "modegate/question.h"

namespace modegate {

struct BoxedExtraction {
  std::optional<std::string> answer;
  std::string warning;  // set when the last \boxed{ is unbalanced
};

// Contents of the last `\boxed{...}` with balanced-brace matching. Escaped braces (`\{`, `\}`)
// do not count toward the depth.
std::optional<std::string> extract_boxed(std::string_view text);
BoxedExtraction extract_boxed_traced(std::string_view text);

// Reads a boxed body whose opening `\boxed{` is already consumed (induced-answer continuations).
// Returns the text before the matching close brace, or nullopt when it never closes.
std::optional<std::string> read_open_boxed(std::string_view continuation);

// Exact rational p/q with q > 0 in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  friend bool operator==(const Rational&, const Rational&) = default;
};

// Strips presentation noise ($, %, \text{}, commas, \left/\right, spacing macros, whitespace).
std::string normalize_numeric(std::string_view text);
std::optional<Rational> parse_rational(std::string_view normalized);
std::optional<double> parse_real(std::string_view normalized);

bool answers_equivalent(std::string_view a, std::string_view b, AnswerType type);

struct GradedAnswer {
  std::optional<std::string> extracted;
  bool correct = false;
  std::string normalization_trace;
};

GradedAnswer grade_generation(const Completion& completion, const QuestionRecord& question);

}  // namespace modegate
