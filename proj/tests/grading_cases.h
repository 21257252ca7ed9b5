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

#include <optional>
#include <string>
#include <vector>

#include "modegate/question.h"

namespace modegate::testing {

struct ExtractionCase {
  std::string text;
  std::optional<std::string> expected;
};

struct EquivalenceCase {
  std::string a;
  std::string b;
  AnswerType type;
  bool expected;
};

// Hand-labeled boxed-answer extraction cases.
inline std::vector<ExtractionCase> extraction_cases() {
  return {
      {"The final answer is \\boxed{42}.", "42"},
      {"\\boxed{\\frac{1}{2}}", "\\frac{1}{2}"},
      {"\\boxed{3} ... so \\boxed{5}", "5"},
      {"no box here", std::nullopt},
      {"\\boxed{x^{2}+\\sqrt{y_{1}}}", "x^{2}+\\sqrt{y_{1}}"},
      {"\\boxed{1} then \\boxed{2", std::nullopt},
      {"\\boxed{\\{1,2\\}}", "\\{1,2\\}"},
      {"}}}\\boxed{7}}}", "7"},
      {"\\boxed{}", ""},
      {"\\boxed{ 12 }", " 12 "},
      {"$\\boxed{\\text{(B)}}$", "\\text{(B)}"},
      {"\\boxed{a}\\boxed{b}\\boxed{c}", "c"},
      {"\\boxed{", std::nullopt},
      {"\\boxed{\\frac{a}{b}", std::nullopt},
      {"\\boxed{{{}}}", "{{}}"},
      {"\\boxed{\\}}", "\\}"},
      {"\\boxed{\\{}", "\\{"},
      {"\\boxed{5} and \\boxed{\\frac{1}{\\boxed{2}}}", "2"},
  };
}

// Hand-labeled equivalence cases; each is checked in both argument orders.
inline std::vector<EquivalenceCase> equivalence_cases() {
  const AnswerType N = AnswerType::kNumeric, O = AnswerType::kOption, S = AnswerType::kString;
  return {
      {"0.5", "\\frac{1}{2}", N, true},
      {"42", "42.0", N, true},
      {"1/3", "\\frac{1}{3}", N, true},
      {"\\dfrac{2}{4}", "0.5", N, true},
      {"-\\frac{3}{4}", "-0.75", N, true},
      {"1,000", "1000", N, true},
      {"50\\%", "50", N, true},
      {"$12$", "12", N, true},
      {"\\text{5}", "5", N, true},
      {"x = 5", "5", N, true},
      {"90^\\circ", "90", N, true},
      {"0.1", "\\frac{1}{10}", N, true},
      {"1e-7", "0.0000001", N, true},
      {"-5", "-5.00", N, true},
      {"+7", "7", N, true},
      {"\\frac12", "0.5", N, true},
      {"\\tfrac{3}{6}", "1/2", N, true},
      {"{7}", "7", N, true},
      {"3.14159", "3.14", N, false},
      {"1/3", "0.333333", N, false},
      {"2", "3", N, false},
      {"\\frac{1}{0}", "0", N, false},
      {"abc", "abc", N, false},
      {"1000000.5", "1000000.6", N, false},
      {"inf", "inf", N, false},
      {"0x10", "16", N, false},
      {"(a)", "A", O, true},
      {"B", "b", O, true},
      {"(C)", "C.", O, true},
      {"\\text{(D)}", "D", O, true},
      {"Ab", "A", O, false},
      {"F", "F", O, false},
      {"A", "B", O, false},
      {" Pentagon ", "pentagon", S, true},
      {"right  triangle", "Right Triangle", S, true},
      {"square", "rectangle", S, false},
  };
}

// Independent property check: the body sits right after the last "\boxed{" and closes there
// with balanced (escape-aware) braces.
inline bool plausible_extraction(const std::string& text, const std::string& body) {
  const auto open = text.rfind("\\boxed{");
  if (open == std::string::npos) return false;
  const std::string expected_prefix = "\\boxed{" + body + "}";
  if (text.compare(open, expected_prefix.size(), expected_prefix) != 0) return false;
  int depth = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\' && i + 1 < body.size() && (body[i + 1] == '{' || body[i + 1] == '}')) {
      ++i;
      continue;
    }
    depth += body[i] == '{' ? 1 : body[i] == '}' ? -1 : 0;
    if (depth < 0) return false;
  }
  return depth == 0;
}

}  // namespace modegate::testing
