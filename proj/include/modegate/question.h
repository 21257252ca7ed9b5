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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace modegate {

enum class AnswerType { kNumeric, kOption, kString };

std::string_view to_string(AnswerType type);
AnswerType parse_answer_type(std::string_view name);

// One benchmark item.
struct QuestionRecord {
  std::string id;
  std::string text;
  std::string gold;
  AnswerType answer_type = AnswerType::kNumeric;
  std::string dataset;
};

// Reads a JSON Lines dataset with keys id, question, answer, answer_type, dataset.
// Enforces unique ids, non-empty gold, and single-letter A-E gold for option items.
std::vector<QuestionRecord> load_dataset(const std::filesystem::path& path);

}  // namespace modegate
