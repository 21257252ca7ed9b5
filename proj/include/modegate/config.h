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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "modegate/backend.h"
#include "modegate/earlyexit.h"
#include "modegate/prompting.h"
#include "modegate/scorers.h"

namespace modegate {

struct BackendConfig {
  std::string reasoner_url;
  std::string verifier_url;  // empty: the reasoner serves verifier calls too
  std::string model;
  std::string verifier_model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string verifier_api_key_env;
  int parallelism = 8;
  std::string mock_fixture;  // when set, requests are answered from this fixture only
};

struct RunConfig {
  std::string dataset_path;
  BackendConfig backend;
  SamplingParams sampling;
  std::vector<ScorerKind> scorers{kMonitorScorers.begin(), kMonitorScorers.end()};
  std::vector<double> lambda_grid = default_grid();
  double alpha = 1.0;
  int dynasor_samples = 3;
  int ece_bins = 10;
  std::int64_t seed = 0;
  std::string cache_dir = "modegate-run";
  ChatMarkers markers;
  ChunkBoundary chunking;
  FakeThought fake_thought;
  int samples_per_question = 1;
  std::string hidden_states_path;
  std::string probe_weights_path;
  int induced_max_tokens = 32;
  int verdict_max_tokens = 16;
  std::vector<double> random_p_grid = random_grid();

  // Throws InvalidArgument describing the first violated constraint.
  void validate() const;

  nlohmann::json to_json() const;
  // Unknown keys are rejected; absent keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);

  static std::vector<double> default_grid();
  static std::vector<double> random_grid();
};

// Sets one field addressed by a dotted path ("sampling.temperature", "backend.mock_fixture").
// The value is read as JSON when it parses, as a plain string otherwise.
void apply_override(RunConfig& config, std::string_view dotted_path, std::string_view value);

}  // namespace modegate
