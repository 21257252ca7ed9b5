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

#include "modegate/config.h"

#include <algorithm>

#include "modegate/errors.h"
#include "modegate/metrics.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

std::vector<double> RunConfig::default_grid() { return default_lambda_grid(); }

std::vector<double> RunConfig::random_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(k / 10.0);
  return grid;
}

void RunConfig::validate() const {
  sampling.validate();
  markers.validate();
  chunking.validate();
  if (lambda_grid.empty()) throw InvalidArgument("lambda_grid is empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0 && lambda_grid[i] <= 1.0)) {
      throw InvalidArgument("lambda_grid values must lie in [0, 1]");
    }
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
      throw InvalidArgument("lambda_grid must be strictly increasing");
    }
  }
  for (double p : random_p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("random_p_grid values must lie in [0, 1]");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  if (dynasor_samples < 1) throw InvalidArgument("dynasor_samples must be >= 1");
  if (ece_bins < 1) throw InvalidArgument("ece_bins must be >= 1");
  if (samples_per_question < 1) throw InvalidArgument("samples_per_question must be >= 1");
  if (induced_max_tokens < 1 || verdict_max_tokens < 1) {
    throw InvalidArgument("induced/verdict token limits must be >= 1");
  }
  if (backend.parallelism < 1) throw InvalidArgument("backend.parallelism must be >= 1");
  for (ScorerKind k : scorers) {
    if (k == ScorerKind::kRandom) {
      throw InvalidArgument("random is a baseline curve, not a configurable scorer");
    }
  }
}

json RunConfig::to_json() const {
  json scorer_names = json::array();
  for (ScorerKind k : scorers) scorer_names.push_back(std::string(to_string(k)));
  return {
      {"dataset_path", dataset_path},
      {"backend",
       {{"reasoner_url", backend.reasoner_url},
        {"verifier_url", backend.verifier_url},
        {"model", backend.model},
        {"verifier_model", backend.verifier_model},
        {"api_key_env", backend.api_key_env},
        {"verifier_api_key_env", backend.verifier_api_key_env},
        {"parallelism", backend.parallelism},
        {"mock_fixture", backend.mock_fixture}}},
      {"sampling",
       {{"temperature", sampling.temperature},
        {"max_new_tokens", sampling.max_new_tokens},
        {"top_logprobs", sampling.top_logprobs},
        {"seed", sampling.seed ? json(*sampling.seed) : json(nullptr)},
        {"stop", sampling.stop_sequences}}},
      {"scorers", std::move(scorer_names)},
      {"lambda_grid", lambda_grid},
      {"alpha", alpha},
      {"dynasor_samples", dynasor_samples},
      {"ece_bins", ece_bins},
      {"seed", seed},
      {"cache_dir", cache_dir},
      {"markers",
       {{"bos", markers.bos},
        {"user_open", markers.user_open},
        {"assistant_open", markers.assistant_open},
        {"think_open", markers.think_open},
        {"think_close", markers.think_close}}},
      {"chunking",
       {{"strategy", std::string(to_string(chunking.strategy))},
        {"interval_tokens", chunking.interval_tokens},
        {"split_on_wait", chunking.split_on_wait}}},
      {"fake_thought", fake_thought.text},
      {"samples_per_question", samples_per_question},
      {"hidden_states_path", hidden_states_path},
      {"probe_weights_path", probe_weights_path},
      {"induced_max_tokens", induced_max_tokens},
      {"verdict_max_tokens", verdict_max_tokens},
      {"random_p_grid", random_p_grid},
  };
}

namespace {

// Overlays `patch` onto `base`, refusing keys that `base` does not define.
void overlay(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    auto slot = base.find(it.key());
    if (slot == base.end()) throw InvalidArgument("unknown config key '" + path + "'");
    if (slot->is_object()) {
      overlay(*slot, *it, path);
    } else {
      *slot = *it;
    }
  }
}

RunConfig parse_full(const json& j) {
  RunConfig c;
  c.dataset_path = j.at("dataset_path").get<std::string>();
  const json& b = j.at("backend");
  c.backend.reasoner_url = b.at("reasoner_url").get<std::string>();
  c.backend.verifier_url = b.at("verifier_url").get<std::string>();
  c.backend.model = b.at("model").get<std::string>();
  c.backend.verifier_model = b.at("verifier_model").get<std::string>();
  c.backend.api_key_env = b.at("api_key_env").get<std::string>();
  c.backend.verifier_api_key_env = b.at("verifier_api_key_env").get<std::string>();
  c.backend.parallelism = b.at("parallelism").get<int>();
  c.backend.mock_fixture = b.at("mock_fixture").get<std::string>();
  const json& s = j.at("sampling");
  c.sampling.temperature = s.at("temperature").get<double>();
  c.sampling.max_new_tokens = s.at("max_new_tokens").get<int>();
  c.sampling.top_logprobs = s.at("top_logprobs").get<int>();
  if (!s.at("seed").is_null()) c.sampling.seed = s["seed"].get<std::int64_t>();
  c.sampling.stop_sequences = s.at("stop").get<std::vector<std::string>>();
  c.scorers.clear();
  for (const json& name : j.at("scorers")) {
    c.scorers.push_back(parse_scorer_kind(name.get<std::string>()));
  }
  c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  c.alpha = j.at("alpha").get<double>();
  c.dynasor_samples = j.at("dynasor_samples").get<int>();
  c.ece_bins = j.at("ece_bins").get<int>();
  c.seed = j.at("seed").get<std::int64_t>();
  c.cache_dir = j.at("cache_dir").get<std::string>();
  const json& m = j.at("markers");
  c.markers.bos = m.at("bos").get<std::string>();
  c.markers.user_open = m.at("user_open").get<std::string>();
  c.markers.assistant_open = m.at("assistant_open").get<std::string>();
  c.markers.think_open = m.at("think_open").get<std::string>();
  c.markers.think_close = m.at("think_close").get<std::string>();
  const json& ch = j.at("chunking");
  c.chunking.strategy = parse_chunk_strategy(ch.at("strategy").get<std::string>());
  c.chunking.interval_tokens = ch.at("interval_tokens").get<int>();
  c.chunking.split_on_wait = ch.at("split_on_wait").get<bool>();
  c.fake_thought.text = j.at("fake_thought").get<std::string>();
  c.samples_per_question = j.at("samples_per_question").get<int>();
  c.hidden_states_path = j.at("hidden_states_path").get<std::string>();
  c.probe_weights_path = j.at("probe_weights_path").get<std::string>();
  c.induced_max_tokens = j.at("induced_max_tokens").get<int>();
  c.verdict_max_tokens = j.at("verdict_max_tokens").get<int>();
  c.random_p_grid = j.at("random_p_grid").get<std::vector<double>>();
  return c;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  json full = RunConfig{}.to_json();
  overlay(full, j, "");
  RunConfig c;
  try {
    c = parse_full(full);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw FormatError(path.string() + ": not valid JSON");
  return from_json(j);
}

void apply_override(RunConfig& config, std::string_view dotted_path, std::string_view value) {
  json full = config.to_json();
  std::string pointer = "/" + std::string(dotted_path);
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const json::json_pointer ptr(pointer);
  const bool string_slot = full.contains(ptr) && full.at(ptr).is_string();
  json patch = json::parse(value, nullptr, false);
  if (string_slot || patch.is_discarded()) patch = std::string(value);
  std::string path(dotted_path);
  for (std::size_t dot = path.rfind('.'); ; dot = path.rfind('.')) {
    const std::string leaf = dot == std::string::npos ? path : path.substr(dot + 1);
    if (leaf.empty()) throw InvalidArgument("bad config path '" + std::string(dotted_path) + "'");
    patch = json{{leaf, std::move(patch)}};
    if (dot == std::string::npos) break;
    path.resize(dot);
  }
  overlay(full, patch, "");
  config = RunConfig::from_json(full);
}

}  // namespace modegate
