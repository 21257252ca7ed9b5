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
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace modegate {

enum class Activation { kRelu, kSigmoid, kIdentity };

struct MlpLayer {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weight;  // row-major, out_dim x in_dim
  std::vector<double> bias;    // out_dim
  Activation activation = Activation::kIdentity;
};

// Self-describing probe network. Final layer must be 1-wide with a sigmoid.
struct MlpWeights {
  std::vector<MlpLayer> layers;

  void validate() const;
  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }

  static MlpWeights from_json(const nlohmann::json& j);
  static MlpWeights from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Affine map plus activation per layer; returns the final sigmoid output in [0, 1].
// Throws InvalidArgument naming both dimensions when the input width does not match.
double mlp_forward(const MlpWeights& weights, std::span<const double> input);

// Last-layer hidden states keyed by question id. Immutable after load.
class HiddenStateStore {
 public:
  HiddenStateStore() = default;
  explicit HiddenStateStore(int dim) : dim_(dim) {}

  // JSON Lines: header {"version": 1, "dim": d, "dtype": "f32le"} then
  // {"id": str, "vec_b64": base64 of d little-endian float32 values} per record.
  static HiddenStateStore from_file(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

  void add(std::string id, std::vector<double> vector);
  const std::vector<double>* find(const std::string& id) const;
  int dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }

 private:
  int dim_ = 0;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<double>> records_;
};

}  // namespace modegate
