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

#include "modegate/probe.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

namespace {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw FormatError("unknown activation '" + name + "'");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0 ? x : 0.0;
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

}  // namespace

void MlpWeights::validate() const {
  if (layers.empty()) throw InvalidArgument("probe has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const MlpLayer& l = layers[i];
    const std::string where = "layer " + std::to_string(i);
    if (l.in_dim < 1 || l.out_dim < 1) throw InvalidArgument(where + ": dimensions must be positive");
    if (l.weight.size() != static_cast<std::size_t>(l.in_dim) * l.out_dim) {
      throw InvalidArgument(where + ": weight has " + std::to_string(l.weight.size()) +
                            " entries, expected " + std::to_string(l.in_dim * l.out_dim));
    }
    if (l.bias.size() != static_cast<std::size_t>(l.out_dim)) {
      throw InvalidArgument(where + ": bias has " + std::to_string(l.bias.size()) +
                            " entries, expected " + std::to_string(l.out_dim));
    }
    if (i > 0 && layers[i - 1].out_dim != l.in_dim) {
      throw InvalidArgument(where + ": in_dim " + std::to_string(l.in_dim) +
                            " does not match previous out_dim " +
                            std::to_string(layers[i - 1].out_dim));
    }
  }
  if (layers.back().out_dim != 1 || layers.back().activation != Activation::kSigmoid) {
    throw InvalidArgument("final probe layer must be 1-wide with a sigmoid activation");
  }
}

MlpWeights MlpWeights::from_json(const json& j) {
  MlpWeights w;
  try {
    for (const json& l : j.at("layers")) {
      MlpLayer layer;
      layer.in_dim = l.at("in").get<int>();
      layer.out_dim = l.at("out").get<int>();
      layer.weight = l.at("w").get<std::vector<double>>();
      layer.bias = l.at("b").get<std::vector<double>>();
      layer.activation = parse_activation(l.at("act").get<std::string>());
      w.layers.push_back(std::move(layer));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed probe weights: ") + e.what());
  }
  w.validate();
  return w;
}

MlpWeights MlpWeights::from_file(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json MlpWeights::to_json() const {
  json layers_json = json::array();
  for (const MlpLayer& l : layers) {
    layers_json.push_back({{"in", l.in_dim},
                           {"out", l.out_dim},
                           {"w", l.weight},
                           {"b", l.bias},
                           {"act", std::string(activation_name(l.activation))}});
  }
  return {{"layers", std::move(layers_json)}};
}

double mlp_forward(const MlpWeights& weights, std::span<const double> input) {
  if (weights.layers.empty()) throw InvalidArgument("probe has no layers");
  if (static_cast<int>(input.size()) != weights.input_dim()) {
    throw InvalidArgument("probe input dimension mismatch: vector has " +
                          std::to_string(input.size()) + ", first layer expects " +
                          std::to_string(weights.input_dim()));
  }
  std::vector<double> x(input.begin(), input.end());
  std::vector<double> y;
  for (const MlpLayer& l : weights.layers) {
    y.assign(static_cast<std::size_t>(l.out_dim), 0.0);
    for (int o = 0; o < l.out_dim; ++o) {
      const double* row = l.weight.data() + static_cast<std::size_t>(o) * l.in_dim;
      double acc = l.bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in_dim; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = activate(l.activation, acc);
    }
    x.swap(y);
  }
  return x.front();
}

HiddenStateStore HiddenStateStore::from_file(const std::filesystem::path& path) {
  HiddenStateStore store;
  bool header_seen = false;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    const std::string where = path.string() + ":" + std::to_string(number);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!header_seen) {
      if (j.value("version", 0) != 1) throw FormatError(where + ": unsupported version");
      if (j.value("dtype", std::string()) != "f32le") throw FormatError(where + ": dtype must be f32le");
      store.dim_ = j.value("dim", 0);
      if (store.dim_ < 1) throw FormatError(where + ": dim must be positive");
      header_seen = true;
      return;
    }
    const std::string id = j.at("id").get<std::string>();
    const auto bytes = base64_decode(j.at("vec_b64").get<std::string>());
    if (bytes.size() != static_cast<std::size_t>(store.dim_) * 4) {
      throw FormatError(where + ": vector has " + std::to_string(bytes.size() / 4) +
                        " values, header dim is " + std::to_string(store.dim_));
    }
    std::vector<double> vec(static_cast<std::size_t>(store.dim_));
    for (std::size_t i = 0; i < vec.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + 4 * i, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      vec[i] = static_cast<double>(std::bit_cast<float>(bits));
      if (!std::isfinite(vec[i])) throw FormatError(where + ": non-finite value in vector");
    }
    store.add(id, std::move(vec));
  });
  if (!header_seen) throw FormatError(path.string() + ": missing header line");
  return store;
}

void HiddenStateStore::write(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << json{{"version", 1}, {"dim", dim_}, {"dtype", "f32le"}}.dump() << '\n';
  for (const std::string& id : order_) {
    const auto& vec = records_.at(id);
    std::string bytes(vec.size() * 4, '\0');
    for (std::size_t i = 0; i < vec.size(); ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(vec[i]));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(bytes.data() + 4 * i, &bits, 4);
    }
    out << json{{"id", id}, {"vec_b64", base64_encode(bytes)}}.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

void HiddenStateStore::add(std::string id, std::vector<double> vector) {
  if (dim_ == 0) dim_ = static_cast<int>(vector.size());
  if (static_cast<int>(vector.size()) != dim_) {
    throw InvalidArgument("hidden state for '" + id + "' has " + std::to_string(vector.size()) +
                          " values, store dim is " + std::to_string(dim_));
  }
  if (std::any_of(vector.begin(), vector.end(), [](double v) { return !std::isfinite(v); })) {
    throw InvalidArgument("hidden state for '" + id + "' is not finite");
  }
  if (records_.find(id) == records_.end()) order_.push_back(id);
  records_.insert_or_assign(std::move(id), std::move(vector));
}

const std::vector<double>* HiddenStateStore::find(const std::string& id) const {
  auto it = records_.find(id);
  return it == records_.end() ? nullptr : &it->second;
}

}  // namespace modegate
