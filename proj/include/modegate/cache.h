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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "modegate/answers.h"
#include "modegate/backend.h"

namespace modegate {

struct CacheRecord {
  std::string key;
  std::string question_id;
  std::string mode;  // "thinking", "nothinking", "dynasor_probe", or a monitor purpose
  std::uint64_t sample_index = 0;
  Completion completion;
  std::optional<GradedAnswer> graded;
  std::string created_at;
  std::string error;  // non-empty for failed requests; such records are never cache hits
};

nlohmann::json cache_record_to_json(const CacheRecord& record);
CacheRecord cache_record_from_json(const nlohmann::json& j);

// Append-only JSON Lines store at <dir>/generations.jsonl. A key that already has a successful
// record is never written again. One writer at a time; lookups may run concurrently.
class GenerationCache {
 public:
  explicit GenerationCache(std::filesystem::path dir);

  const std::filesystem::path& path() const { return path_; }

  std::optional<CacheRecord> find(const std::string& key) const;
  bool contains(const std::string& key) const;

  // Returns false (and writes nothing) when the key already has a successful record.
  bool append(CacheRecord record);

  // Successful records in file order, one per key.
  std::vector<CacheRecord> records() const;
  std::size_t size() const;
  std::size_t error_count() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<CacheRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t errors_ = 0;
  std::ofstream out_;
};

// Serves repeated requests from the cache and records fresh ones under `purpose` as the mode.
class CachingBackend final : public CompletionBackend {
 public:
  CachingBackend(CompletionBackend& inner, GenerationCache& cache) : inner_(inner), cache_(cache) {}

  Completion complete(const CompletionRequest& request) override;
  std::uint64_t misses() const { return misses_.load(); }

 private:
  CompletionBackend& inner_;
  GenerationCache& cache_;
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace modegate
