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

#include "modegate/cache.h"

#include <spdlog/spdlog.h>

#include "modegate/errors.h"
#include "modegate/util.h"

namespace modegate {

using nlohmann::json;

json cache_record_to_json(const CacheRecord& r) {
  json graded = nullptr;
  if (r.graded) {
    graded = {{"extracted", r.graded->extracted ? json(*r.graded->extracted) : json(nullptr)},
              {"correct", r.graded->correct},
              {"trace", r.graded->normalization_trace}};
  }
  json j{{"kind", "generation"},
         {"key", r.key},
         {"question_id", r.question_id},
         {"mode", r.mode},
         {"sample_index", r.sample_index},
         {"completion", completion_to_json(r.completion)},
         {"graded", std::move(graded)},
         {"created_at", r.created_at}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

CacheRecord cache_record_from_json(const json& j) {
  CacheRecord r;
  r.key = j.at("key").get<std::string>();
  r.question_id = j.at("question_id").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.sample_index = j.at("sample_index").get<std::uint64_t>();
  r.completion = completion_from_json(j.at("completion"));
  if (const json& g = j.at("graded"); !g.is_null()) {
    GradedAnswer a;
    if (!g.at("extracted").is_null()) a.extracted = g["extracted"].get<std::string>();
    a.correct = g.at("correct").get<bool>();
    a.normalization_trace = g.value("trace", std::string());
    r.graded = std::move(a);
  }
  r.created_at = j.value("created_at", std::string());
  r.error = j.value("error", std::string());
  return r;
}

GenerationCache::GenerationCache(std::filesystem::path dir) : path_(dir / "generations.jsonl") {
  std::filesystem::create_directories(dir);
  if (std::filesystem::exists(path_)) {
    const std::string contents = read_file(path_);
    std::size_t start = 0, line_no = 0, truncated = 0;
    while (start < contents.size()) {
      std::size_t end = contents.find('\n', start);
      const bool complete = end != std::string::npos;
      if (!complete) end = contents.size();
      ++line_no;
      const std::string_view line(contents.data() + start, end - start);
      start = end + 1;
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !complete) {
        // A torn final write from an interrupted run; the request is simply redone.
        ++truncated;
        continue;
      }
      if (j.value("kind", std::string()) != "generation") continue;
      CacheRecord r = cache_record_from_json(j);
      if (!r.error.empty()) {
        ++errors_;
        continue;
      }
      if (index_.count(r.key)) continue;
      index_.emplace(r.key, records_.size());
      records_.push_back(std::move(r));
    }
    if (truncated) spdlog::warn("{}: skipped {} unreadable line(s)", path_.string(), truncated);
    // Drop a torn tail so new appends start on a fresh line.
    if (!contents.empty() && contents.back() != '\n') {
      const std::size_t keep = contents.rfind('\n');
      write_file_atomic(path_, keep == std::string::npos ? std::string_view()
                                                         : std::string_view(contents).substr(0, keep + 1));
    }
  }
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open cache file " + path_.string());
}

std::optional<CacheRecord> GenerationCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

bool GenerationCache::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return index_.count(key) != 0;
}

bool GenerationCache::append(CacheRecord record) {
  std::lock_guard lock(mu_);
  if (index_.count(record.key)) return false;
  if (record.created_at.empty()) record.created_at = utc_timestamp();
  out_ << cache_record_to_json(record).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write to cache file failed: " + path_.string());
  if (!record.error.empty()) {
    ++errors_;
    return true;
  }
  index_.emplace(record.key, records_.size());
  records_.push_back(std::move(record));
  return true;
}

std::vector<CacheRecord> GenerationCache::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::size_t GenerationCache::error_count() const {
  std::lock_guard lock(mu_);
  return errors_;
}

Completion CachingBackend::complete(const CompletionRequest& request) {
  const std::string key = request_key(request.prompt, request.params, request.sample_index);
  if (auto hit = cache_.find(key)) return hit->completion;
  ++misses_;
  Completion c = inner_.complete(request);
  record_usage(c);
  CacheRecord r;
  r.key = key;
  r.question_id = request.question_id;
  r.mode = request.purpose.empty() ? "monitor" : request.purpose;
  r.sample_index = request.sample_index;
  r.completion = c;
  cache_.append(std::move(r));
  return c;
}

}  // namespace modegate
