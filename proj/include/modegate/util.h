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
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace modegate {

std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

// Stable 64-bit value derived from the SHA-256 of the parts joined with '\x1f'.
// Keys counter-based random streams on (seed, question id, stream name, index).
std::uint64_t stable_hash64(std::initializer_list<std::string_view> parts);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
double unit_interval(std::uint64_t word);

// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Calls `fn(line, line_number)` for every non-empty line; line numbers start at 1.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&, std::size_t)>& fn);

std::vector<std::string> split_csv(std::string_view text);

std::string utc_timestamp();

}  // namespace modegate
