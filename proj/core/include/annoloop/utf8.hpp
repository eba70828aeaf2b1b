// Copyright 2026 The Annoloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Minimal UTF-8 helpers. Character offsets throughout the library count
// Unicode scalar values; an invalid byte counts as one character (decoded as
// U+FFFD) so that arbitrary input maps onto a well-defined index space.
namespace annoloop::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

struct CodePoint {
  char32_t value;
  std::size_t byte_offset;
  std::size_t byte_length;
};

std::vector<CodePoint> decode(std::string_view text);

std::size_t char_count(std::string_view text);

// Byte offset of every character start plus a final entry for text.size().
// The result has char_count(text) + 1 elements.
std::vector<std::size_t> char_starts(std::string_view text);

// Substring by character range [begin, end).
std::string slice(std::string_view text, std::size_t begin, std::size_t end);

void append(std::string& out, char32_t cp);

}  // namespace annoloop::utf8
