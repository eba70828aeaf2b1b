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

#include "annoloop/utf8.hpp"

#include <algorithm>

#include "annoloop/error.hpp"

namespace annoloop {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidSpanDoc: return "InvalidSpanDoc";
    case ErrorCode::kTokenSpanMismatch: return "TokenSpanMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kNoEvaluableSamples: return "NoEvaluableSamples";
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kMissingFixture: return "MissingFixture";
    case ErrorCode::kMissingHeader: return "MissingHeader";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kRowFieldCount: return "RowFieldCount";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace utf8 {
namespace {

// Returns the length of a well-formed sequence starting at text[i], or 0.
std::size_t sequence_length(std::string_view text, std::size_t i, char32_t& out) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
  const unsigned char lead = byte(i);
  if (lead < 0x80) {
    out = lead;
    return 1;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((lead & 0xE0) == 0xC0) {
    len = 2, cp = lead & 0x1F, min = 0x80;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3, cp = lead & 0x0F, min = 0x800;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4, cp = lead & 0x07, min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char c = byte(i + k);
    if ((c & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (c & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  out = cp;
  return len;
}

}  // namespace

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    std::size_t len = sequence_length(text, i, cp);
    if (len == 0) {
      cp = kReplacement;
      len = 1;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

std::size_t char_count(std::string_view text) {
  std::size_t n = 0;
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < text.size()) {
    const std::size_t len = sequence_length(text, i, cp);
    i += len == 0 ? 1 : len;
    ++n;
  }
  return n;
}

std::vector<std::size_t> char_starts(std::string_view text) {
  std::vector<std::size_t> out;
  out.reserve(text.size() + 1);
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < text.size()) {
    out.push_back(i);
    const std::size_t len = sequence_length(text, i, cp);
    i += len == 0 ? 1 : len;
  }
  out.push_back(text.size());
  return out;
}

std::string slice(std::string_view text, std::size_t begin, std::size_t end) {
  const auto starts = char_starts(text);
  const std::size_t n = starts.size() - 1;
  begin = std::min(begin, n);
  end = std::clamp(end, begin, n);
  return std::string(text.substr(starts[begin], starts[end] - starts[begin]));
}

void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace utf8
}  // namespace annoloop
