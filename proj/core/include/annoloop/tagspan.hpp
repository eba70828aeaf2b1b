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
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Lenient reader and writer for inline span tags such as
// "He <Metaphor>devoured</Metaphor> the book".
//
// A marker is recognized only when it is byte-identical to "<L>" or "</L>" for
// a configured label L. Everything else stays literal text. Malformed input
// never fails: anomalies are reported as warnings and the parse salvages what
// it can (unclosed tags run to the end of the text, stray closers are dropped,
// nested or overlapping tags are flattened to their union).
namespace annoloop::tagspan {

using LabelSet = std::set<std::string, std::less<>>;

inline constexpr std::string_view kDefaultLabel = "Metaphor";

enum class WarningKind { kUnclosedTag, kStrayCloseTag, kUnknownLabel, kNestedFlattened };

std::string_view to_string(WarningKind kind) noexcept;

struct ParseWarning {
  WarningKind kind;
  // Character offset of the offending marker in the tagged input.
  std::size_t char_offset;

  friend bool operator==(const ParseWarning&, const ParseWarning&) = default;
};

// [start_char, end_char) in characters of the plain text.
struct Span {
  std::string label;
  std::size_t start_char = 0;
  std::size_t end_char = 0;

  friend bool operator==(const Span&, const Span&) = default;
};

struct SpanDoc {
  std::string plain_text;
  std::vector<Span> spans;  // sorted by start_char, pairwise disjoint
  std::vector<ParseWarning> warnings;
};

// Nonempty, no whitespace, no angle brackets, no '/'.
bool is_valid_label(std::string_view label) noexcept;

// Throws Error(kInvalidArgument) if `labels` is empty or holds an invalid label.
SpanDoc parse_tagged(std::string_view tagged, const LabelSet& labels);

std::string strip_tags(std::string_view tagged, const LabelSet& labels);

// Throws Error(kInvalidSpanDoc) when the document breaks its invariants or its
// plain text already contains a marker for one of its own labels (which would
// make the rendering ambiguous).
std::string render_tagged(const SpanDoc& doc);

void validate(const SpanDoc& doc);

LabelSet labels_of(const SpanDoc& doc);

}  // namespace annoloop::tagspan
