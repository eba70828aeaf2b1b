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

#include "annoloop/tagspan.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "annoloop/error.hpp"
#include "annoloop/utf8.hpp"

namespace annoloop::tagspan {
namespace {

bool is_name_char(char c) noexcept {
  switch (c) {
    case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
    case '<': case '>': case '/':
      return false;
    default:
      return true;
  }
}

struct Marker {
  std::string_view name;
  bool closing = false;
  std::size_t end = 0;  // one past '>'
};

// Matches "<name>" or "</name>" at text[pos] where name is label-shaped.
std::optional<Marker> scan_marker(std::string_view text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != '<') return std::nullopt;
  Marker m;
  std::size_t i = pos + 1;
  if (i < text.size() && text[i] == '/') {
    m.closing = true;
    ++i;
  }
  const std::size_t name_begin = i;
  while (i < text.size() && is_name_char(text[i])) ++i;
  if (i == name_begin || i >= text.size() || text[i] != '>') return std::nullopt;
  m.name = text.substr(name_begin, i - name_begin);
  m.end = i + 1;
  return m;
}

struct OpenState {
  int depth = 0;
  std::size_t plain_byte = 0;
  std::size_t input_byte = 0;
};

struct RawSpan {
  std::string label;
  std::size_t start_byte;
  std::size_t end_byte;
  std::size_t input_byte;  // where the opening marker sat
};

// Character index of the character containing or starting at byte b.
std::size_t to_char(const std::vector<std::size_t>& starts, std::size_t b) {
  if (b >= starts.back()) return starts.size() - 1;
  auto it = std::upper_bound(starts.begin(), starts.end() - 1, b);
  return static_cast<std::size_t>(it - starts.begin()) - 1;
}

// Character index of the first character starting at or after byte b.
std::size_t to_char_ceil(const std::vector<std::size_t>& starts, std::size_t b) {
  auto it = std::lower_bound(starts.begin(), starts.end(), b);
  return static_cast<std::size_t>(it - starts.begin());
}

void check_labels(const LabelSet& labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "allowed label set is empty");
  }
  for (const auto& l : labels) {
    if (!is_valid_label(l)) {
      throw Error(ErrorCode::kInvalidArgument, "invalid label '" + l + "'");
    }
  }
}

}  // namespace

std::string_view to_string(WarningKind kind) noexcept {
  switch (kind) {
    case WarningKind::kUnclosedTag: return "UnclosedTag";
    case WarningKind::kStrayCloseTag: return "StrayCloseTag";
    case WarningKind::kUnknownLabel: return "UnknownLabel";
    case WarningKind::kNestedFlattened: return "NestedFlattened";
  }
  return "Unknown";
}

bool is_valid_label(std::string_view label) noexcept {
  return !label.empty() && std::all_of(label.begin(), label.end(), is_name_char);
}

SpanDoc parse_tagged(std::string_view tagged, const LabelSet& labels) {
  check_labels(labels);

  const auto input_starts = utf8::char_starts(tagged);
  const auto input_char = [&](std::size_t b) { return to_char(input_starts, b); };

  SpanDoc doc;
  doc.plain_text.reserve(tagged.size());
  std::map<std::string, OpenState, std::less<>> open;
  std::vector<RawSpan> raw;

  std::size_t i = 0;
  while (i < tagged.size()) {
    if (tagged[i] == '<') {
      if (auto m = scan_marker(tagged, i)) {
        if (labels.contains(m->name)) {
          auto& st = open[std::string(m->name)];
          if (!m->closing) {
            if (st.depth == 0) {
              st.plain_byte = doc.plain_text.size();
              st.input_byte = i;
            } else {
              doc.warnings.push_back({WarningKind::kNestedFlattened, input_char(i)});
            }
            ++st.depth;
          } else if (st.depth == 0) {
            doc.warnings.push_back({WarningKind::kStrayCloseTag, input_char(i)});
          } else if (--st.depth == 0) {
            raw.push_back({std::string(m->name), st.plain_byte, doc.plain_text.size(),
                           st.input_byte});
          }
          i = m->end;
          continue;
        }
        if (!m->closing) {
          doc.warnings.push_back({WarningKind::kUnknownLabel, input_char(i)});
        }
      }
    }
    doc.plain_text.push_back(tagged[i]);
    ++i;
  }

  for (auto& [label, st] : open) {
    if (st.depth > 0) {
      doc.warnings.push_back({WarningKind::kUnclosedTag, input_char(st.input_byte)});
      raw.push_back({label, st.plain_byte, doc.plain_text.size(), st.input_byte});
    }
  }

  // Removing markers can splice bytes of an invalid sequence together, so a
  // boundary may land inside a character; round starts down and ends up.
  const auto plain_starts = utf8::char_starts(doc.plain_text);
  std::vector<std::pair<Span, std::size_t>> spans;
  spans.reserve(raw.size());
  for (const auto& r : raw) {
    Span s{r.label, to_char(plain_starts, r.start_byte), to_char_ceil(plain_starts, r.end_byte)};
    if (s.start_char < s.end_char) spans.emplace_back(std::move(s), r.input_byte);
  }
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.start_char, a.first.end_char, a.first.label) <
           std::tie(b.first.start_char, b.first.end_char, b.first.label);
  });

  // Same-label spans are disjoint by construction; spans of different labels
  // may still overlap. Later spans are clipped to start after earlier ones.
  std::size_t covered = 0;
  for (auto& [s, input_byte] : spans) {
    if (s.start_char < covered) {
      doc.warnings.push_back({WarningKind::kNestedFlattened, input_char(input_byte)});
      s.start_char = covered;
      if (s.start_char >= s.end_char) continue;
    }
    covered = s.end_char;
    doc.spans.push_back(std::move(s));
  }

  std::stable_sort(doc.warnings.begin(), doc.warnings.end(),
                   [](const ParseWarning& a, const ParseWarning& b) {
                     return a.char_offset < b.char_offset;
                   });
  return doc;
}

std::string strip_tags(std::string_view tagged, const LabelSet& labels) {
  return parse_tagged(tagged, labels).plain_text;
}

LabelSet labels_of(const SpanDoc& doc) {
  LabelSet out;
  for (const auto& s : doc.spans) out.insert(s.label);
  return out;
}

void validate(const SpanDoc& doc) {
  const std::size_t n = utf8::char_count(doc.plain_text);
  std::size_t prev_end = 0;
  for (const auto& s : doc.spans) {
    if (!is_valid_label(s.label)) {
      throw Error(ErrorCode::kInvalidSpanDoc, "invalid span label '" + s.label + "'");
    }
    if (s.start_char >= s.end_char || s.end_char > n) {
      throw Error(ErrorCode::kInvalidSpanDoc,
                  "span [" + std::to_string(s.start_char) + "," +
                      std::to_string(s.end_char) + ") out of range for text of " +
                      std::to_string(n) + " characters");
    }
    if (s.start_char < prev_end) {
      throw Error(ErrorCode::kInvalidSpanDoc, "spans overlap or are not sorted");
    }
    prev_end = s.end_char;
  }
  for (const auto& label : labels_of(doc)) {
    const std::string open = "<" + label + ">";
    const std::string close = "</" + label + ">";
    if (doc.plain_text.find(open) != std::string::npos ||
        doc.plain_text.find(close) != std::string::npos) {
      throw Error(ErrorCode::kInvalidSpanDoc,
                  "plain text contains a literal marker for label '" + label + "'");
    }
  }
}

std::string render_tagged(const SpanDoc& doc) {
  validate(doc);
  const auto starts = utf8::char_starts(doc.plain_text);
  std::string out;
  out.reserve(doc.plain_text.size() + doc.spans.size() * 24);
  std::size_t cursor = 0;
  for (const auto& s : doc.spans) {
    const std::size_t b = starts[s.start_char];
    const std::size_t e = starts[s.end_char];
    out.append(doc.plain_text, cursor, b - cursor);
    out.append("<").append(s.label).append(">");
    out.append(doc.plain_text, b, e - b);
    out.append("</").append(s.label).append(">");
    cursor = e;
  }
  out.append(doc.plain_text, cursor, std::string::npos);
  return out;
}

}  // namespace annoloop::tagspan
