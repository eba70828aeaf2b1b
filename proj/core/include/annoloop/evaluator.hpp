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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "annoloop/tagspan.hpp"

// Token-level scoring of a predicted annotation against a gold standard.
//
// Both texts are tokenized, projected to binary tagged/untagged sequences and
// aligned on token text (the prediction may not reproduce the source exactly).
// Precision, recall and F1 follow the usual definitions with these conventions
// for empty denominators:
//   P = 1 if TP+FP = 0 and TP+FN = 0, else 0 when TP+FP = 0
//   R = 1 if TP+FN = 0 and TP+FP = 0, else 0 when TP+FN = 0
//   F1 = 0 if P+R = 0
namespace annoloop::eval {

struct Token {
  std::string text;
  std::size_t start_char = 0;
  std::size_t end_char = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

using BinarySeq = std::vector<std::uint8_t>;

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn, tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricFlags {
  bool alignment_divergent = false;
  bool empty_gold = false;

  friend bool operator==(const MetricFlags&, const MetricFlags&) = default;
};

struct SampleMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  double alignment_coverage = 1.0;
  MetricFlags flags;

  friend bool operator==(const SampleMetrics&, const SampleMetrics&) = default;
};

struct Alignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gold, pred)
  std::size_t gold_size = 0;
  std::size_t pred_size = 0;

  double coverage() const noexcept {
    return static_cast<double>(pairs.size()) /
           static_cast<double>(gold_size == 0 ? 1 : gold_size);
  }
};

struct MacroAverage {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t samples = 0;

  friend bool operator==(const MacroAverage&, const MacroAverage&) = default;
};

inline constexpr double kDivergenceThreshold = 0.5;

// Maximal runs of letters, digits and combining marks (a single apostrophe
// between two letters stays inside the word); any other non-space character is
// a token of its own; whitespace separates.
std::vector<Token> tokenize(std::string_view plain_text);

// A token is 1 iff its character range intersects a span.
// Throws Error(kTokenSpanMismatch) if a token lies outside the text.
BinarySeq project_labels(const tagspan::SpanDoc& doc, const std::vector<Token>& tokens);

// Longest common subsequence on token text. Among maximal alignments the one
// with the lexicographically smallest gold index sequence wins, then the one
// with the smallest prediction index sequence.
Alignment align(const std::vector<Token>& gold, const std::vector<Token>& pred);

// Throws Error(kLengthMismatch) when a sequence disagrees with the alignment.
ConfusionCounts confusion(const BinarySeq& gold, const BinarySeq& pred,
                          const Alignment& alignment);

SampleMetrics metrics(const ConfusionCounts& counts, double coverage);

// parse -> tokenize -> project -> align -> confusion -> metrics. A gold text
// that is empty or all whitespace is flagged empty_gold.
SampleMetrics evaluate_pair(std::string_view gold_tagged, std::string_view pred_tagged,
                            const tagspan::LabelSet& labels);

// Unweighted mean over samples not flagged empty_gold.
// Throws Error(kNoEvaluableSamples) when nothing is left to average.
MacroAverage macro_average(const std::vector<SampleMetrics>& samples);

// Optional-returning variant for running averages.
std::optional<MacroAverage> try_macro_average(const std::vector<SampleMetrics>& samples);

// Metrics over pooled counts of the samples not flagged empty_gold.
SampleMetrics micro_average(const std::vector<SampleMetrics>& samples);

// Fixed four-decimal rendering used in summaries and exports, e.g. "0.5070".
std::string format_metric(double value);

}  // namespace annoloop::eval
