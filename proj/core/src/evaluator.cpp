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

#include "annoloop/evaluator.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "annoloop/error.hpp"
#include "annoloop/utf8.hpp"

namespace annoloop::eval {
namespace {

bool is_letter(char32_t cp) {
  switch (u_charType(static_cast<UChar32>(cp))) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return true;
    default:
      return false;
  }
}

bool is_word_char(char32_t cp) {
  if (is_letter(cp)) return true;
  switch (u_charType(static_cast<UChar32>(cp))) {
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
    case U_NON_SPACING_MARK:
    case U_ENCLOSING_MARK:
    case U_COMBINING_SPACING_MARK:
      return true;
    default:
      return false;
  }
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == U'’'; }

bool is_space(char32_t cp) { return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view plain_text) {
  const auto cps = utf8::decode(plain_text);
  const std::size_t n = cps.size();
  const auto byte_end = [&](std::size_t k) {
    return k < n ? cps[k].byte_offset : plain_text.size();
  };

  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i].value;
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_word_char(c)) {
      while (j < n) {
        if (is_word_char(cps[j].value)) {
          ++j;
        } else if (is_apostrophe(cps[j].value) && is_letter(cps[j - 1].value) &&
                   j + 1 < n && is_letter(cps[j + 1].value)) {
          j += 2;
        } else {
          break;
        }
      }
    }
    const std::size_t b = cps[i].byte_offset;
    tokens.push_back({std::string(plain_text.substr(b, byte_end(j) - b)), i, j});
    i = j;
  }
  return tokens;
}

BinarySeq project_labels(const tagspan::SpanDoc& doc, const std::vector<Token>& tokens) {
  const std::size_t n = utf8::char_count(doc.plain_text);
  BinarySeq out(tokens.size(), 0);
  // Spans are sorted and disjoint, tokens ordered; sweep both.
  std::size_t s = 0;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const Token& t = tokens[k];
    if (t.start_char >= t.end_char || t.end_char > n) {
      throw Error(ErrorCode::kTokenSpanMismatch,
                  "token " + std::to_string(k) + " [" + std::to_string(t.start_char) + "," +
                      std::to_string(t.end_char) + ") exceeds text of " +
                      std::to_string(n) + " characters");
    }
    while (s < doc.spans.size() && doc.spans[s].end_char <= t.start_char) ++s;
    for (std::size_t q = s; q < doc.spans.size() && doc.spans[q].start_char < t.end_char; ++q) {
      if (doc.spans[q].end_char > t.start_char) {
        out[k] = 1;
        break;
      }
    }
  }
  return out;
}

Alignment align(const std::vector<Token>& gold, const std::vector<Token>& pred) {
  Alignment al;
  al.gold_size = gold.size();
  al.pred_size = pred.size();

  // Intern token texts so the table fill compares integers.
  std::unordered_map<std::string_view, std::uint32_t> ids;
  const auto intern = [&](const std::vector<Token>& ts) {
    std::vector<std::uint32_t> out;
    out.reserve(ts.size());
    for (const auto& t : ts) {
      out.push_back(ids.try_emplace(t.text, static_cast<std::uint32_t>(ids.size())).first->second);
    }
    return out;
  };
  const auto g = intern(gold);
  const auto p = intern(pred);

  std::size_t prefix = 0;
  while (prefix < g.size() && prefix < p.size() && g[prefix] == p[prefix]) {
    al.pairs.emplace_back(prefix, prefix);
    ++prefix;
  }
  const std::size_t n = g.size() - prefix;
  const std::size_t m = p.size() - prefix;
  if (n == 0 || m == 0) return al;

  // suffix[i][j] = LCS length of g[prefix+i..] and p[prefix+j..].
  const std::size_t width = m + 1;
  std::vector<std::uint32_t> suffix((n + 1) * width, 0);
  const auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& {
    return suffix[i * width + j];
  };
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      at(i, j) = g[prefix + i] == p[prefix + j] ? at(i + 1, j + 1) + 1
                                                : std::max(at(i + 1, j), at(i, j + 1));
    }
  }

  // Positions of each token id in the prediction, ascending.
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> positions;
  for (std::size_t j = 0; j < m; ++j) positions[p[prefix + j]].push_back(j);

  std::size_t i = 0;
  std::size_t j = 0;
  std::uint32_t remaining = at(0, 0);
  while (remaining > 0 && i < n) {
    // Smallest gold index that can open an optimal completion, matched with
    // the smallest usable prediction index (which leaves the most room).
    for (; i < n; ++i) {
      const auto it = positions.find(g[prefix + i]);
      if (it == positions.end()) continue;
      const auto& pos = it->second;
      const auto jt = std::lower_bound(pos.begin(), pos.end(), j);
      if (jt == pos.end()) continue;
      if (at(i + 1, *jt + 1) + 1 == remaining) {
        al.pairs.emplace_back(prefix + i, prefix + *jt);
        j = *jt + 1;
        ++i;
        --remaining;
        break;
      }
    }
  }
  return al;
}

ConfusionCounts confusion(const BinarySeq& gold, const BinarySeq& pred,
                          const Alignment& alignment) {
  if (gold.size() != alignment.gold_size || pred.size() != alignment.pred_size) {
    throw Error(ErrorCode::kLengthMismatch,
                "label sequences (" + std::to_string(gold.size()) + ", " +
                    std::to_string(pred.size()) + ") do not match alignment (" +
                    std::to_string(alignment.gold_size) + ", " +
                    std::to_string(alignment.pred_size) + ")");
  }
  ConfusionCounts c;
  std::vector<bool> gold_used(gold.size(), false);
  std::vector<bool> pred_used(pred.size(), false);
  for (const auto& [gi, pi] : alignment.pairs) {
    if (gi >= gold.size() || pi >= pred.size()) {
      throw Error(ErrorCode::kLengthMismatch, "alignment pair out of range");
    }
    gold_used[gi] = true;
    pred_used[pi] = true;
    const bool gv = gold[gi] != 0;
    const bool pv = pred[pi] != 0;
    if (gv && pv) ++c.tp;
    else if (!gv && pv) ++c.fp;
    else if (gv && !pv) ++c.fn;
    else ++c.tn;
  }
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (!gold_used[k]) (gold[k] ? c.fn : c.tn) += 1;
  }
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!pred_used[k]) (pred[k] ? c.fp : c.tn) += 1;
  }
  return c;
}

SampleMetrics metrics(const ConfusionCounts& counts, double coverage) {
  SampleMetrics m;
  m.counts = counts;
  m.alignment_coverage = coverage;
  m.flags.alignment_divergent = coverage < kDivergenceThreshold;

  const auto tp = static_cast<double>(counts.tp);
  const bool no_predicted = counts.tp + counts.fp == 0;
  const bool no_gold = counts.tp + counts.fn == 0;
  if (no_predicted) {
    m.precision = no_gold ? 1.0 : 0.0;
  } else {
    m.precision = tp / static_cast<double>(counts.tp + counts.fp);
  }
  if (no_gold) {
    m.recall = no_predicted ? 1.0 : 0.0;
  } else {
    m.recall = tp / static_cast<double>(counts.tp + counts.fn);
  }
  const double sum = m.precision + m.recall;
  m.f1 = sum == 0.0 ? 0.0 : 2.0 * (m.precision * m.recall) / sum;
  return m;
}

SampleMetrics evaluate_pair(std::string_view gold_tagged, std::string_view pred_tagged,
                            const tagspan::LabelSet& labels) {
  const auto gold_doc = tagspan::parse_tagged(gold_tagged, labels);
  const auto pred_doc = tagspan::parse_tagged(pred_tagged, labels);
  const auto gold_tokens = tokenize(gold_doc.plain_text);
  const auto pred_tokens = tokenize(pred_doc.plain_text);
  const auto gold_seq = project_labels(gold_doc, gold_tokens);
  const auto pred_seq = project_labels(pred_doc, pred_tokens);
  const auto al = align(gold_tokens, pred_tokens);
  auto m = metrics(confusion(gold_seq, pred_seq, al), al.coverage());
  m.flags.empty_gold = std::all_of(gold_tagged.begin(), gold_tagged.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
  return m;
}

std::optional<MacroAverage> try_macro_average(const std::vector<SampleMetrics>& samples) {
  MacroAverage avg;
  for (const auto& s : samples) {
    if (s.flags.empty_gold) continue;
    avg.precision += s.precision;
    avg.recall += s.recall;
    avg.f1 += s.f1;
    ++avg.samples;
  }
  if (avg.samples == 0) return std::nullopt;
  const auto n = static_cast<double>(avg.samples);
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  return avg;
}

MacroAverage macro_average(const std::vector<SampleMetrics>& samples) {
  if (auto avg = try_macro_average(samples)) return *avg;
  throw Error(ErrorCode::kNoEvaluableSamples, "no evaluable samples to average");
}

SampleMetrics micro_average(const std::vector<SampleMetrics>& samples) {
  ConfusionCounts pooled;
  for (const auto& s : samples) {
    if (!s.flags.empty_gold) pooled += s.counts;
  }
  return metrics(pooled, 1.0);
}

std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

}  // namespace annoloop::eval
