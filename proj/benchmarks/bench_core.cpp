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

#include <benchmark/benchmark.h>

#include <string>

#include "annoloop/evaluator.hpp"
#include "annoloop/tagspan.hpp"

namespace {

using namespace annoloop;

const tagspan::LabelSet kLabels{"Metaphor"};

// A review-sized text: `n` repetitions of a sentence with two tagged spans.
std::string tagged_review(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += "The plot is <Metaphor>a rollercoaster</Metaphor> of twists, and the ending "
         "<Metaphor>drowned</Metaphor> me in tears. ";
  }
  return s;
}

std::string under_tagged(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += "The plot is <Metaphor>a rollercoaster</Metaphor> of twists, and the ending "
         "drowned me in tears! ";
  }
  return s;
}

void BM_ParseTagged(benchmark::State& state) {
  const auto text = tagged_review(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tagspan::parse_tagged(text, kLabels));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseTagged)->Arg(1)->Arg(16)->Arg(128);

void BM_Tokenize(benchmark::State& state) {
  const auto plain = tagspan::strip_tags(tagged_review(static_cast<int>(state.range(0))), kLabels);
  for (auto _ : state) benchmark::DoNotOptimize(eval::tokenize(plain));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(plain.size()));
}
BENCHMARK(BM_Tokenize)->Arg(1)->Arg(16)->Arg(128);

void BM_Align(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto gold = eval::tokenize(tagspan::strip_tags(tagged_review(n), kLabels));
  const auto pred = eval::tokenize(tagspan::strip_tags(under_tagged(n), kLabels));
  for (auto _ : state) benchmark::DoNotOptimize(eval::align(gold, pred));
  state.counters["tokens"] = static_cast<double>(gold.size());
}
BENCHMARK(BM_Align)->Arg(1)->Arg(16)->Arg(64);

void BM_EvaluatePair(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto gold = tagged_review(n);
  const auto pred = under_tagged(n);
  for (auto _ : state) benchmark::DoNotOptimize(eval::evaluate_pair(gold, pred, kLabels));
}
BENCHMARK(BM_EvaluatePair)->Arg(1)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
