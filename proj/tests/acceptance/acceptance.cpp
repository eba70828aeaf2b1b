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

// Offline acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/evaluator.hpp"
#include "annoloop/runner.hpp"
#include "annoloop/serialization.hpp"
#include "annoloop/tagspan.hpp"
#include "cli.hpp"
#include "generators.hpp"
#include "test_support.hpp"

namespace {

using namespace annoloop;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates the first failure message.
struct Check {
  Outcome out;
  void expect(bool cond, const std::string& what) {
    if (!cond && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
};

// --- metric oracle ---------------------------------------------------------

struct OracleMetrics {
  double p, r, f1;
  std::int64_t tp, fp, fn, tn;
};

// Straight from the definitions: counts by bit inspection, then P, R and F1
// with the empty-denominator conventions.
OracleMetrics oracle(unsigned gold, unsigned pred, unsigned n) {
  OracleMetrics m{0, 0, 0, 0, 0, 0, 0};
  for (unsigned i = 0; i < n; ++i) {
    const bool g = (gold >> i) & 1u;
    const bool p = (pred >> i) & 1u;
    if (g && p) ++m.tp;
    if (!g && p) ++m.fp;
    if (g && !p) ++m.fn;
    if (!g && !p) ++m.tn;
  }
  const bool nothing_predicted = m.tp + m.fp == 0;
  const bool nothing_gold = m.tp + m.fn == 0;
  if (nothing_predicted && nothing_gold) {
    m.p = 1.0;
    m.r = 1.0;
  } else {
    m.p = nothing_predicted ? 0.0 : double(m.tp) / double(m.tp + m.fp);
    m.r = nothing_gold ? 0.0 : double(m.tp) / double(m.tp + m.fn);
  }
  m.f1 = (m.p + m.r == 0.0) ? 0.0 : 2.0 * m.p * m.r / (m.p + m.r);
  return m;
}

Outcome metric_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t cases = 0;
  for (unsigned n = 0; n <= 8; ++n) {
    eval::Alignment identity;
    identity.gold_size = identity.pred_size = n;
    for (unsigned i = 0; i < n; ++i) identity.pairs.emplace_back(i, i);
    for (unsigned g = 0; g < (1u << n); ++g) {
      eval::BinarySeq gs(n);
      for (unsigned i = 0; i < n; ++i) gs[i] = (g >> i) & 1u;
      for (unsigned p = 0; p < (1u << n); ++p) {
        eval::BinarySeq ps(n);
        for (unsigned i = 0; i < n; ++i) ps[i] = (p >> i) & 1u;
        const auto m = eval::metrics(eval::confusion(gs, ps, identity), identity.coverage());
        const auto o = oracle(g, p, n);
        ++cases;
        c.expect(m.counts.tp == o.tp && m.counts.fp == o.fp && m.counts.fn == o.fn &&
                     m.counts.tn == o.tn,
                 "counts differ at n=" + std::to_string(n));
        c.expect(m.precision == o.p && m.recall == o.r && m.f1 == o.f1,
                 "metrics differ at n=" + std::to_string(n) + " gold=" + std::to_string(g) +
                     " pred=" + std::to_string(p));
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 10.0, "took " + std::to_string(secs) + " s");
  if (c.out.pass) {
    c.out.detail = std::to_string(cases) + " labelings, " + std::to_string(secs) + " s";
  }
  return c.out;
}

Outcome formula_spot_checks() {
  Check c;
  const auto at = [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    return eval::metrics(eval::ConfusionCounts{tp, fp, fn, 0}, 1.0);
  };
  const auto a = at(1, 1, 1);
  c.expect(a.precision == 0.5 && a.recall == 0.5 && a.f1 == 0.5, "(1,1,1)");
  const auto b = at(0, 0, 0);
  c.expect(b.precision == 1.0 && b.recall == 1.0 && b.f1 == 1.0, "(0,0,0)");
  const auto d = at(0, 3, 2);
  c.expect(d.precision == 0.0 && d.recall == 0.0 && d.f1 == 0.0, "(0,3,2)");
  return c.out;
}

// --- tag parser ------------------------------------------------------------

Outcome parser_round_trip() {
  Check c;
  std::mt19937_64 rng(20240611);
  const std::vector<std::string> labels{"Metaphor", "Simile"};
  const tagspan::LabelSet set(labels.begin(), labels.end());
  for (int i = 0; i < 10000 && c.out.pass; ++i) {
    const auto doc = testing::random_doc(rng, labels);
    const auto back = tagspan::parse_tagged(tagspan::render_tagged(doc), set);
    c.expect(back.plain_text == doc.plain_text && back.spans == doc.spans &&
                 testing::only_unknown_label_warnings(back),
             "round trip " + std::to_string(i));
  }
  for (int i = 0; i < 10000 && c.out.pass; ++i) {
    const auto noise = testing::random_noise(rng);
    try {
      const auto doc = tagspan::parse_tagged(noise, tagspan::LabelSet{"Metaphor"});
      c.expect(testing::well_formed(doc), "malformed parse of noise " + std::to_string(i));
    } catch (const std::exception& e) {
      c.expect(false, "noise " + std::to_string(i) + ": " + e.what());
    }
  }
  return c.out;
}

// --- runs on the mock fixtures ----------------------------------------------

runner::RunConfig fixture_config(const std::string& dir, const std::string& file,
                                 const fs::path& out, const std::string& run_id) {
  const auto base = testing::data_dir() / dir;
  auto c = runner::run_config_from_json(json::parse(runner::read_text_file(base / file)), base);
  c.output_dir = out;
  c.run_id = run_id;
  return c;
}

runner::RunSummary run_fixture(const runner::RunConfig& config, const std::string& dir) {
  const auto data = runner::load_dataset_csv(testing::data_dir() / dir / "dataset.csv");
  testing::SleepRecorder sleeps;
  return runner::run_batch(config, data,
                           runner::make_clients(config.experiment, providers::make_transport,
                                                sleeps.options()));
}

Outcome reflective_loop() {
  Check c;
  testing::TempDir out;
  const auto fix = run_fixture(fixture_config("reflective", "config_reviewer.json", out.path(), "fix"),
                               "reflective");
  c.expect(fix.macro_pre && fix.macro_post, "no macro averages");
  if (!c.out.pass) return c.out;
  c.expect(fix.macro_post->f1 > fix.macro_pre->f1, "post F1 not above pre F1");
  const auto same = run_fixture(
      fixture_config("reflective", "config_identity.json", out.path(), "identity"), "reflective");
  c.expect(same.macro_pre && same.macro_post && same.macro_post->f1 == same.macro_pre->f1,
           "identity reviewer changed F1");
  if (c.out.pass) {
    std::ostringstream d;
    d << "pre=" << eval::format_metric(fix.macro_pre->f1)
      << " post=" << eval::format_metric(fix.macro_post->f1)
      << " identity=" << eval::format_metric(same.macro_post->f1);
    c.out.detail = d.str();
  }
  return c.out;
}

Outcome error_taxonomy() {
  Check c;
  testing::TempDir out;
  runner::RunConfig config;
  config.experiment.annotator = testing::mock_spec("faulty");
  config.experiment.retry = providers::RetryPolicy{4, 100, 2.0, 0.0};
  config.output_dir = out.path();
  config.run_id = "faults";
  config.workers = 1;
  const std::vector<Sample> data = {
      {0, "cut", "The ending drowned me.", "The ending <Metaphor>drowned</Metaphor> me."},
      {1, "busy", "Her voice is velvet.", "Her voice is <Metaphor>velvet</Metaphor>."},
      {2, "fine", "Time flies.", "Time <Metaphor>flies</Metaphor>."}};
  providers::MockScript script;
  for (const auto& s : data) {
    script.fixtures[s.text] = testing::annotator_body("figurative use", s.gold_tagged);
  }
  script.faults[data[0].text].truncate_after = 20;
  script.faults[data[1].text].status_code = 429;
  script.faults[data[1].text].status_times = -1;

  testing::SleepRecorder sleeps;
  const runner::TransportFactory factory = [&](const providers::ModelSpec&) {
    return std::make_shared<providers::MockTransport>(script);
  };
  const auto s = runner::run_batch(config, data,
                                   runner::make_clients(config.experiment, factory, sleeps.options()));
  c.expect(agents::status_label(s.outcomes[0]) == "Failed(Truncated)",
           "truncation gave " + agents::status_label(s.outcomes[0]));
  c.expect(agents::status_label(s.outcomes[1]) == "Failed(QuotaExceeded)",
           "429 gave " + agents::status_label(s.outcomes[1]));
  c.expect(s.outcomes[2].status == agents::SampleStatus::kOk, "clean sample failed");

  // Both failing samples exhaust 4 attempts: 3 sleeps each of 100, 200, 400 ms.
  const std::vector<std::chrono::milliseconds> one{std::chrono::milliseconds(100),
                                                   std::chrono::milliseconds(200),
                                                   std::chrono::milliseconds(400)};
  std::vector<std::chrono::milliseconds> expected = one;
  expected.insert(expected.end(), one.begin(), one.end());
  c.expect(*sleeps.delays == expected, "retry schedule differs");

  const auto log = runner::read_log(config.output_dir, config.run_id);
  std::map<std::string, int> per_sample;
  for (const auto& e : log.entries) ++per_sample[e.sample_id];
  c.expect(log.entries.size() == 9u, "log has " + std::to_string(log.entries.size()) + " entries");
  c.expect(per_sample["cut"] == 4 && per_sample["busy"] == 4 && per_sample["fine"] == 1,
           "per-sample attempt counts differ");
  int quota = 0;
  for (const auto& e : log.entries) {
    if (e.sample_id == "busy" && e.error_class == providers::ErrorClass::kQuotaExceeded) ++quota;
  }
  c.expect(quota == 4, "quota attempts not all classified");
  return c.out;
}

Outcome determinism() {
  Check c;
  testing::TempDir a, b;
  auto one = fixture_config("reflective", "config_reviewer.json", a.path(), "det");
  one.workers = 1;
  auto four = fixture_config("reflective", "config_reviewer.json", b.path(), "det");
  four.workers = 4;
  run_fixture(one, "reflective");
  run_fixture(four, "reflective");
  c.expect(runner::read_text_file(a / "det" / "export.csv") ==
               runner::read_text_file(b / "det" / "export.csv"),
           "export.csv differs");
  const auto strip = [](const fs::path& p) {
    auto j = json::parse(runner::read_text_file(p));
    j.erase("started_at_ms");
    j.erase("finished_at_ms");
    return j;
  };
  c.expect(strip(a / "det" / "summary.json") == strip(b / "det" / "summary.json"),
           "summary.json differs");
  return c.out;
}

Outcome golden_export() {
  Check c;
  testing::TempDir out;
  run_fixture(fixture_config("golden", "config.json", out.path(), "golden"), "golden");
  const auto got = runner::read_text_file(out / "golden" / "export.csv");
  const auto want = runner::read_text_file(testing::data_dir() / "golden" / "export.csv");
  c.expect(got == want, "export differs from golden file");
  return c.out;
}

Outcome cli_evaluate() {
  Check c;
  const auto gold = (testing::data_dir() / "evaluate" / "gold.csv").string();
  const auto pred = (testing::data_dir() / "evaluate" / "pred.csv").string();
  const char* argv[] = {"annoloop", "evaluate", "--json", "--gold", gold.c_str(),
                        "--pred", pred.c_str()};
  std::ostringstream out, err;
  const int code = cli::run_cli(7, argv, out, err);
  c.expect(code == 0, "exit " + std::to_string(code) + ": " + err.str());
  if (!c.out.pass) return c.out;
  const auto macro = json::parse(out.str()).at("macro");
  // Per pair (P, R, F1): (1, 1, 1), (2/3, 1/2, 4/7), (0, 0, 0).
  const double p = (1.0 + 2.0 / 3.0 + 0.0) / 3.0;
  const double r = (1.0 + 1.0 / 2.0 + 0.0) / 3.0;
  const double f1 = (1.0 + 4.0 / 7.0 + 0.0) / 3.0;
  c.expect(macro.at("precision").get<double>() == p, "macro precision");
  c.expect(macro.at("recall").get<double>() == r, "macro recall");
  c.expect(macro.at("f1").get<double>() == f1, "macro F1");
  c.expect(macro.at("samples").get<int>() == 3, "sample count");
  return c.out;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-oracle-exhaustive", metric_oracle},
      {"metric-formula-spot-checks", formula_spot_checks},
      {"tag-parser-round-trip-and-totality", parser_round_trip},
      {"reflective-loop-improves-and-identity-preserves", reflective_loop},
      {"error-taxonomy-and-retry-log", error_taxonomy},
      {"determinism-across-worker-counts", determinism},
      {"export-golden-file", golden_export},
      {"cli-evaluate-hand-computed-macro", cli_evaluate},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s%s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.empty() ? "" : " - ",
                o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
