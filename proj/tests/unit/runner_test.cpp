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

#include <gtest/gtest.h>

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "annoloop/csv.hpp"
#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/runner.hpp"
#include "annoloop/serialization.hpp"
#include "test_support.hpp"

namespace annoloop::runner {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig load_config(const fs::path& dir, const std::string& file, const fs::path& out,
                      const std::string& run_id) {
  auto c = run_config_from_json(json::parse(read_text_file(dir / file)), dir);
  c.output_dir = out;
  c.run_id = run_id;
  return c;
}

struct Fixture {
  explicit Fixture(const std::string& config_file, const std::string& run_id = "run-a",
                   const std::string& dir = "reflective")
      : base(testing::data_dir() / dir),
        config(load_config(base, config_file, out.path(), run_id)),
        dataset(load_dataset_csv(base / "dataset.csv")) {}

  RunSummary run(const TransportFactory& factory = providers::make_transport,
                 const EventSink& sink = {}, std::stop_token stop = {}) {
    return run_batch(config, dataset, make_clients(config.experiment, factory, sleeps.options()),
                     sink, stop);
  }

  fs::path run_dir() const { return run_directory(config); }

  testing::TempDir out;
  testing::SleepRecorder sleeps;
  fs::path base;
  RunConfig config;
  std::vector<Sample> dataset;
};

json summary_without_clock(const fs::path& dir) {
  auto j = json::parse(read_text_file(dir / kSummaryName));
  j.erase("started_at_ms");
  j.erase("finished_at_ms");
  return j;
}

TEST(RunBatch, EventsAndPersistedFiles) {
  Fixture f("config_reviewer.json");
  std::vector<RunEvent> events;
  std::mutex mu;
  const auto summary = f.run(providers::make_transport, [&](const RunEvent& e) {
    std::lock_guard lock(mu);
    events.push_back(e);
  });

  ASSERT_EQ(events.size(), 21u);
  std::size_t last = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    ASSERT_TRUE(std::holds_alternative<SampleEvent>(events[i]));
    const auto& ev = std::get<SampleEvent>(events[i]);
    EXPECT_GT(ev.completed, last);
    last = ev.completed;
    EXPECT_EQ(ev.total, 20u);
  }
  ASSERT_TRUE(std::holds_alternative<SummaryEvent>(events.back()));
  const auto& done = std::get<SummaryEvent>(events.back());
  EXPECT_TRUE(done.complete);
  EXPECT_EQ(done.completed, 20u);
  EXPECT_EQ(done.macro_post, summary.macro_post);

  EXPECT_TRUE(fs::exists(f.run_dir() / kSummaryName));
  EXPECT_TRUE(fs::exists(f.run_dir() / kExportName));
  EXPECT_EQ(summary.outcomes.size(), 20u);
  EXPECT_EQ(summary.status_counts.at("Ok"), 20u);
  for (std::size_t i = 0; i < summary.outcomes.size(); ++i) {
    EXPECT_EQ(summary.outcomes[i].sample.index, i);
  }
}

TEST(RunBatch, ReviewerImprovesMacroF1) {
  Fixture f("config_reviewer.json");
  const auto s = f.run();
  ASSERT_TRUE(s.macro_pre && s.macro_post);
  EXPECT_EQ(s.macro_pre->samples, 20u);
  EXPECT_GT(s.macro_post->f1, s.macro_pre->f1);
}

TEST(RunBatch, IdentityReviewerLeavesMacroUnchanged) {
  Fixture f("config_identity.json");
  const auto s = f.run();
  ASSERT_TRUE(s.macro_pre && s.macro_post);
  EXPECT_EQ(*s.macro_post, *s.macro_pre);
}

TEST(RunBatch, OneLogEntryPerAttempt) {
  Fixture f("config_reviewer.json");
  f.run();
  const auto log = read_log(f.config.output_dir, f.config.run_id);
  EXPECT_TRUE(log.warnings.empty());
  EXPECT_EQ(log.entries.size(), 40u);
  std::size_t reviewer = 0;
  for (const auto& e : log.entries) {
    EXPECT_EQ(e.run_id, "run-a");
    if (e.role == agents::AgentRole::kReviewer) ++reviewer;
  }
  EXPECT_EQ(reviewer, 20u);
}

TEST(RunBatch, WorkerCountDoesNotChangeResults) {
  Fixture one("config_reviewer.json", "same");
  one.config.workers = 1;
  one.run();
  Fixture four("config_reviewer.json", "same");
  four.config.workers = 4;
  four.run();
  EXPECT_EQ(read_text_file(one.run_dir() / kExportName),
            read_text_file(four.run_dir() / kExportName));
  EXPECT_EQ(summary_without_clock(one.run_dir()), summary_without_clock(four.run_dir()));
}

TEST(RunBatch, PersistentQuotaFailureIsIsolated) {
  Fixture f("config_reviewer.json");
  const std::string victim = f.dataset[4].text;
  const TransportFactory factory = [&](const providers::ModelSpec& spec) {
    auto script = providers::load_mock_script(spec.base_url);
    if (spec.model_id == "scripted-annotator") {
      script.faults[victim].status_code = 429;
      script.faults[victim].status_times = -1;
    }
    return std::make_shared<providers::MockTransport>(std::move(script));
  };
  const auto s = f.run(factory);
  ASSERT_EQ(s.outcomes.size(), 20u);
  for (const auto& o : s.outcomes) {
    if (o.sample.text == victim) {
      EXPECT_EQ(agents::status_label(o), "Failed(QuotaExceeded)");
    } else {
      EXPECT_EQ(o.status, agents::SampleStatus::kOk) << o.sample.id;
    }
  }
  EXPECT_EQ(s.macro_post->samples, 19u);
  // 3 failed attempts + 19 annotator + 19 reviewer
  EXPECT_EQ(read_log(f.config.output_dir, f.config.run_id).entries.size(), 41u);
}

TEST(RunBatch, TruncationFailsOnlyThatSample) {
  Fixture f("config_reviewer.json");
  const std::string victim = f.dataset[0].text;
  const TransportFactory factory = [&](const providers::ModelSpec& spec) {
    auto script = providers::load_mock_script(spec.base_url);
    if (spec.model_id == "scripted-annotator") script.faults[victim].truncate_after = 30;
    return std::make_shared<providers::MockTransport>(std::move(script));
  };
  const auto s = f.run(factory);
  EXPECT_EQ(agents::status_label(s.outcomes[0]), "Failed(Truncated)");
  EXPECT_EQ(s.status_counts.at("Failed"), 1u);
  EXPECT_EQ(s.status_counts.at("Ok"), 19u);
}

// Inline three-sample corpus with per-sample F1 of 1, 0.5 and 0 plus an
// empty-gold row.
struct InlineRun {
  InlineRun() {
    config.experiment.annotator = testing::mock_spec("inline");
    config.output_dir = out.path();
    config.run_id = "inline";
    config.workers = 2;
    dataset = {
        {0, "s1", "x y", "<Metaphor>x</Metaphor> y"},
        {1, "s2", "a b c", "<Metaphor>a</Metaphor> <Metaphor>b</Metaphor> c"},
        {2, "s3", "a b", "<Metaphor>a</Metaphor> b"},
        {3, "s4", "nothing here", ""},
    };
    script.fixtures["x y"] = testing::annotator_body("r1", "<Metaphor>x</Metaphor> y");
    script.fixtures["a b c"] =
        testing::annotator_body("r2", "<Metaphor>a</Metaphor> b <Metaphor>c</Metaphor>");
    script.fixtures["a b"] = testing::annotator_body("r3", "a <Metaphor>b</Metaphor>");
  }

  RunSummary run() {
    const TransportFactory factory = [this](const providers::ModelSpec&) {
      return std::make_shared<providers::MockTransport>(script);
    };
    return run_batch(config, dataset, make_clients(config.experiment, factory));
  }

  testing::TempDir out;
  RunConfig config;
  std::vector<Sample> dataset;
  providers::MockScript script;
};

TEST(RunBatch, MacroIsUnweightedMeanOverEvaluableSamples) {
  InlineRun r;
  const auto s = r.run();
  ASSERT_EQ(s.outcomes.size(), 4u);
  EXPECT_EQ(s.outcomes[0].metrics_pre->f1, 1.0);
  EXPECT_EQ(s.outcomes[1].metrics_pre->f1, 0.5);
  EXPECT_EQ(s.outcomes[2].metrics_pre->f1, 0.0);
  EXPECT_EQ(agents::status_label(s.outcomes[3]), "SkippedEmptyGold");
  ASSERT_TRUE(s.macro_pre);
  EXPECT_EQ(s.macro_pre->samples, 3u);
  EXPECT_DOUBLE_EQ(s.macro_pre->f1, 0.5);
  EXPECT_DOUBLE_EQ(s.macro_pre->precision, 0.5);
  EXPECT_DOUBLE_EQ(s.macro_pre->recall, 0.5);
  // reviewer off: post mirrors pre
  EXPECT_EQ(s.macro_post, s.macro_pre);
  EXPECT_EQ(s.status_counts.at("SkippedEmptyGold"), 1u);
}

TEST(ExportCsv, ReparsesWithOneRowPerSample) {
  InlineRun r;
  r.run();
  const auto rows = csv::parse(read_text_file(run_directory(r.config) / kExportName));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(csv::format_row(rows[0].fields), std::string(kExportHeader) + "\n");
  for (const auto& row : rows) EXPECT_EQ(row.fields.size(), 14u);
  EXPECT_EQ(rows[4].fields[0], "s4");
  EXPECT_EQ(rows[4].fields[9], "");
  EXPECT_EQ(rows[4].fields[13], "SkippedEmptyGold");
  EXPECT_EQ(rows[2].fields[9], "0.5000");
  EXPECT_EQ(rows[2].fields[6], "<Metaphor>a</Metaphor> b <Metaphor>c</Metaphor>");
}

TEST(ExportCsv, GoldenFile) {
  Fixture f("config.json", "golden", "golden");
  f.run();
  EXPECT_EQ(read_text_file(f.run_dir() / kExportName),
            read_text_file(f.base / "export.csv"));
}

TEST(ExportCsv, ReloadedSummaryReproducesExportBytes) {
  Fixture f("config_reviewer.json");
  f.run();
  const auto reloaded = load_summary(f.run_dir() / kSummaryName);
  EXPECT_EQ(export_csv(reloaded), read_text_file(f.run_dir() / kExportName));
  EXPECT_EQ(reloaded.outcomes.size(), 20u);
}

TEST(RunBatch, StopRequestSkipsRemainingSamples) {
  Fixture f("config_reviewer.json");
  f.config.workers = 1;
  std::stop_source stop;
  std::optional<SummaryEvent> done;
  const auto s = f.run(
      providers::make_transport,
      [&](const RunEvent& e) {
        stop.request_stop();
        if (const auto* d = std::get_if<SummaryEvent>(&e)) done = *d;
      },
      stop.get_token());
  EXPECT_FALSE(s.complete);
  EXPECT_LT(s.outcomes.size(), 20u);
  EXPECT_GE(s.outcomes.size(), 1u);
  ASSERT_TRUE(done);
  EXPECT_FALSE(done->complete);
  EXPECT_EQ(load_summary(f.run_dir() / kSummaryName).complete, false);
}

TEST(RunBatch, RejectsInvalidConfig) {
  Fixture f("config_reviewer.json");
  const auto clients = make_clients(f.config.experiment);
  auto bad = f.config;
  bad.workers = 0;
  EXPECT_THROW(run_batch(bad, f.dataset, clients), Error);
  bad = f.config;
  bad.run_id = "../escape";
  EXPECT_THROW(run_batch(bad, f.dataset, clients), Error);
  bad = f.config;
  bad.baseline_f1 = 1.5;
  EXPECT_THROW(validate(bad), Error);
  EXPECT_THROW(run_batch(f.config, {}, clients), Error);
  EXPECT_FALSE(fs::exists(f.run_dir()));
}

TEST(RunId, Validity) {
  EXPECT_TRUE(is_valid_run_id("run-2024_01.a"));
  EXPECT_FALSE(is_valid_run_id(""));
  EXPECT_FALSE(is_valid_run_id(".hidden"));
  EXPECT_FALSE(is_valid_run_id("a/b"));
  EXPECT_TRUE(is_valid_run_id(default_run_id()));
}

agents::LogEntry entry(int i, std::int64_t ts) {
  agents::LogEntry e;
  e.timestamp_ms = ts;
  e.run_id = "r";
  e.sample_id = "s" + std::to_string(i);
  e.role = i % 2 ? agents::AgentRole::kReviewer : agents::AgentRole::kAnnotator;
  e.attempt = 1 + i % 3;
  e.request_system = "sys";
  e.request_user = "line\nbreak \"quoted\" \xC3\xA9";
  e.raw_response = "{\"x\":" + std::to_string(i) + "}";
  if (i % 5 == 0) {
    e.error_class = providers::ErrorClass::kQuotaExceeded;
    e.http_status = 429;
    e.error_detail = "slow down";
  } else {
    e.http_status = 200;
    e.prompt_tokens = i;
    e.output_tokens = 2 * i;
  }
  return e;
}

TEST(SessionLog, RoundTrip) {
  testing::TempDir dir;
  std::vector<agents::LogEntry> written;
  {
    SessionLogWriter w(dir / "log.jsonl");
    for (int i = 0; i < 100; ++i) {
      written.push_back(entry(i, 1000 + i));
      w.append(written.back());
    }
    EXPECT_EQ(w.entries_written(), 100u);
  }
  const auto r = read_log(dir / "log.jsonl");
  EXPECT_TRUE(r.warnings.empty());
  EXPECT_EQ(r.entries, written);
}

TEST(SessionLog, TimestampsNeverDecrease) {
  testing::TempDir dir;
  {
    SessionLogWriter w(dir / "log.jsonl");
    w.append(entry(1, 5000));
    w.append(entry(2, 4000));
    w.append(entry(3, 6000));
  }
  const auto r = read_log(dir / "log.jsonl");
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_EQ(r.entries[1].timestamp_ms, 5000);
  EXPECT_EQ(r.entries[2].timestamp_ms, 6000);
}

TEST(SessionLog, TruncatedTailIsDroppedWithWarning) {
  testing::TempDir dir;
  {
    SessionLogWriter w(dir / "log.jsonl");
    w.append(entry(1, 1));
    w.append(entry(2, 2));
  }
  {
    std::ofstream f(dir / "log.jsonl", std::ios::app | std::ios::binary);
    f << "{\"timestamp_ms\": 3, \"run_";
  }
  const auto r = read_log(dir / "log.jsonl");
  EXPECT_EQ(r.entries.size(), 2u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0], LogWarning::kTruncatedTail);
}

TEST(SessionLog, CorruptMiddleLineThrows) {
  testing::TempDir dir;
  {
    SessionLogWriter w(dir / "log.jsonl");
    w.append(entry(1, 1));
  }
  {
    std::ofstream f(dir / "log.jsonl", std::ios::app | std::ios::binary);
    f << "garbage\n";
  }
  {
    SessionLogWriter w(dir / "log.jsonl");
    w.append(entry(2, 2));
  }
  try {
    read_log(dir / "log.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(SessionLog, MissingFileIsIoError) {
  testing::TempDir dir;
  EXPECT_THROW(read_log(dir / "none.jsonl"), Error);
}

// The API key reaches the wire but never the run directory.
TEST(RunBatch, SecretNeverPersisted) {
  constexpr const char* kVar = "ANNOLOOP_TEST_RUN_KEY";
  const std::string secret = "sk-live-do-not-log-9f8e7d";
  ::setenv(kVar, secret.c_str(), 1);

  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const std::string user = body["messages"].back()["content"];
    const std::string content = agents::render_response(agents::AnnotatorResponse{
        "header was " + req.get_header_value("Authorization"), user});
    json reply = {{"choices", {{{"message", {{"content", content}}}, {"finish_reason", "stop"}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  testing::TempDir out;
  RunConfig c;
  c.experiment.annotator.kind = providers::ProviderKind::kOpenAICompatible;
  c.experiment.annotator.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  c.experiment.annotator.model_id = "m";
  c.experiment.annotator.api_key_ref = kVar;
  c.output_dir = out.path();
  c.run_id = "secret";
  c.workers = 2;
  const std::vector<Sample> data = {{0, "a", "One text.", "One <Metaphor>text</Metaphor>."},
                                    {1, "b", "Two text.", "<Metaphor>Two</Metaphor> text."}};
  const auto s = run_batch(c, data, make_clients(c.experiment));
  server.stop();
  th.join();
  ::unsetenv(kVar);

  ASSERT_EQ(s.outcomes.size(), 2u);
  EXPECT_EQ(s.outcomes[0].status, agents::SampleStatus::kOk);
  EXPECT_NE(s.outcomes[0].annotator_response->reasoning.find("[redacted]"), std::string::npos);
  std::size_t files = 0;
  for (const auto& p : fs::recursive_directory_iterator(out.path())) {
    if (!p.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(read_text_file(p.path()).find(secret), std::string::npos) << p.path();
  }
  EXPECT_EQ(files, 3u);
}

}  // namespace
}  // namespace annoloop::runner
