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

#include "annoloop/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <exception>
#include <random>
#include <thread>

#include "annoloop/csv.hpp"
#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/serialization.hpp"

namespace annoloop::runner {
namespace {

std::vector<eval::SampleMetrics> collect(const std::vector<agents::SampleOutcome>& outcomes,
                                         bool post) {
  std::vector<eval::SampleMetrics> out;
  for (const auto& o : outcomes) {
    if (!o.has_metrics()) continue;
    const auto& m = post ? o.metrics_post : o.metrics_pre;
    if (m) out.push_back(*m);
  }
  return out;
}

std::string metric_cell(const std::optional<eval::SampleMetrics>& m, double eval::SampleMetrics::*f) {
  return m ? eval::format_metric((*m).*f) : std::string{};
}

}  // namespace

void validate(const RunConfig& config) {
  agents::validate(config.experiment);
  if (config.workers <= 0) throw Error(ErrorCode::kConfigError, "workers must be positive");
  if (!(config.baseline_f1 >= 0.0 && config.baseline_f1 <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "baseline_f1 must lie in [0,1]");
  }
  if (!is_valid_run_id(config.run_id)) {
    throw Error(ErrorCode::kConfigError, "invalid run_id '" + config.run_id + "'");
  }
}

bool is_valid_run_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
  });
}

std::string default_run_id() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "run-%04d%02d%02d-%02d%02d%02d-%04x", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<unsigned>(std::random_device{}() & 0xFFFF));
  return buf;
}

Clients make_clients(const agents::ExperimentConfig& config, const TransportFactory& factory,
                     providers::ClientOptions options) {
  Clients c;
  const auto annotator_spec = agents::effective_annotator_spec(config);
  c.annotator = std::make_shared<providers::ChatClient>(annotator_spec, factory(annotator_spec),
                                                        options);
  if (config.reviewer_mode && config.reviewer) {
    c.reviewer =
        std::make_shared<providers::ChatClient>(*config.reviewer, factory(*config.reviewer), options);
  }
  return c;
}

std::filesystem::path run_directory(const RunConfig& config) {
  return config.output_dir / config.run_id;
}

void finalize_aggregates(RunSummary& summary) {
  const auto pre = collect(summary.outcomes, false);
  const auto post = collect(summary.outcomes, true);
  summary.macro_pre = eval::try_macro_average(pre);
  summary.macro_post = eval::try_macro_average(post);
  summary.micro_pre = eval::micro_average(pre);
  summary.micro_post = eval::micro_average(post);
  summary.status_counts.clear();
  for (const auto& o : summary.outcomes) ++summary.status_counts[std::string(to_string(o.status))];
}

RunSummary run_batch(const RunConfig& config, const std::vector<Sample>& dataset,
                     const Clients& clients, const EventSink& events, std::stop_token stop) {
  validate(config);
  if (dataset.empty()) throw Error(ErrorCode::kConfigError, "dataset is empty");
  if (!clients.annotator || (config.experiment.reviewer_mode && !clients.reviewer)) {
    throw Error(ErrorCode::kConfigError, "missing model client for the configured agents");
  }

  const auto dir = run_directory(config);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  SessionLogWriter log(dir / kSessionLogName);
  const agents::LogSink sink = [&log](agents::LogEntry e) { log.append(std::move(e)); };

  RunSummary summary;
  summary.run_id = config.run_id;
  // Execution-only settings are left out so that the snapshot, like the
  // results, does not depend on how the run was scheduled.
  summary.config_snapshot = run_config_to_json(config);
  summary.config_snapshot.erase("workers");
  summary.config_snapshot.erase("output_dir");
  summary.total = dataset.size();
  summary.started_at_ms = agents::now_ms();

  const tagspan::LabelSet labels{config.experiment.label};
  std::vector<std::optional<agents::SampleOutcome>> slots(dataset.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;  // guards slots, running lists, event emission
  std::size_t completed = 0;
  std::vector<eval::SampleMetrics> running_pre;
  std::vector<eval::SampleMetrics> running_post;
  std::exception_ptr failure;
  std::atomic<bool> abort{false};

  const auto worker = [&] {
    while (!stop.stop_requested() && !abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      try {
        auto outcome = agents::run_sample(dataset[i], config.experiment, *clients.annotator,
                                          clients.reviewer.get(), sink, config.run_id);
        std::lock_guard lock(mu);
        ++completed;
        SampleEvent ev;
        ev.index = dataset[i].index;
        ev.id = dataset[i].id;
        ev.status = agents::status_label(outcome);
        ev.completed = completed;
        ev.total = dataset.size();
        if (outcome.has_metrics()) {
          ev.f1_pre = outcome.metrics_pre->f1;
          ev.f1_post = outcome.metrics_post->f1;
          running_pre.push_back(*outcome.metrics_pre);
          running_post.push_back(*outcome.metrics_post);
        }
        ev.macro_pre = eval::try_macro_average(running_pre);
        ev.macro_post = eval::try_macro_average(running_post);
        ev.final_doc = tagspan::parse_tagged(outcome.final_text(), labels);
        if (outcome.annotator_response) ev.reasoning = outcome.annotator_response->reasoning;
        if (outcome.reviewer_response) ev.critique = outcome.reviewer_response->critique;
        slots[i] = std::move(outcome);
        if (events) events(RunEvent{std::move(ev)});
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
        return;
      }
    }
  };

  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.workers), dataset.size());
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (auto& slot : slots) {
    if (slot) summary.outcomes.push_back(std::move(*slot));
  }
  summary.complete = summary.outcomes.size() == dataset.size();
  finalize_aggregates(summary);
  summary.finished_at_ms = agents::now_ms();
  persist_summary(summary, dir);

  if (events) {
    SummaryEvent done;
    done.run_id = summary.run_id;
    done.completed = summary.outcomes.size();
    done.total = summary.total;
    done.macro_pre = summary.macro_pre;
    done.macro_post = summary.macro_post;
    done.micro_pre = summary.micro_pre;
    done.micro_post = summary.micro_post;
    done.status_counts = summary.status_counts;
    done.complete = summary.complete;
    events(RunEvent{std::move(done)});
  }
  return summary;
}

std::string export_csv(const RunSummary& summary) {
  std::string out(kExportHeader);
  out.push_back('\n');
  using M = eval::SampleMetrics;
  for (const auto& o : summary.outcomes) {
    csv::Row row{o.sample.id,
                 o.sample.text,
                 o.sample.gold_tagged,
                 o.annotator_response ? o.annotator_response->annotated_text : "",
                 o.annotator_response ? o.annotator_response->reasoning : "",
                 o.reviewer_response ? o.reviewer_response->critique : "",
                 o.final_text(),
                 metric_cell(o.metrics_pre, &M::precision),
                 metric_cell(o.metrics_pre, &M::recall),
                 metric_cell(o.metrics_pre, &M::f1),
                 metric_cell(o.metrics_post, &M::precision),
                 metric_cell(o.metrics_post, &M::recall),
                 metric_cell(o.metrics_post, &M::f1),
                 agents::status_label(o)};
    out += csv::format_row(row);
  }
  return out;
}

void persist_summary(const RunSummary& summary, const std::filesystem::path& dir) {
  write_text_file(dir / kSummaryName,
                  nlohmann::json(summary).dump(2, ' ', false,
                                               nlohmann::json::error_handler_t::replace) +
                      "\n");
  write_text_file(dir / kExportName, export_csv(summary));
}

RunSummary load_summary(const std::filesystem::path& summary_json) {
  const auto text = read_text_file(summary_json);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kConfigError, summary_json.string() + " is not valid JSON");
  }
  try {
    return j.get<RunSummary>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, summary_json.string() + ": " + e.what());
  }
}

}  // namespace annoloop::runner
