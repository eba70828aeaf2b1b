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
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "annoloop/evaluator.hpp"
#include "annoloop/providers.hpp"
#include "annoloop/tagspan.hpp"
#include "annoloop/workflow.hpp"

// Batch orchestration: a worker pool over the dataset, live events, the
// persistent session log and the CSV export.
namespace annoloop::runner {

struct RunConfig {
  agents::ExperimentConfig experiment;
  int workers = 4;
  double baseline_f1 = 0.5;
  std::filesystem::path output_dir = "runs";
  std::string run_id;
};

// Throws Error(kConfigError).
void validate(const RunConfig& config);

// Letters, digits, '.', '_' and '-', not starting with '.'.
bool is_valid_run_id(std::string_view id) noexcept;

std::string default_run_id();

using TransportFactory =
    std::function<std::shared_ptr<providers::Transport>(const providers::ModelSpec&)>;

struct Clients {
  std::shared_ptr<providers::ChatClient> annotator;
  std::shared_ptr<providers::ChatClient> reviewer;  // null when reviewer_mode is off
};

Clients make_clients(const agents::ExperimentConfig& config,
                     const TransportFactory& factory = providers::make_transport,
                     providers::ClientOptions options = {});

struct SampleEvent {
  std::size_t index = 0;
  std::string id;
  std::optional<double> f1_pre;
  std::optional<double> f1_post;
  std::string status;  // status_label()
  std::size_t completed = 0;
  std::size_t total = 0;
  std::optional<eval::MacroAverage> macro_pre;
  std::optional<eval::MacroAverage> macro_post;
  tagspan::SpanDoc final_doc;  // parsed final annotation for highlighting
  std::string reasoning;
  std::string critique;
};

struct SummaryEvent {
  std::string run_id;
  std::size_t completed = 0;
  std::size_t total = 0;
  std::optional<eval::MacroAverage> macro_pre;
  std::optional<eval::MacroAverage> macro_post;
  eval::SampleMetrics micro_pre;
  eval::SampleMetrics micro_post;
  std::map<std::string, std::size_t> status_counts;
  bool complete = true;
};

using RunEvent = std::variant<SampleEvent, SummaryEvent>;
using EventSink = std::function<void(const RunEvent&)>;

struct RunSummary {
  std::string run_id;
  nlohmann::json config_snapshot;
  std::vector<agents::SampleOutcome> outcomes;  // dataset order
  std::optional<eval::MacroAverage> macro_pre;
  std::optional<eval::MacroAverage> macro_post;
  eval::SampleMetrics micro_pre;
  eval::SampleMetrics micro_post;
  std::map<std::string, std::size_t> status_counts;  // keyed by SampleStatus name
  std::size_t total = 0;
  bool complete = true;  // false when cancelled before every sample ran
  std::int64_t started_at_ms = 0;
  std::int64_t finished_at_ms = 0;
};

// Recomputes averages and counts from outcomes.
void finalize_aggregates(RunSummary& summary);

inline constexpr std::string_view kSessionLogName = "session.jsonl";
inline constexpr std::string_view kSummaryName = "summary.json";
inline constexpr std::string_view kExportName = "export.csv";

std::filesystem::path run_directory(const RunConfig& config);

// Runs every sample with at most `workers` in flight, emitting one SampleEvent
// per completion and a final SummaryEvent. The session log is appended as
// attempts happen; summary.json and export.csv are written at the end. A stop
// request lets in-flight samples finish and skips the rest.
// Throws Error only for configuration or I/O problems.
RunSummary run_batch(const RunConfig& config, const std::vector<Sample>& dataset,
                     const Clients& clients, const EventSink& events = {},
                     std::stop_token stop = {});

inline constexpr std::string_view kExportHeader =
    "id,text,gold,annotator_text,annotator_reasoning,reviewer_critique,final_text,"
    "p_pre,r_pre,f1_pre,p_post,r_post,f1_post,status";

std::string export_csv(const RunSummary& summary);

// Writes summary.json and export.csv into `dir`.
void persist_summary(const RunSummary& summary, const std::filesystem::path& dir);

// Throws Error(kIoError) or Error(kConfigError) for a corrupt file.
RunSummary load_summary(const std::filesystem::path& summary_json);

// --- session log ---------------------------------------------------------

// Append-only JSON-lines writer shared by all workers. Timestamps are clamped
// so they never decrease within a file.
class SessionLogWriter {
 public:
  explicit SessionLogWriter(std::filesystem::path path);
  ~SessionLogWriter();

  SessionLogWriter(const SessionLogWriter&) = delete;
  SessionLogWriter& operator=(const SessionLogWriter&) = delete;

  void append(agents::LogEntry entry);
  std::size_t entries_written() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::FILE* file_ = nullptr;
  std::int64_t last_ts_ = 0;
  std::size_t written_ = 0;
};

enum class LogWarning { kTruncatedTail };

struct LogReadResult {
  std::vector<agents::LogEntry> entries;
  std::vector<LogWarning> warnings;
};

// A final line that does not parse (a crash mid-write) is dropped with
// kTruncatedTail. Corruption anywhere else throws Error(kIoError).
LogReadResult read_log(const std::filesystem::path& path);
LogReadResult read_log(const std::filesystem::path& output_dir, const std::string& run_id);

}  // namespace annoloop::runner
