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
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "annoloop/agents.hpp"
#include "annoloop/evaluator.hpp"
#include "annoloop/providers.hpp"

namespace annoloop {

struct Sample {
  std::size_t index = 0;  // 0-based dataset order
  std::string id;
  std::string text;
  std::string gold_tagged;  // may be empty

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace annoloop

// The reflective loop for one sample: annotate, score, optionally review and
// score again.
namespace annoloop::agents {

struct ExperimentConfig {
  Paradigm paradigm = ZeroShot{};
  std::string label = std::string(tagspan::kDefaultLabel);
  providers::ModelSpec annotator;
  std::optional<providers::ModelSpec> reviewer;
  bool reviewer_mode = false;
  providers::RetryPolicy retry;
  bool include_reasoning_in_review = true;
  std::optional<std::string> templates_dir;
  PromptTemplates templates = PromptTemplates::defaults();
};

// Throws Error(kConfigError); a reviewer spec is required when reviewer_mode is on.
void validate(const ExperimentConfig& config);

// The annotator's spec with the tuned model id applied for FineTuned.
providers::ModelSpec effective_annotator_spec(const ExperimentConfig& config);

enum class SampleStatus { kOk, kReviewFailed, kFailed, kSkippedEmptyGold };
enum class AgentRole { kAnnotator, kReviewer };

std::string_view to_string(SampleStatus s) noexcept;
std::optional<SampleStatus> sample_status_from_string(std::string_view s) noexcept;
std::string_view to_string(AgentRole r) noexcept;
std::optional<AgentRole> agent_role_from_string(std::string_view s) noexcept;

struct SampleOutcome {
  Sample sample;
  std::optional<AnnotatorResponse> annotator_response;
  std::optional<ReviewerResponse> reviewer_response;
  std::optional<eval::SampleMetrics> metrics_pre;
  std::optional<eval::SampleMetrics> metrics_post;
  SampleStatus status = SampleStatus::kFailed;
  std::optional<providers::ErrorClass> error_class;
  std::string error_detail;

  // Reviewer's revision when present, else the annotator's text, else "".
  std::string final_text() const;
  bool has_metrics() const noexcept {
    return status == SampleStatus::kOk || status == SampleStatus::kReviewFailed;
  }
};

// "Ok", "SkippedEmptyGold", "Failed(Truncated)", "ReviewFailed(QuotaExceeded)".
std::string status_label(const SampleOutcome& outcome);

// One raw model interaction (one attempt).
struct LogEntry {
  std::int64_t timestamp_ms = 0;  // UTC, milliseconds since the epoch
  std::string run_id;
  std::string sample_id;
  AgentRole role = AgentRole::kAnnotator;
  int attempt = 1;
  std::string request_system;
  std::string request_user;
  std::string raw_response;
  std::optional<providers::ErrorClass> error_class;
  std::optional<int> http_status;
  std::string error_detail;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> output_tokens;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using LogSink = std::function<void(LogEntry)>;

std::int64_t now_ms();

// Never throws for model-side failures: they land in the outcome's status.
// `reviewer` may be null when reviewer_mode is off.
SampleOutcome run_sample(const Sample& sample, const ExperimentConfig& config,
                         providers::ChatClient& annotator, providers::ChatClient* reviewer,
                         const LogSink& log = {}, std::string_view run_id = {});

}  // namespace annoloop::agents
