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

#include "annoloop/workflow.hpp"

#include <algorithm>
#include <chrono>
#include <variant>
#include <vector>

#include "annoloop/error.hpp"

namespace annoloop::agents {
namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

struct CallOutcome {
  std::optional<std::variant<AnnotatorResponse, ReviewerResponse>> parsed;
  std::optional<providers::ErrorClass> error_class;
  std::string detail;
};

// Calls the model and parses the reply. Log entries are held back until the
// parse result is known so that a reply that does not parse is logged as
// MalformedResponse on the attempt that produced it.
CallOutcome call_agent(providers::ChatClient& client, const PromptBundle& prompt,
                       AgentRole role, const Sample& sample, const ExperimentConfig& config,
                       std::string_view run_id, const LogSink& log) {
  providers::ChatRequest req{prompt.system_instruction, prompt.user_message,
                             client.spec().json_mode};
  std::vector<LogEntry> pending;
  const auto observer = [&](const providers::AttemptRecord& rec) {
    if (!log) return;
    LogEntry e;
    e.timestamp_ms = now_ms();
    e.run_id = std::string(run_id);
    e.sample_id = sample.id;
    e.role = role;
    e.attempt = rec.attempt;
    e.request_system = req.system;
    e.request_user = req.user;
    if (rec.response) {
      e.raw_response = rec.response->wire_body.empty() ? rec.response->body_text
                                                       : rec.response->wire_body;
      e.http_status = rec.response->http_status;
      e.prompt_tokens = rec.response->prompt_tokens;
      e.output_tokens = rec.response->output_tokens;
    }
    if (rec.error) {
      e.error_class = rec.error->error_class;
      e.error_detail = rec.error->detail;
    }
    pending.push_back(std::move(e));
  };

  CallOutcome out;
  try {
    auto result = client.complete(req, config.retry, observer);
    if (result.ok()) {
      out.parsed = parse_agent_json(result.response->body_text, prompt.schema);
    } else {
      out.error_class = result.error->error_class;
      out.detail = result.error->detail;
    }
  } catch (const Error& e) {
    out.error_class = providers::ErrorClass::kMalformedResponse;
    out.detail = std::string(to_string(e.code())) + ": " + e.what();
    if (!pending.empty() && !pending.back().error_class) {
      pending.back().error_class = out.error_class;
      pending.back().error_detail = out.detail;
    }
  }
  for (auto& e : pending) log(std::move(e));
  return out;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  validate(config.paradigm, config.label);
  providers::validate(effective_annotator_spec(config));
  providers::validate(config.retry);
  if (config.reviewer_mode) {
    if (!config.reviewer) {
      throw Error(ErrorCode::kConfigError, "reviewer_mode is on but no reviewer model is set");
    }
    providers::validate(*config.reviewer);
  }
}

providers::ModelSpec effective_annotator_spec(const ExperimentConfig& config) {
  auto spec = config.annotator;
  if (const auto* t = std::get_if<FineTuned>(&config.paradigm)) spec.model_id = t->tuned_model_id;
  return spec;
}

std::string_view to_string(SampleStatus s) noexcept {
  switch (s) {
    case SampleStatus::kOk: return "Ok";
    case SampleStatus::kReviewFailed: return "ReviewFailed";
    case SampleStatus::kFailed: return "Failed";
    case SampleStatus::kSkippedEmptyGold: return "SkippedEmptyGold";
  }
  return "Failed";
}

std::optional<SampleStatus> sample_status_from_string(std::string_view s) noexcept {
  for (auto v : {SampleStatus::kOk, SampleStatus::kReviewFailed, SampleStatus::kFailed,
                 SampleStatus::kSkippedEmptyGold}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string_view to_string(AgentRole r) noexcept {
  return r == AgentRole::kAnnotator ? "Annotator" : "Reviewer";
}

std::optional<AgentRole> agent_role_from_string(std::string_view s) noexcept {
  if (s == "Annotator") return AgentRole::kAnnotator;
  if (s == "Reviewer") return AgentRole::kReviewer;
  return std::nullopt;
}

std::string SampleOutcome::final_text() const {
  if (reviewer_response) return reviewer_response->revised_text;
  if (annotator_response) return annotator_response->annotated_text;
  return {};
}

std::string status_label(const SampleOutcome& outcome) {
  std::string out(to_string(outcome.status));
  if (outcome.error_class &&
      (outcome.status == SampleStatus::kFailed || outcome.status == SampleStatus::kReviewFailed)) {
    out += "(" + std::string(providers::to_string(*outcome.error_class)) + ")";
  }
  return out;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

SampleOutcome run_sample(const Sample& sample, const ExperimentConfig& config,
                         providers::ChatClient& annotator, providers::ChatClient* reviewer,
                         const LogSink& log, std::string_view run_id) {
  SampleOutcome out;
  out.sample = sample;
  if (is_blank(sample.gold_tagged)) {
    out.status = SampleStatus::kSkippedEmptyGold;
    return out;
  }
  if (config.reviewer_mode && reviewer == nullptr) {
    throw Error(ErrorCode::kConfigError, "reviewer_mode is on but no reviewer client was given");
  }
  const tagspan::LabelSet labels{config.label};

  const auto annotate_prompt =
      build_annotator_prompt(sample.text, config.paradigm, config.label, config.templates);
  auto first = call_agent(annotator, annotate_prompt, AgentRole::kAnnotator, sample, config,
                          run_id, log);
  if (!first.parsed) {
    out.status = SampleStatus::kFailed;
    out.error_class = first.error_class;
    out.error_detail = std::move(first.detail);
    return out;
  }
  out.annotator_response = std::get<AnnotatorResponse>(std::move(*first.parsed));
  out.metrics_pre =
      eval::evaluate_pair(sample.gold_tagged, out.annotator_response->annotated_text, labels);

  if (!config.reviewer_mode) {
    out.metrics_post = out.metrics_pre;
    out.status = SampleStatus::kOk;
    return out;
  }

  const auto review_prompt = build_reviewer_prompt(
      sample.text, *out.annotator_response, config.paradigm, config.label, config.templates,
      ReviewerPromptOptions{config.include_reasoning_in_review});
  auto second =
      call_agent(*reviewer, review_prompt, AgentRole::kReviewer, sample, config, run_id, log);
  const auto review_failed = [&](providers::ErrorClass cls, std::string detail) {
    out.status = SampleStatus::kReviewFailed;
    out.error_class = cls;
    out.error_detail = std::move(detail);
    out.metrics_post = out.metrics_pre;
    return out;
  };
  if (!second.parsed) return review_failed(*second.error_class, std::move(second.detail));
  out.reviewer_response = std::get<ReviewerResponse>(std::move(*second.parsed));
  out.metrics_post =
      eval::evaluate_pair(sample.gold_tagged, out.reviewer_response->revised_text, labels);
  out.status = SampleStatus::kOk;
  return out;
}

}  // namespace annoloop::agents
