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

#include <filesystem>

#include <nlohmann/json.hpp>

#include "annoloop/agents.hpp"
#include "annoloop/evaluator.hpp"
#include "annoloop/providers.hpp"
#include "annoloop/runner.hpp"
#include "annoloop/tagspan.hpp"
#include "annoloop/workflow.hpp"

// JSON forms of the domain types. Field names here are part of the on-disk
// and wire formats (summary.json, session.jsonl, service payloads) and must
// stay stable. Decoding failures throw Error(kConfigError).
namespace annoloop {
void to_json(nlohmann::json& j, const Sample& s);
void from_json(const nlohmann::json& j, Sample& s);
}  // namespace annoloop

namespace annoloop::tagspan {
void to_json(nlohmann::json& j, const Span& s);
void to_json(nlohmann::json& j, const SpanDoc& d);
}  // namespace annoloop::tagspan

namespace annoloop::eval {
void to_json(nlohmann::json& j, const SampleMetrics& m);
void from_json(const nlohmann::json& j, SampleMetrics& m);
void to_json(nlohmann::json& j, const MacroAverage& m);
void from_json(const nlohmann::json& j, MacroAverage& m);
}  // namespace annoloop::eval

namespace annoloop::providers {
void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);
void to_json(nlohmann::json& j, const RetryPolicy& p);
void from_json(const nlohmann::json& j, RetryPolicy& p);
}  // namespace annoloop::providers

namespace annoloop::agents {
void to_json(nlohmann::json& j, const SampleOutcome& o);
void from_json(const nlohmann::json& j, SampleOutcome& o);
void to_json(nlohmann::json& j, const LogEntry& e);
void from_json(const nlohmann::json& j, LogEntry& e);

nlohmann::json paradigm_to_json(const Paradigm& p);
// "examples_file" and "codebook_file" are resolved against base_dir.
Paradigm paradigm_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

nlohmann::json experiment_to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir);
}  // namespace annoloop::agents

namespace annoloop::runner {
nlohmann::json run_config_to_json(const RunConfig& c);
// Relative paths (mock fixtures, example/codebook files, templates_dir,
// output_dir) are resolved against base_dir.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

void to_json(nlohmann::json& j, const RunSummary& s);
void from_json(const nlohmann::json& j, RunSummary& s);

// Single-line objects with a "type" discriminator: "sample" or "summary".
nlohmann::json event_to_json(const RunEvent& e);
}  // namespace annoloop::runner
