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
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// Prompt construction for the Annotator and Reviewer roles and parsing of
// their JSON replies.
namespace annoloop::agents {

struct ExamplePair {
  std::string source_text;
  std::string gold_tagged;
};

struct ZeroShot {};
struct FewShot {
  std::vector<ExamplePair> examples;
};
struct FullContextCodebook {
  std::string codebook_text;
};
using BaseStyle = std::variant<ZeroShot, FewShot, FullContextCodebook>;

// The tuned model id replaces the annotator's model; prompts follow base_style.
struct FineTuned {
  std::string tuned_model_id;
  BaseStyle base_style = ZeroShot{};
};

using Paradigm = std::variant<ZeroShot, FewShot, FullContextCodebook, FineTuned>;

std::string_view paradigm_name(const Paradigm& p) noexcept;

// Prompt shape of a paradigm (FineTuned resolves to its base style).
BaseStyle prompt_style(const Paradigm& p);

// Throws Error(kConfigError): empty example list or codebook, empty tuned
// model id, or an example whose gold text does not tokenize like its source.
void validate(const Paradigm& p, std::string_view label);

enum class Schema { kAnnotator, kReviewer };

struct PromptBundle {
  std::string system_instruction;
  std::string user_message;
  Schema schema = Schema::kAnnotator;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Placeholders: {{TEXT}} {{LABEL}} {{CODEBOOK}} {{EXAMPLES}} {{ANNOTATED}}
// {{REASONING}}. {{CODEBOOK}} and {{EXAMPLES}} expand to whole sections, or
// to nothing when the paradigm carries no codebook or examples. Substitution is
// a single pass, so placeholder-like text inside inserted content is inert.
struct PromptTemplates {
  std::string annotator_system;
  std::string annotator_user;
  std::string reviewer_system;
  std::string reviewer_user;

  static PromptTemplates defaults();
  // Reads annotator_system.txt, annotator_user.txt, reviewer_system.txt and
  // reviewer_user.txt from `dir`; missing files keep the default.
  static PromptTemplates load(const std::filesystem::path& dir);

  friend bool operator==(const PromptTemplates&, const PromptTemplates&) = default;
};

std::string expand_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string_view, std::string_view>>& values);

struct AnnotatorResponse {
  std::string reasoning;
  std::string annotated_text;

  friend bool operator==(const AnnotatorResponse&, const AnnotatorResponse&) = default;
};

struct ReviewerResponse {
  std::string critique;
  std::string revised_text;

  friend bool operator==(const ReviewerResponse&, const ReviewerResponse&) = default;
};

struct ReviewerPromptOptions {
  bool include_reasoning = true;
};

PromptBundle build_annotator_prompt(std::string_view sample_text, const Paradigm& paradigm,
                                    std::string_view label,
                                    const PromptTemplates& templates = PromptTemplates::defaults());

PromptBundle build_reviewer_prompt(std::string_view sample_text,
                                   const AnnotatorResponse& annotator_output,
                                   const Paradigm& paradigm, std::string_view label,
                                   const PromptTemplates& templates = PromptTemplates::defaults(),
                                   ReviewerPromptOptions options = {});

// Strips optional code fences, parses one JSON object and matches keys
// case-insensitively with spaces, hyphens and underscores treated alike
// ("Revised Text" == "revised_text"). Extra keys are ignored.
// Throws Error(kMalformedJson) or Error(kSchemaMismatch).
AnnotatorResponse parse_annotator_response(std::string_view raw);
ReviewerResponse parse_reviewer_response(std::string_view raw);
std::variant<AnnotatorResponse, ReviewerResponse> parse_agent_json(std::string_view raw,
                                                                  Schema schema);

// True when braces/brackets or a string literal are still open at the end.
bool json_unbalanced(std::string_view text) noexcept;

// Canonical JSON for a response (used by tests and fixtures).
std::string render_response(const AnnotatorResponse& r);
std::string render_response(const ReviewerResponse& r);

}  // namespace annoloop::agents
