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

#include "annoloop/agents.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "annoloop/error.hpp"
#include "annoloop/evaluator.hpp"
#include "annoloop/tagspan.hpp"

namespace annoloop::agents {
namespace {

using nlohmann::json;

// Kept byte-identical to the files under templates/ (checked by a unit test).
constexpr std::string_view kAnnotatorSystem = R"tmpl(You are an expert linguistic annotator performing sequence labeling.

Task: find every expression in the text supplied by the user that should be labeled {{LABEL}} and wrap each one in inline tags, like this: <{{LABEL}}>expression</{{LABEL}}>.
Copy the input text exactly, character for character, changing nothing except inserting tags. Do not nest tags and do not add any other markup.
{{CODEBOOK}}{{EXAMPLES}}
Respond with one JSON object and nothing else. It must have exactly these fields:
  "reasoning": a short justification of each tagging decision, citing the annotation guidelines;
  "annotated_text": the complete input text with the tags inserted.
)tmpl";

constexpr std::string_view kAnnotatorUser = R"tmpl({{TEXT}})tmpl";

constexpr std::string_view kReviewerSystem = R"tmpl(You are a senior reviewer supervising {{LABEL}} annotation.

You receive an original text and a first-pass annotation of it in which <{{LABEL}}>...</{{LABEL}}> tags mark the labeled expressions. Evaluate each label against the annotation guidelines: identify false positives (tags that should be removed) and missed instances (expressions that should have been tagged), and fix tag boundaries where needed.
{{CODEBOOK}}{{EXAMPLES}}
Always return the complete revised text, even when you make no changes. Copy the original text exactly apart from the tags.

Respond with one JSON object and nothing else. It must have exactly these fields:
  "critique": your assessment of the first-pass annotation, naming each change you make;
  "revised_text": the complete text with the corrected tags.
)tmpl";

constexpr std::string_view kReviewerUser = R"tmpl(Original text:
{{TEXT}}

First-pass annotation:
{{ANNOTATED}}
{{REASONING}}
)tmpl";

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string codebook_section(const BaseStyle& style) {
  const auto* cb = std::get_if<FullContextCodebook>(&style);
  if (cb == nullptr) return {};
  std::string out;
  out.reserve(cb->codebook_text.size() + 160);
  out += "\n## Codebook\nApply the following codebook in full when deciding what to tag.\n";
  out += "----- BEGIN CODEBOOK -----\n";
  out += cb->codebook_text;
  out += "\n----- END CODEBOOK -----\n";
  return out;
}

std::string examples_section(const BaseStyle& style) {
  const auto* fs = std::get_if<FewShot>(&style);
  if (fs == nullptr) return {};
  std::string out = "\n## Worked examples\n";
  for (std::size_t i = 0; i < fs->examples.size(); ++i) {
    out += "Example " + std::to_string(i + 1) + "\n";
    out += "Input: " + fs->examples[i].source_text + "\n";
    out += "Output: " + fs->examples[i].gold_tagged + "\n";
  }
  return out;
}

std::string read_file_or(const std::filesystem::path& path, std::string_view fallback) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::string(fallback);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string normalize_key(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    if (c == ' ' || c == '-' || c == '_') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_fences(std::string_view s) {
  s = trim(s);
  const auto open = s.find("```");
  // Backticks after the object starts belong to its string values.
  if (open == std::string_view::npos || open > s.find('{')) return s;
  auto body = s.substr(open + 3);
  const auto eol = body.find('\n');
  // Skip an info string such as "json" on the fence line.
  if (eol != std::string_view::npos && body.substr(0, eol).find('{') == std::string_view::npos) {
    body.remove_prefix(eol + 1);
  }
  const auto close = body.find("```");
  if (close != std::string_view::npos) body = body.substr(0, close);
  return trim(body);
}

// The first top-level {...} object, string-aware. Empty view if none closes.
std::string_view extract_object(std::string_view s) {
  const auto begin = s.find('{');
  if (begin == std::string_view::npos) return {};
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = begin; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return s.substr(begin, i - begin + 1);
  }
  return {};
}

json parse_object(std::string_view raw) {
  const auto text = strip_fences(raw);
  const auto object = extract_object(text);
  if (object.empty()) {
    const bool cut = json_unbalanced(text);
    throw Error(ErrorCode::kMalformedJson,
                cut ? "response JSON is unbalanced (likely truncated)"
                    : "response contains no JSON object");
  }
  auto j = json::parse(object, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kMalformedJson, "response is not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::kSchemaMismatch, "response is not a JSON object");
  return j;
}

std::string required_string(const json& obj, std::string_view canonical) {
  for (const auto& [key, value] : obj.items()) {
    if (normalize_key(key) != canonical) continue;
    if (!value.is_string()) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "field '" + std::string(canonical) + "' is not a string");
    }
    return value.get<std::string>();
  }
  throw Error(ErrorCode::kSchemaMismatch,
              "required field '" + std::string(canonical) + "' is missing");
}

}  // namespace

std::string_view paradigm_name(const Paradigm& p) noexcept {
  return std::visit(Overloaded{
                        [](const ZeroShot&) { return std::string_view("zero_shot"); },
                        [](const FewShot&) { return std::string_view("few_shot"); },
                        [](const FullContextCodebook&) {
                          return std::string_view("full_context_codebook");
                        },
                        [](const FineTuned&) { return std::string_view("fine_tuned"); },
                    },
                    p);
}

BaseStyle prompt_style(const Paradigm& p) {
  return std::visit(Overloaded{
                        [](const ZeroShot& z) -> BaseStyle { return z; },
                        [](const FewShot& f) -> BaseStyle { return f; },
                        [](const FullContextCodebook& c) -> BaseStyle { return c; },
                        [](const FineTuned& t) -> BaseStyle { return t.base_style; },
                    },
                    p);
}

void validate(const Paradigm& p, std::string_view label) {
  if (!tagspan::is_valid_label(label)) {
    throw Error(ErrorCode::kConfigError, "invalid label '" + std::string(label) + "'");
  }
  if (const auto* t = std::get_if<FineTuned>(&p); t && t->tuned_model_id.empty()) {
    throw Error(ErrorCode::kConfigError, "fine_tuned paradigm needs a tuned_model_id");
  }
  const auto style = prompt_style(p);
  if (const auto* cb = std::get_if<FullContextCodebook>(&style); cb && cb->codebook_text.empty()) {
    throw Error(ErrorCode::kConfigError, "codebook text is empty");
  }
  if (const auto* fs = std::get_if<FewShot>(&style)) {
    if (fs->examples.empty()) throw Error(ErrorCode::kConfigError, "few-shot needs >= 1 example");
    const tagspan::LabelSet labels{std::string(label)};
    for (std::size_t i = 0; i < fs->examples.size(); ++i) {
      const auto& ex = fs->examples[i];
      const auto a = eval::tokenize(tagspan::strip_tags(ex.gold_tagged, labels));
      const auto b = eval::tokenize(ex.source_text);
      const bool same = std::equal(a.begin(), a.end(), b.begin(), b.end(),
                                   [](const auto& x, const auto& y) { return x.text == y.text; });
      if (!same) {
        throw Error(ErrorCode::kConfigError,
                    "example " + std::to_string(i + 1) +
                        ": tagged text does not match its source text");
      }
    }
  }
}

PromptTemplates PromptTemplates::defaults() {
  return {std::string(kAnnotatorSystem), std::string(kAnnotatorUser),
          std::string(kReviewerSystem), std::string(kReviewerUser)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "template directory " + dir.string() + " does not exist");
  }
  return {read_file_or(dir / "annotator_system.txt", kAnnotatorSystem),
          read_file_or(dir / "annotator_user.txt", kAnnotatorUser),
          read_file_or(dir / "reviewer_system.txt", kReviewerSystem),
          read_file_or(dir / "reviewer_user.txt", kReviewerUser)};
}

std::string expand_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string_view, std::string_view>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const auto name = tmpl.substr(open + 2, close - open - 2);
    const auto it = std::find_if(values.begin(), values.end(),
                                 [&](const auto& kv) { return kv.first == name; });
    if (it == values.end()) {
      out.append(tmpl.substr(i, open + 2 - i));
      i = open + 2;
      continue;
    }
    out.append(tmpl.substr(i, open - i));
    out.append(it->second);
    i = close + 2;
  }
  out.append(tmpl.substr(std::min(i, tmpl.size())));
  return out;
}

PromptBundle build_annotator_prompt(std::string_view sample_text, const Paradigm& paradigm,
                                    std::string_view label, const PromptTemplates& templates) {
  const auto style = prompt_style(paradigm);
  const auto codebook = codebook_section(style);
  const auto examples = examples_section(style);
  const std::vector<std::pair<std::string_view, std::string_view>> values{
      {"TEXT", sample_text}, {"LABEL", label}, {"CODEBOOK", codebook}, {"EXAMPLES", examples}};
  return {expand_template(templates.annotator_system, values),
          expand_template(templates.annotator_user, values), Schema::kAnnotator};
}

PromptBundle build_reviewer_prompt(std::string_view sample_text,
                                   const AnnotatorResponse& annotator_output,
                                   const Paradigm& paradigm, std::string_view label,
                                   const PromptTemplates& templates,
                                   ReviewerPromptOptions options) {
  const auto style = prompt_style(paradigm);
  const auto codebook = codebook_section(style);
  const auto examples = examples_section(style);
  std::string reasoning;
  if (options.include_reasoning) {
    reasoning = "\nAnnotator reasoning:\n" + annotator_output.reasoning + "\n";
  }
  const std::vector<std::pair<std::string_view, std::string_view>> values{
      {"TEXT", sample_text},     {"LABEL", label},
      {"CODEBOOK", codebook},    {"EXAMPLES", examples},
      {"ANNOTATED", annotator_output.annotated_text}, {"REASONING", reasoning}};
  return {expand_template(templates.reviewer_system, values),
          expand_template(templates.reviewer_user, values), Schema::kReviewer};
}

bool json_unbalanced(std::string_view text) noexcept {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : text) {
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') --depth;
  }
  return in_string || depth > 0;
}

AnnotatorResponse parse_annotator_response(std::string_view raw) {
  const auto j = parse_object(raw);
  return {required_string(j, "reasoning"), required_string(j, "annotated_text")};
}

ReviewerResponse parse_reviewer_response(std::string_view raw) {
  const auto j = parse_object(raw);
  return {required_string(j, "critique"), required_string(j, "revised_text")};
}

std::variant<AnnotatorResponse, ReviewerResponse> parse_agent_json(std::string_view raw,
                                                                  Schema schema) {
  if (schema == Schema::kAnnotator) return parse_annotator_response(raw);
  return parse_reviewer_response(raw);
}

std::string render_response(const AnnotatorResponse& r) {
  return json{{"reasoning", r.reasoning}, {"annotated_text", r.annotated_text}}.dump();
}

std::string render_response(const ReviewerResponse& r) {
  return json{{"critique", r.critique}, {"revised_text", r.revised_text}}.dump();
}

}  // namespace annoloop::agents
