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

#include "annoloop/serialization.hpp"

#include <ctime>

#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"

namespace annoloop {
namespace {

using nlohmann::json;

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

std::string iso_utc(std::int64_t ms) {
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms % 1000));
  return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Wraps nlohmann's exceptions so callers see one error type.
template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string(what) + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const Sample& s) {
  j = json{{"index", s.index}, {"id", s.id}, {"text", s.text}, {"gold", s.gold_tagged}};
}

void from_json(const json& j, Sample& s) {
  s.index = j.at("index").get<std::size_t>();
  s.id = j.at("id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.gold_tagged = j.at("gold").get<std::string>();
}

namespace tagspan {

void to_json(json& j, const Span& s) {
  j = json{{"label", s.label}, {"start", s.start_char}, {"end", s.end_char}};
}

void to_json(json& j, const SpanDoc& d) {
  json warnings = json::array();
  for (const auto& w : d.warnings) {
    warnings.push_back({{"kind", to_string(w.kind)}, {"offset", w.char_offset}});
  }
  j = json{{"plain_text", d.plain_text}, {"spans", d.spans}, {"warnings", std::move(warnings)}};
}

}  // namespace tagspan

namespace eval {

void to_json(json& j, const SampleMetrics& m) {
  json flags = json::array();
  if (m.flags.alignment_divergent) flags.push_back("AlignmentDivergent");
  if (m.flags.empty_gold) flags.push_back("EmptyGold");
  j = json{{"precision", m.precision},
           {"recall", m.recall},
           {"f1", m.f1},
           {"tp", m.counts.tp},
           {"fp", m.counts.fp},
           {"fn", m.counts.fn},
           {"tn", m.counts.tn},
           {"alignment_coverage", m.alignment_coverage},
           {"flags", std::move(flags)}};
}

void from_json(const json& j, SampleMetrics& m) {
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.counts.tp = j.at("tp").get<std::int64_t>();
  m.counts.fp = j.at("fp").get<std::int64_t>();
  m.counts.fn = j.at("fn").get<std::int64_t>();
  m.counts.tn = j.at("tn").get<std::int64_t>();
  m.alignment_coverage = j.at("alignment_coverage").get<double>();
  m.flags = {};
  for (const auto& f : j.at("flags")) {
    if (f == "AlignmentDivergent") m.flags.alignment_divergent = true;
    if (f == "EmptyGold") m.flags.empty_gold = true;
  }
}

void to_json(json& j, const MacroAverage& m) {
  j = json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"samples", m.samples}};
}

void from_json(const json& j, MacroAverage& m) {
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.samples = j.at("samples").get<std::size_t>();
}

}  // namespace eval

namespace providers {

void to_json(json& j, const ModelSpec& s) {
  j = json{{"provider", to_string(s.kind)},
           {"base_url", s.base_url},
           {"model_id", s.model_id},
           {"api_key_ref", s.api_key_ref},
           {"temperature", s.temperature},
           {"max_output_tokens", s.max_output_tokens},
           {"timeout_ms", s.timeout_ms},
           {"json_mode", s.json_mode},
           {"max_concurrency", s.max_concurrency}};
}

void from_json(const json& j, ModelSpec& s) {
  const auto kind = j.at("provider").get<std::string>();
  const auto parsed = provider_kind_from_string(kind);
  if (!parsed) throw Error(ErrorCode::kConfigError, "unknown provider '" + kind + "'");
  ModelSpec d;
  s.kind = *parsed;
  s.base_url = j.value("base_url", d.base_url);
  s.model_id = j.value("model_id", d.model_id);
  s.api_key_ref = j.value("api_key_ref", d.api_key_ref);
  s.temperature = j.value("temperature", d.temperature);
  s.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  s.timeout_ms = j.value("timeout_ms", d.timeout_ms);
  s.json_mode = j.value("json_mode", d.json_mode);
  s.max_concurrency = j.value("max_concurrency", d.max_concurrency);
}

void to_json(json& j, const RetryPolicy& p) {
  j = json{{"max_attempts", p.max_attempts},
           {"base_delay_ms", p.base_delay_ms},
           {"backoff_factor", p.backoff_factor},
           {"jitter_fraction", p.jitter_fraction}};
}

void from_json(const json& j, RetryPolicy& p) {
  RetryPolicy d;
  p.max_attempts = j.value("max_attempts", d.max_attempts);
  p.base_delay_ms = j.value("base_delay_ms", d.base_delay_ms);
  p.backoff_factor = j.value("backoff_factor", d.backoff_factor);
  p.jitter_fraction = j.value("jitter_fraction", d.jitter_fraction);
}

}  // namespace providers

namespace agents {

void to_json(json& j, const SampleOutcome& o) {
  j = o.sample;
  j["annotator"] = o.annotator_response
                       ? json{{"reasoning", o.annotator_response->reasoning},
                              {"annotated_text", o.annotator_response->annotated_text}}
                       : json(nullptr);
  j["reviewer"] = o.reviewer_response
                      ? json{{"critique", o.reviewer_response->critique},
                             {"revised_text", o.reviewer_response->revised_text}}
                      : json(nullptr);
  j["metrics_pre"] = optional_json(o.metrics_pre);
  j["metrics_post"] = optional_json(o.metrics_post);
  j["status"] = to_string(o.status);
  j["error_class"] =
      o.error_class ? json(providers::to_string(*o.error_class)) : json(nullptr);
  j["error_detail"] = o.error_detail;
}

void from_json(const json& j, SampleOutcome& o) {
  o.sample = j.get<Sample>();
  o.annotator_response.reset();
  o.reviewer_response.reset();
  if (!j.at("annotator").is_null()) {
    const auto& a = j.at("annotator");
    o.annotator_response = AnnotatorResponse{a.at("reasoning").get<std::string>(),
                                             a.at("annotated_text").get<std::string>()};
  }
  if (!j.at("reviewer").is_null()) {
    const auto& r = j.at("reviewer");
    o.reviewer_response = ReviewerResponse{r.at("critique").get<std::string>(),
                                           r.at("revised_text").get<std::string>()};
  }
  o.metrics_pre = optional_from<eval::SampleMetrics>(j, "metrics_pre");
  o.metrics_post = optional_from<eval::SampleMetrics>(j, "metrics_post");
  const auto status = j.at("status").get<std::string>();
  const auto parsed = sample_status_from_string(status);
  if (!parsed) throw Error(ErrorCode::kConfigError, "unknown status '" + status + "'");
  o.status = *parsed;
  o.error_class.reset();
  if (auto cls = optional_from<std::string>(j, "error_class")) {
    o.error_class = providers::error_class_from_string(*cls);
  }
  o.error_detail = j.value("error_detail", std::string{});
}

void to_json(json& j, const LogEntry& e) {
  j = json{{"timestamp", iso_utc(e.timestamp_ms)},
           {"timestamp_ms", e.timestamp_ms},
           {"run_id", e.run_id},
           {"sample_id", e.sample_id},
           {"agent_role", to_string(e.role)},
           {"attempt", e.attempt},
           {"request_system", e.request_system},
           {"request_user", e.request_user},
           {"raw_response", e.raw_response},
           {"error_class",
            e.error_class ? json(providers::to_string(*e.error_class)) : json(nullptr)},
           {"http_status", optional_json(e.http_status)},
           {"error_detail", e.error_detail},
           {"prompt_tokens", optional_json(e.prompt_tokens)},
           {"output_tokens", optional_json(e.output_tokens)}};
}

void from_json(const json& j, LogEntry& e) {
  e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  e.run_id = j.at("run_id").get<std::string>();
  e.sample_id = j.at("sample_id").get<std::string>();
  const auto role = agent_role_from_string(j.at("agent_role").get<std::string>());
  if (!role) throw Error(ErrorCode::kConfigError, "unknown agent_role");
  e.role = *role;
  e.attempt = j.at("attempt").get<int>();
  e.request_system = j.at("request_system").get<std::string>();
  e.request_user = j.at("request_user").get<std::string>();
  e.raw_response = j.at("raw_response").get<std::string>();
  e.error_class.reset();
  if (auto cls = optional_from<std::string>(j, "error_class")) {
    e.error_class = providers::error_class_from_string(*cls);
  }
  e.http_status = optional_from<int>(j, "http_status");
  e.error_detail = j.value("error_detail", std::string{});
  e.prompt_tokens = optional_from<std::int64_t>(j, "prompt_tokens");
  e.output_tokens = optional_from<std::int64_t>(j, "output_tokens");
}

namespace {

json base_style_to_json(const BaseStyle& s) {
  return std::visit([](const auto& v) { return paradigm_to_json(Paradigm{v}); }, s);
}

}  // namespace

json paradigm_to_json(const Paradigm& p) {
  json j{{"kind", paradigm_name(p)}};
  if (const auto* fs = std::get_if<FewShot>(&p)) {
    json examples = json::array();
    for (const auto& ex : fs->examples) {
      examples.push_back({{"source_text", ex.source_text}, {"gold_tagged", ex.gold_tagged}});
    }
    j["examples"] = std::move(examples);
  } else if (const auto* cb = std::get_if<FullContextCodebook>(&p)) {
    j["codebook_text"] = cb->codebook_text;
  } else if (const auto* ft = std::get_if<FineTuned>(&p)) {
    j["tuned_model_id"] = ft->tuned_model_id;
    j["base_style"] = base_style_to_json(ft->base_style);
  }
  return j;
}

Paradigm paradigm_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("paradigm", [&]() -> Paradigm {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "zero_shot") return ZeroShot{};
    if (kind == "few_shot") {
      FewShot fs;
      if (j.contains("examples_file")) {
        fs.examples = runner::load_examples_csv(
            resolve(base_dir, j.at("examples_file").get<std::string>()));
      } else if (j.contains("examples")) {
        for (const auto& ex : j.at("examples")) {
          fs.examples.push_back({ex.at("source_text").get<std::string>(),
                                 ex.at("gold_tagged").get<std::string>()});
        }
      }
      return fs;
    }
    if (kind == "full_context_codebook") {
      FullContextCodebook cb;
      if (j.contains("codebook_file")) {
        cb.codebook_text =
            runner::read_text_file(resolve(base_dir, j.at("codebook_file").get<std::string>()));
      } else {
        cb.codebook_text = j.value("codebook_text", std::string{});
      }
      return cb;
    }
    if (kind == "fine_tuned") {
      FineTuned ft;
      ft.tuned_model_id = j.value("tuned_model_id", std::string{});
      if (j.contains("base_style")) {
        auto base = paradigm_from_json(j.at("base_style"), base_dir);
        if (std::holds_alternative<FineTuned>(base)) {
          throw Error(ErrorCode::kConfigError, "fine_tuned base_style cannot be fine_tuned");
        }
        std::visit(
            [&](auto& v) {
              if constexpr (!std::is_same_v<std::decay_t<decltype(v)>, FineTuned>) {
                ft.base_style = std::move(v);
              }
            },
            base);
      }
      return ft;
    }
    throw Error(ErrorCode::kConfigError, "unknown paradigm kind '" + kind + "'");
  });
}

json experiment_to_json(const ExperimentConfig& c) {
  json j{{"label", c.label},
         {"paradigm", paradigm_to_json(c.paradigm)},
         {"reviewer_mode", c.reviewer_mode},
         {"include_reasoning_in_review", c.include_reasoning_in_review},
         {"annotator", c.annotator},
         {"retry", c.retry}};
  if (c.reviewer) j["reviewer"] = *c.reviewer;
  if (c.templates_dir) j["templates_dir"] = *c.templates_dir;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("experiment", [&] {
    ExperimentConfig c;
    c.label = j.value("label", c.label);
    if (j.contains("paradigm")) c.paradigm = paradigm_from_json(j.at("paradigm"), base_dir);
    c.reviewer_mode = j.value("reviewer_mode", false);
    c.include_reasoning_in_review = j.value("include_reasoning_in_review", true);
    const auto resolve_mock = [&](providers::ModelSpec& s) {
      if (s.kind == providers::ProviderKind::kMock && !s.base_url.empty()) {
        s.base_url = resolve(base_dir, s.base_url).string();
      }
    };
    if (!j.contains("annotator")) {
      throw Error(ErrorCode::kConfigError, "experiment.annotator is required");
    }
    c.annotator = j.at("annotator").get<providers::ModelSpec>();
    resolve_mock(c.annotator);
    if (j.contains("reviewer") && !j.at("reviewer").is_null()) {
      c.reviewer = j.at("reviewer").get<providers::ModelSpec>();
      resolve_mock(*c.reviewer);
    }
    if (j.contains("retry")) c.retry = j.at("retry").get<providers::RetryPolicy>();
    if (j.contains("templates_dir")) {
      const auto dir = resolve(base_dir, j.at("templates_dir").get<std::string>());
      c.templates_dir = dir.string();
      c.templates = PromptTemplates::load(dir);
    }
    return c;
  });
}

}  // namespace agents

namespace runner {

json run_config_to_json(const RunConfig& c) {
  return json{{"run_id", c.run_id},
              {"workers", c.workers},
              {"baseline_f1", c.baseline_f1},
              {"output_dir", c.output_dir.string()},
              {"experiment", agents::experiment_to_json(c.experiment)}};
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("run config", [&] {
    if (!j.is_object()) throw Error(ErrorCode::kConfigError, "run config must be a JSON object");
    RunConfig c;
    c.run_id = j.value("run_id", std::string{});
    c.workers = j.value("workers", c.workers);
    c.baseline_f1 = j.value("baseline_f1", c.baseline_f1);
    if (j.contains("output_dir")) {
      c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    }
    if (!j.contains("experiment")) {
      throw Error(ErrorCode::kConfigError, "run config needs an 'experiment' object");
    }
    c.experiment = agents::experiment_from_json(j.at("experiment"), base_dir);
    return c;
  });
}

void to_json(json& j, const RunSummary& s) {
  j = json{{"run_id", s.run_id},
           {"config", s.config_snapshot},
           {"total", s.total},
           {"complete", s.complete},
           {"started_at_ms", s.started_at_ms},
           {"finished_at_ms", s.finished_at_ms},
           {"macro_pre", optional_json(s.macro_pre)},
           {"macro_post", optional_json(s.macro_post)},
           {"micro_pre", s.micro_pre},
           {"micro_post", s.micro_post},
           {"status_counts", s.status_counts},
           {"outcomes", s.outcomes}};
}

void from_json(const json& j, RunSummary& s) {
  s.run_id = j.at("run_id").get<std::string>();
  s.config_snapshot = j.at("config");
  s.total = j.at("total").get<std::size_t>();
  s.complete = j.at("complete").get<bool>();
  s.started_at_ms = j.value("started_at_ms", std::int64_t{0});
  s.finished_at_ms = j.value("finished_at_ms", std::int64_t{0});
  s.macro_pre = optional_from<eval::MacroAverage>(j, "macro_pre");
  s.macro_post = optional_from<eval::MacroAverage>(j, "macro_post");
  s.micro_pre = j.at("micro_pre").get<eval::SampleMetrics>();
  s.micro_post = j.at("micro_post").get<eval::SampleMetrics>();
  s.status_counts = j.at("status_counts").get<std::map<std::string, std::size_t>>();
  s.outcomes = j.at("outcomes").get<std::vector<agents::SampleOutcome>>();
}

json event_to_json(const RunEvent& e) {
  if (const auto* s = std::get_if<SampleEvent>(&e)) {
    return json{{"type", "sample"},
                {"index", s->index},
                {"id", s->id},
                {"f1_pre", optional_json(s->f1_pre)},
                {"f1_post", optional_json(s->f1_post)},
                {"status", s->status},
                {"completed", s->completed},
                {"total", s->total},
                {"progress", s->total == 0 ? 1.0
                                           : static_cast<double>(s->completed) /
                                                 static_cast<double>(s->total)},
                {"macro_pre", optional_json(s->macro_pre)},
                {"macro_post", optional_json(s->macro_post)},
                {"final", s->final_doc},
                {"reasoning", s->reasoning},
                {"critique", s->critique}};
  }
  const auto& m = std::get<SummaryEvent>(e);
  return json{{"type", "summary"},
              {"run_id", m.run_id},
              {"completed", m.completed},
              {"total", m.total},
              {"complete", m.complete},
              {"macro_pre", optional_json(m.macro_pre)},
              {"macro_post", optional_json(m.macro_post)},
              {"micro_pre", m.micro_pre},
              {"micro_post", m.micro_post},
              {"status_counts", m.status_counts}};
}

}  // namespace runner
}  // namespace annoloop
