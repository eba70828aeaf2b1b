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

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annoloop/csv.hpp"
#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/evaluator.hpp"
#include "annoloop/runner.hpp"
#include "annoloop/serialization.hpp"
#include "annoloop/service.hpp"
#include "annoloop/tagspan.hpp"

namespace annoloop::cli {
namespace {

namespace fs = std::filesystem;
using eval::format_metric;

struct RunArgs {
  std::string dataset;
  std::string config;
  std::string codebook;
  std::string examples;
  std::string out;
  std::string run_id;
  int workers = 0;
  bool quiet = false;
};

struct EvaluateArgs {
  std::string gold;
  std::string pred;
  std::string label = std::string(tagspan::kDefaultLabel);
  bool json = false;
};

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::string out = "runs";
  std::string cors_origin = "*";
};

std::string metric_or_dash(const std::optional<double>& v) {
  return v ? format_metric(*v) : "-";
}

void print_macro_row(std::ostream& out, std::string_view name,
                     const std::optional<eval::MacroAverage>& m) {
  out << name;
  if (m) {
    out << "  p=" << format_metric(m->precision) << " r=" << format_metric(m->recall)
        << " f1=" << format_metric(m->f1) << " n=" << m->samples << '\n';
  } else {
    out << "  (no evaluable samples)\n";
  }
}

// Replaces the paradigm's examples or codebook with the flag-supplied content.
void apply_overrides(agents::Paradigm& paradigm, const RunArgs& args) {
  const auto apply = [&](auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, agents::FewShot>) {
      if (!args.examples.empty()) v.examples = runner::load_examples_csv(args.examples);
    } else if constexpr (std::is_same_v<T, agents::FullContextCodebook>) {
      if (!args.codebook.empty()) v.codebook_text = runner::read_text_file(args.codebook);
    }
  };
  if (auto* ft = std::get_if<agents::FineTuned>(&paradigm)) {
    std::visit(apply, ft->base_style);
  } else {
    std::visit(apply, paradigm);
  }
}

int cmd_run(const RunArgs& args, std::ostream& out) {
  const auto config_path = fs::path(args.config);
  const auto text = runner::read_text_file(config_path);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kConfigError, "config is not valid JSON: " + args.config);
  }
  auto config = runner::run_config_from_json(j, config_path.parent_path());
  apply_overrides(config.experiment.paradigm, args);
  if (!args.out.empty()) config.output_dir = args.out;
  if (!args.run_id.empty()) config.run_id = args.run_id;
  if (args.workers > 0) config.workers = args.workers;
  if (config.run_id.empty()) config.run_id = runner::default_run_id();
  runner::validate(config);

  const auto dataset = runner::load_dataset_csv(args.dataset);
  const auto clients = runner::make_clients(config.experiment);

  runner::EventSink sink;
  if (!args.quiet) {
    sink = [&out](const runner::RunEvent& e) {
      if (const auto* s = std::get_if<runner::SampleEvent>(&e)) {
        out << '[' << s->completed << '/' << s->total << "] id=" << s->id
            << " status=" << s->status << " f1_pre=" << metric_or_dash(s->f1_pre)
            << " f1_post=" << metric_or_dash(s->f1_post) << '\n';
      }
    };
  }
  const auto summary = runner::run_batch(config, dataset, clients, sink);

  out << "run_id " << summary.run_id << '\n';
  out << "output " << runner::run_directory(config).string() << '\n';
  print_macro_row(out, "macro_pre ", summary.macro_pre);
  print_macro_row(out, "macro_post", summary.macro_post);
  out << "baseline   f1=" << format_metric(config.baseline_f1) << '\n';
  for (const auto& [status, count] : summary.status_counts) {
    out << "status " << status << '=' << count << '\n';
  }
  const bool any_failed = std::any_of(summary.outcomes.begin(), summary.outcomes.end(),
                                      [](const agents::SampleOutcome& o) {
                                        return o.status == agents::SampleStatus::kFailed;
                                      });
  return any_failed ? 2 : 0;
}

// Predictions come from a CSV with an `id` column and either `pred` or
// `final_text` (so a run export can be scored again directly).
std::map<std::string, std::string> load_predictions(const std::string& path) {
  const auto records = csv::parse(runner::read_text_file(path));
  if (records.empty()) throw Error(ErrorCode::kMissingHeader, path + ": missing header");
  const auto& header = records.front().fields;
  const auto col = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = col("id");
  auto pred_col = col("pred");
  if (!pred_col) pred_col = col("final_text");
  if (!id_col || !pred_col) {
    throw Error(ErrorCode::kMissingHeader,
                path + ": prediction CSV needs columns 'id' and 'pred' (or 'final_text')");
  }
  std::map<std::string, std::string> preds;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorCode::kRowFieldCount, path + ":" + std::to_string(rec.line) + ": expected " +
                                                 std::to_string(header.size()) + " fields, got " +
                                                 std::to_string(rec.fields.size()));
    }
    const auto& id = rec.fields[*id_col];
    if (!preds.emplace(id, rec.fields[*pred_col]).second) {
      throw Error(ErrorCode::kDuplicateId, path + ": duplicate id '" + id + "'");
    }
  }
  return preds;
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  if (!tagspan::is_valid_label(args.label)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid label '" + args.label + "'");
  }
  const auto gold = runner::load_dataset_csv(args.gold);
  const auto preds = load_predictions(args.pred);
  const tagspan::LabelSet labels{args.label};

  std::vector<eval::SampleMetrics> all;
  nlohmann::json report{{"samples", nlohmann::json::array()}};
  for (const auto& sample : gold) {
    auto it = preds.find(sample.id);
    if (it == preds.end()) {
      throw Error(ErrorCode::kInvalidArgument, "no prediction for id '" + sample.id + "'");
    }
    const auto m = eval::evaluate_pair(sample.gold_tagged, it->second, labels);
    all.push_back(m);
    if (args.json) {
      auto j = nlohmann::json(m);
      j["id"] = sample.id;
      report["samples"].push_back(std::move(j));
      continue;
    }
    out << "sample id=" << sample.id << " p=" << format_metric(m.precision)
        << " r=" << format_metric(m.recall) << " f1=" << format_metric(m.f1)
        << " tp=" << m.counts.tp << " fp=" << m.counts.fp << " fn=" << m.counts.fn;
    if (m.flags.empty_gold) out << " empty_gold";
    if (m.flags.alignment_divergent) out << " alignment_divergent";
    out << '\n';
  }
  const auto macro = eval::macro_average(all);
  const auto micro = eval::micro_average(all);
  if (args.json) {
    report["macro"] = macro;
    report["micro"] = micro;
    out << report.dump(2) << '\n';
    return 0;
  }
  out << "macro p=" << format_metric(macro.precision) << " r=" << format_metric(macro.recall)
      << " f1=" << format_metric(macro.f1) << " n=" << macro.samples << '\n';
  out << "micro p=" << format_metric(micro.precision) << " r=" << format_metric(micro.recall)
      << " f1=" << format_metric(micro.f1) << '\n';
  return 0;
}

int cmd_export(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  const auto summary = runner::load_summary(dir / runner::kSummaryName);
  const auto target = dir / runner::kExportName;
  runner::write_text_file(target, runner::export_csv(summary));
  out << "wrote " << target.string() << " (" << summary.outcomes.size() << " rows)\n";
  return 0;
}

int cmd_validate(const std::string& dataset, const std::string& label, std::ostream& out) {
  const auto samples = runner::load_dataset_csv(dataset);
  const tagspan::LabelSet labels{label};
  std::size_t warnings = 0;
  std::size_t empty = 0;
  for (const auto& s : samples) {
    const auto doc = tagspan::parse_tagged(s.gold_tagged, labels);
    for (const auto& w : doc.warnings) {
      ++warnings;
      out << "warning id=" << s.id << ' ' << tagspan::to_string(w.kind) << " at " << w.char_offset
          << '\n';
    }
    if (doc.plain_text.find_first_not_of(" \t\r\n") == std::string::npos) ++empty;
  }
  out << "ok samples=" << samples.size() << " gold_warnings=" << warnings
      << " empty_gold=" << empty << '\n';
  return 0;
}

std::pair<std::string, int> split_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size()) {
    throw Error(ErrorCode::kInvalidArgument, "--addr must be HOST:PORT");
  }
  try {
    const auto port = std::stoi(addr.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {addr.substr(0, colon), port};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "invalid port in --addr '" + addr + "'");
  }
}

int cmd_serve(const ServeArgs& args, std::ostream& out) {
  const auto [host, port] = split_addr(args.addr);
  service::ServiceOptions opts;
  opts.output_dir = args.out;
  opts.cors_origin = args.cors_origin;
  opts.config_base_dir = fs::current_path();
  service::Service svc(std::move(opts));
  out << "listening on " << host << ':' << port << '\n' << std::flush;
  svc.listen_blocking(host, port);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Annotator/Reviewer span-tagging workbench"};
  app.set_version_flag("--version", std::string(ANNOLOOP_VERSION));
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Annotate a dataset and write summary, log and export");
  run->add_option("--dataset", run_args.dataset, "CSV with columns id,text,gold")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--config", run_args.config, "Run configuration JSON")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--codebook", run_args.codebook, "Codebook text (full_context_codebook)")
      ->check(CLI::ExistingFile);
  run->add_option("--examples", run_args.examples, "Few-shot CSV (id,text,gold)")
      ->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Output directory (overrides config)");
  run->add_option("--run-id", run_args.run_id, "Run id (overrides config)");
  run->add_option("--workers", run_args.workers, "Worker count (overrides config)")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", run_args.quiet, "Suppress per-sample progress lines");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold offline");
  evaluate->add_option("--gold", eval_args.gold, "Gold CSV (id,text,gold)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--pred", eval_args.pred, "Prediction CSV (id,pred or id,final_text)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--label", eval_args.label, "Span label")->capture_default_str();
  evaluate->add_flag("--json", eval_args.json, "Print full-precision JSON instead of text");

  std::string run_dir;
  auto* exp = app.add_subcommand("export", "Regenerate export.csv from summary.json");
  exp->add_option("--run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--addr", serve_args.addr, "HOST:PORT")->capture_default_str();
  serve->add_option("--out", serve_args.out, "Output directory for runs")->capture_default_str();
  serve->add_option("--cors-origin", serve_args.cors_origin,
                    "Access-Control-Allow-Origin value (empty disables)")
      ->capture_default_str();

  std::string validate_dataset;
  std::string validate_label = std::string(tagspan::kDefaultLabel);
  auto* validate = app.add_subcommand("validate", "Check a dataset CSV without running models");
  validate->add_option("--dataset", validate_dataset, "CSV with columns id,text,gold")
      ->required()
      ->check(CLI::ExistingFile);
  validate->add_option("--label", validate_label, "Span label")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << ANNOLOOP_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: Usage: " << msg << '\n';
    return 1;
  }

  try {
    if (*run) return cmd_run(run_args, out);
    if (*evaluate) return cmd_evaluate(eval_args, out);
    if (*exp) return cmd_export(run_dir, out);
    if (*serve) return cmd_serve(serve_args, out);
    if (*validate) return cmd_validate(validate_dataset, validate_label, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << to_string(e.code()) << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace annoloop::cli
