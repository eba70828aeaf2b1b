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

#include "annoloop/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/serialization.hpp"

#ifndef ANNOLOOP_VERSION
#define ANNOLOOP_VERSION "dev"
#endif

namespace annoloop::service {
namespace {

using nlohmann::json;

constexpr auto kReplayPoll = std::chrono::milliseconds(200);

std::string dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(dump(body), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, status, json{{"error", {{"code", code}, {"message", message}}}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoError: return 500;
    default: return 400;
  }
}

struct RunRecord {
  std::string run_id;
  std::filesystem::path dir;
  std::int64_t created_at_ms = 0;
  std::size_t total = 0;

  std::mutex mu;
  std::condition_variable cv;
  RunState state = RunState::kPending;
  std::vector<std::string> events;
  std::size_t completed = 0;
  std::optional<runner::RunSummary> summary;
  std::string error;
  std::stop_source stop;
  std::jthread worker;

  bool terminal() const {
    return state == RunState::kDone || state == RunState::kFailed ||
           state == RunState::kCancelled;
  }
};

void fill_paradigm(agents::Paradigm& p, const std::vector<agents::ExamplePair>* examples,
                   const std::string* codebook) {
  const auto fill = [&](auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, agents::FewShot>) {
      if (v.examples.empty() && examples != nullptr) v.examples = *examples;
    } else if constexpr (std::is_same_v<T, agents::FullContextCodebook>) {
      if (v.codebook_text.empty() && codebook != nullptr) v.codebook_text = *codebook;
    }
  };
  if (auto* ft = std::get_if<agents::FineTuned>(&p)) {
    std::visit(fill, ft->base_style);
  } else {
    std::visit(fill, p);
  }
}

}  // namespace

std::string_view to_string(RunState s) noexcept {
  switch (s) {
    case RunState::kPending: return "Pending";
    case RunState::kRunning: return "Running";
    case RunState::kDone: return "Done";
    case RunState::kFailed: return "Failed";
    case RunState::kCancelled: return "Cancelled";
  }
  return "Failed";
}

struct Service::Impl {
  ServiceOptions opts;
  httplib::Server server;
  std::thread server_thread;
  std::atomic<bool> shutting_down{false};

  std::mutex mu;
  std::size_t next_id = 1;
  std::map<std::string, std::vector<Sample>> datasets;
  std::map<std::string, std::string> codebooks;
  std::map<std::string, std::vector<agents::ExamplePair>> examples;
  std::map<std::string, std::shared_ptr<RunRecord>> runs;

  explicit Impl(ServiceOptions o) : opts(std::move(o)) { routes(); }

  ~Impl() {
    shutting_down = true;
    std::map<std::string, std::shared_ptr<RunRecord>> snapshot;
    {
      std::lock_guard lock(mu);
      snapshot = runs;
    }
    for (auto& [id, rec] : snapshot) {
      rec->stop.request_stop();
      rec->cv.notify_all();
    }
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    for (auto& [id, rec] : snapshot) {
      if (rec->worker.joinable()) rec->worker.join();
    }
  }

  std::string make_id(std::string_view prefix) {
    return std::string(prefix) + "-" + std::to_string(next_id++);
  }

  std::shared_ptr<RunRecord> find_run(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = runs.find(id);
    return it == runs.end() ? nullptr : it->second;
  }

  json handle_json(RunRecord& rec) {
    std::lock_guard lock(rec.mu);
    json j{{"run_id", rec.run_id},
           {"state", to_string(rec.state)},
           {"created_at_ms", rec.created_at_ms},
           {"completed", rec.completed},
           {"total", rec.total}};
    if (!rec.error.empty()) j["error"] = rec.error;
    return j;
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                                    std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.what());
      } catch (...) {
        send_error(res, 500, "Internal", "internal server error");
      }
    });

    if (!opts.cors_origin.empty()) {
      server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", opts.cors_origin);
      });
      server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
        res.status = 204;
      });
    }

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json{{"status", "ok"}, {"version", ANNOLOOP_VERSION}});
    });

    server.Post("/api/datasets", [this](const httplib::Request& req, httplib::Response& res) {
      auto samples = runner::parse_dataset_csv(req.body);
      std::lock_guard lock(mu);
      const auto id = make_id("ds");
      const auto count = samples.size();
      datasets.emplace(id, std::move(samples));
      send_json(res, 201, json{{"dataset_id", id}, {"sample_count", count}});
    });

    server.Post("/api/codebooks", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.body.empty()) {
        send_error(res, 400, "ConfigError", "codebook body is empty");
        return;
      }
      std::lock_guard lock(mu);
      const auto id = make_id("cb");
      codebooks.emplace(id, req.body);
      send_json(res, 201, json{{"id", id}, {"length", req.body.size()}});
    });

    server.Post("/api/examples", [this](const httplib::Request& req, httplib::Response& res) {
      auto pairs = runner::parse_examples_csv(req.body);
      std::lock_guard lock(mu);
      const auto id = make_id("ex");
      const auto count = pairs.size();
      examples.emplace(id, std::move(pairs));
      send_json(res, 201, json{{"id", id}, {"sample_count", count}});
    });

    server.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      start_run(req, res);
    });

    server.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::shared_ptr<RunRecord>> all;
      {
        std::lock_guard lock(mu);
        for (auto& [id, rec] : runs) all.push_back(rec);
      }
      json list = json::array();
      for (auto& rec : all) list.push_back(handle_json(*rec));
      send_json(res, 200, json{{"runs", std::move(list)}});
    });

    server.Get(R"(/api/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto rec = find_run(req.matches[1]);
      if (!rec) return send_error(res, 404, "NotFound", "unknown run");
      send_json(res, 200, handle_json(*rec));
    });

    server.Get(R"(/api/runs/([^/]+)/events)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 stream_events(req, res);
               });

    server.Get(R"(/api/runs/([^/]+)/summary)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto rec = find_run(req.matches[1]);
                 if (!rec) return send_error(res, 404, "NotFound", "unknown run");
                 std::lock_guard lock(rec->mu);
                 if (!rec->summary) {
                   return send_error(res, 409, "WrongState",
                                     "run is " + std::string(to_string(rec->state)));
                 }
                 send_json(res, 200, json(*rec->summary));
               });

    server.Get(R"(/api/runs/([^/]+)/log)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto rec = find_run(req.matches[1]);
                 if (!rec) return send_error(res, 404, "NotFound", "unknown run");
                 std::size_t offset = 0;
                 std::size_t limit = 100;
                 try {
                   if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
                   if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
                 } catch (const std::exception&) {
                   return send_error(res, 400, "InvalidArgument", "offset/limit must be integers");
                 }
                 runner::LogReadResult log;
                 const auto path = rec->dir / runner::kSessionLogName;
                 if (std::filesystem::exists(path)) log = runner::read_log(path);
                 json entries = json::array();
                 const auto total = log.entries.size();
                 const auto end = std::min(total, offset + std::min<std::size_t>(limit, 1000));
                 for (auto i = std::min(offset, total); i < end; ++i) {
                   entries.push_back(log.entries[i]);
                 }
                 send_json(res, 200,
                           json{{"run_id", rec->run_id},
                                {"offset", offset},
                                {"next_offset", std::max(end, std::min(offset, total))},
                                {"total", total},
                                {"truncated_tail", !log.warnings.empty()},
                                {"entries", std::move(entries)}});
               });

    server.Get(R"(/api/runs/([^/]+)/export\.csv)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto rec = find_run(req.matches[1]);
                 if (!rec) return send_error(res, 404, "NotFound", "unknown run");
                 {
                   std::lock_guard lock(rec->mu);
                   if (!rec->summary) {
                     return send_error(res, 409, "WrongState",
                                       "run is " + std::string(to_string(rec->state)));
                   }
                 }
                 res.status = 200;
                 res.set_content(runner::read_text_file(rec->dir / runner::kExportName),
                                 "text/csv; charset=utf-8");
               });

    server.Post(R"(/api/runs/([^/]+)/cancel)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  auto rec = find_run(req.matches[1]);
                  if (!rec) return send_error(res, 404, "NotFound", "unknown run");
                  {
                    std::lock_guard lock(rec->mu);
                    if (rec->terminal()) {
                      return send_error(res, 409, "WrongState",
                                        "run is " + std::string(to_string(rec->state)));
                    }
                  }
                  rec->stop.request_stop();
                  send_json(res, 202, handle_json(*rec));
                });
  }

  void start_run(const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      return send_error(res, 400, "MalformedJson", "request body must be a JSON object");
    }
    const auto dataset_id = body.value("dataset_id", std::string{});
    auto cfg_json = body.value("config", json::object());
    cfg_json["output_dir"] = opts.output_dir.string();
    runner::RunConfig cfg = runner::run_config_from_json(cfg_json, opts.config_base_dir);
    cfg.output_dir = opts.output_dir;
    cfg.run_id = body.value("run_id", cfg.run_id);
    if (cfg.run_id.empty()) cfg.run_id = runner::default_run_id();

    std::vector<Sample> dataset;
    {
      std::lock_guard lock(mu);
      auto ds = datasets.find(dataset_id);
      if (ds == datasets.end()) {
        return send_error(res, 404, "NotFound", "unknown dataset_id '" + dataset_id + "'");
      }
      dataset = ds->second;
      const std::vector<agents::ExamplePair>* ex = nullptr;
      const std::string* cb = nullptr;
      if (body.contains("examples_id")) {
        auto it = examples.find(body.at("examples_id").get<std::string>());
        if (it == examples.end()) return send_error(res, 404, "NotFound", "unknown examples_id");
        ex = &it->second;
      }
      if (body.contains("codebook_id")) {
        auto it = codebooks.find(body.at("codebook_id").get<std::string>());
        if (it == codebooks.end()) return send_error(res, 404, "NotFound", "unknown codebook_id");
        cb = &it->second;
      }
      fill_paradigm(cfg.experiment.paradigm, ex, cb);
    }

    runner::validate(cfg);
    auto clients = runner::make_clients(cfg.experiment, opts.transport_factory,
                                        opts.client_options);

    auto rec = std::make_shared<RunRecord>();
    rec->run_id = cfg.run_id;
    rec->dir = runner::run_directory(cfg);
    rec->created_at_ms = agents::now_ms();
    rec->total = dataset.size();
    {
      std::lock_guard lock(mu);
      if (runs.contains(cfg.run_id) || std::filesystem::exists(rec->dir)) {
        return send_error(res, 409, "WrongState", "run_id '" + cfg.run_id + "' already exists");
      }
      runs.emplace(cfg.run_id, rec);
    }

    rec->worker = std::jthread([rec, cfg = std::move(cfg), dataset = std::move(dataset),
                                clients = std::move(clients)] {
      {
        std::lock_guard lock(rec->mu);
        rec->state = RunState::kRunning;
      }
      rec->cv.notify_all();
      const auto sink = [&](const runner::RunEvent& e) {
        {
          std::lock_guard lock(rec->mu);
          rec->events.push_back(dump(runner::event_to_json(e)));
          if (std::holds_alternative<runner::SampleEvent>(e)) ++rec->completed;
        }
        rec->cv.notify_all();
      };
      try {
        auto summary = runner::run_batch(cfg, dataset, clients, sink, rec->stop.get_token());
        std::lock_guard lock(rec->mu);
        rec->state = summary.complete ? RunState::kDone : RunState::kCancelled;
        rec->summary = std::move(summary);
      } catch (const std::exception& e) {
        std::lock_guard lock(rec->mu);
        rec->state = RunState::kFailed;
        rec->error = e.what();
      }
      rec->cv.notify_all();
    });

    send_json(res, 201, json{{"run_id", rec->run_id}});
  }

  void stream_events(const httplib::Request& req, httplib::Response& res) {
    auto rec = find_run(req.matches[1]);
    if (!rec) return send_error(res, 404, "NotFound", "unknown run");
    std::size_t start = 0;
    if (req.has_header("Last-Event-ID")) {
      try {
        start = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
      } catch (const std::exception&) {
        start = 0;
      }
    }
    res.set_header("Cache-Control", "no-cache");
    auto cursor = std::make_shared<std::size_t>(start);
    res.set_chunked_content_provider(
        "text/event-stream", [this, rec, cursor](std::size_t, httplib::DataSink& sink) {
          std::vector<std::string> batch;
          std::size_t first = 0;
          bool finished = false;
          {
            std::unique_lock lock(rec->mu);
            rec->cv.wait_for(lock, kReplayPoll, [&] {
              return *cursor < rec->events.size() || rec->terminal() || shutting_down.load();
            });
            first = *cursor;
            for (std::size_t i = *cursor; i < rec->events.size(); ++i) {
              batch.push_back(rec->events[i]);
            }
            *cursor = rec->events.size();
            finished = rec->terminal() || shutting_down.load();
          }
          for (std::size_t k = 0; k < batch.size(); ++k) {
            std::string frame = "id: " + std::to_string(first + k) + "\ndata: " + batch[k] + "\n\n";
            if (!sink.write(frame.data(), frame.size())) return false;
          }
          if (finished) sink.done();
          return true;
        });
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

int Service::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error(ErrorCode::kIoError,
                "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->server_thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

void Service::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Service::stop() { impl_->server.stop(); }

bool Service::wait_for_run(const std::string& run_id) {
  auto rec = impl_->find_run(run_id);
  if (!rec) return false;
  std::unique_lock lock(rec->mu);
  rec->cv.wait(lock, [&] { return rec->terminal(); });
  return true;
}

}  // namespace annoloop::service
