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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "annoloop/runner.hpp"

// HTTP/1.1 JSON facade over the runner.
//
//   GET  /api/health                  {"status":"ok","version":...}
//   POST /api/datasets     (CSV)      {"dataset_id","sample_count"}
//   POST /api/codebooks    (text)     {"id"}
//   POST /api/examples     (CSV)      {"id","sample_count"}
//   POST /api/runs         (JSON)     {"run_id"}
//   GET  /api/runs/{id}               run handle
//   GET  /api/runs/{id}/events        text/event-stream, full replay then live
//   GET  /api/runs/{id}/summary       RunSummary JSON (409 until finished)
//   GET  /api/runs/{id}/log?offset=N&limit=M
//   GET  /api/runs/{id}/export.csv    export bytes (409 until finished)
//   POST /api/runs/{id}/cancel        best effort
namespace annoloop::service {

enum class RunState { kPending, kRunning, kDone, kFailed, kCancelled };

std::string_view to_string(RunState s) noexcept;

struct ServiceOptions {
  std::filesystem::path output_dir = "runs";
  // Value for Access-Control-Allow-Origin; empty disables CORS headers.
  std::string cors_origin = "*";
  runner::TransportFactory transport_factory = providers::make_transport;
  providers::ClientOptions client_options;
  // Base directory for relative paths inside run configs (mock fixtures,
  // template directories).
  std::filesystem::path config_base_dir;
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts serving on a background thread. Port 0 picks a free
  // port. Returns the bound port; throws Error(kIoError) on bind failure.
  int start(const std::string& host, int port);

  // Serves on the calling thread until stop().
  void listen_blocking(const std::string& host, int port);

  void stop();

  // Blocks until the run reaches a terminal state. False if unknown.
  bool wait_for_run(const std::string& run_id);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace annoloop::service
