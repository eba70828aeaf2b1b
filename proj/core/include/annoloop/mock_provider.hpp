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
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "annoloop/providers.hpp"

namespace annoloop::providers {

struct Fault {
  std::optional<std::size_t> truncate_after;  // characters kept; finish=length
  std::optional<int> status_code;             // reply with this status...
  int status_times = 0;                       // ...this many times; < 0 means always
  std::optional<std::int64_t> delay_ms;       // > timeout_ms yields a timeout
};

// Responses are looked up by exact user message, then by the first `contains`
// rule whose needle occurs in it, then the responder, then the ordered defaults
// (consumed in order, the last one repeating).
struct MockScript {
  std::map<std::string, std::string> fixtures;
  std::vector<std::pair<std::string, std::string>> contains;  // needle, body
  std::vector<std::string> defaults;
  std::map<std::string, Fault> faults;  // keyed by user message
  std::optional<Fault> default_fault;
  std::function<std::optional<std::string>(const ChatRequest&)> responder;
};

// Fixture file layout:
//   {"fixtures": {"<user message>": "<body>"},
//    "contains": [{"match": "<substring>", "body": "<body>"}],
//    "defaults": ["<body>", ...],
//    "faults": {"<user message>": {"status": 429, "times": 2,
//               "truncate_after": 20, "delay_ms": 5000}},
//    "default_fault": {...}}
MockScript mock_script_from_json(const nlohmann::json& j);
MockScript load_mock_script(const std::filesystem::path& path);

class MockTransport final : public Transport {
 public:
  explicit MockTransport(MockScript script) : script_(std::move(script)) {}

  // Throws Error(kMissingFixture) when nothing matches.
  TransportResult send(const ModelSpec& spec, const ChatRequest& request) override;

  std::size_t call_count() const;
  std::size_t call_count(const std::string& user) const;

 private:
  MockScript script_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::size_t next_default_ = 0;
  std::map<std::string, std::size_t> calls_by_user_;
  std::map<std::string, int> faults_fired_;
};

}  // namespace annoloop::providers
