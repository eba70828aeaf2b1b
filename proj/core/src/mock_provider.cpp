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

#include "annoloop/mock_provider.hpp"

#include <fstream>
#include <sstream>

#include "annoloop/error.hpp"
#include "annoloop/utf8.hpp"

namespace annoloop::providers {
namespace {

Fault fault_from_json(const nlohmann::json& j) {
  Fault f;
  if (j.contains("truncate_after")) f.truncate_after = j.at("truncate_after").get<std::size_t>();
  if (j.contains("status")) {
    f.status_code = j.at("status").get<int>();
    f.status_times = j.value("times", -1);
  }
  if (j.contains("delay_ms")) f.delay_ms = j.at("delay_ms").get<std::int64_t>();
  return f;
}

}  // namespace

MockScript mock_script_from_json(const nlohmann::json& j) {
  MockScript s;
  try {
    if (j.contains("fixtures")) {
      for (const auto& [k, v] : j.at("fixtures").items()) s.fixtures[k] = v.get<std::string>();
    }
    if (j.contains("contains")) {
      for (const auto& rule : j.at("contains")) {
        s.contains.emplace_back(rule.at("match").get<std::string>(),
                                rule.at("body").get<std::string>());
      }
    }
    if (j.contains("defaults")) s.defaults = j.at("defaults").get<std::vector<std::string>>();
    if (j.contains("faults")) {
      for (const auto& [k, v] : j.at("faults").items()) s.faults[k] = fault_from_json(v);
    }
    if (j.contains("default_fault")) s.default_fault = fault_from_json(j.at("default_fault"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("bad mock fixture: ") + e.what());
  }
  return s;
}

MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open mock fixture " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kConfigError, "mock fixture " + path.string() + " is not valid JSON");
  }
  return mock_script_from_json(j);
}

TransportResult MockTransport::send(const ModelSpec& spec, const ChatRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  ++calls_by_user_[request.user];

  const Fault* fault = nullptr;
  if (auto it = script_.faults.find(request.user); it != script_.faults.end()) {
    fault = &it->second;
  } else if (script_.default_fault) {
    fault = &*script_.default_fault;
  }

  if (fault && fault->delay_ms && *fault->delay_ms > spec.timeout_ms) {
    return TransportFailure{ErrorClass::kTimeout,
                            "mock delay " + std::to_string(*fault->delay_ms) +
                                " ms exceeds timeout " + std::to_string(spec.timeout_ms) + " ms"};
  }
  if (fault && fault->status_code) {
    int& fired = faults_fired_[request.user];
    if (fault->status_times < 0 || fired < fault->status_times) {
      ++fired;
      RawResponse r;
      r.http_status = *fault->status_code;
      r.finish_reason = FinishReason::kOther;
      r.wire_body = R"({"error":{"code":)" + std::to_string(*fault->status_code) +
                    R"(,"message":"mock fault"}})";
      return r;
    }
  }

  std::optional<std::string> body;
  if (auto it = script_.fixtures.find(request.user); it != script_.fixtures.end()) {
    body = it->second;
  } else {
    for (const auto& [needle, reply] : script_.contains) {
      if (request.user.find(needle) != std::string::npos) {
        body = reply;
        break;
      }
    }
  }
  if (!body && script_.responder) {
    body = script_.responder(request);
  }
  if (!body && !script_.defaults.empty()) {
    body = script_.defaults[std::min(next_default_, script_.defaults.size() - 1)];
    ++next_default_;
  }
  if (!body) {
    throw Error(ErrorCode::kMissingFixture,
                "no mock fixture for user message of " + std::to_string(request.user.size()) +
                    " bytes");
  }

  RawResponse r;
  r.body_text = std::move(*body);
  if (fault && fault->truncate_after) {
    const auto starts = utf8::char_starts(r.body_text);
    const std::size_t keep = std::min(*fault->truncate_after, starts.size() - 1);
    r.body_text.resize(starts[keep]);
    r.finish_reason = FinishReason::kLength;
  }
  return r;
}

std::size_t MockTransport::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockTransport::call_count(const std::string& user) const {
  std::lock_guard lock(mu_);
  auto it = calls_by_user_.find(user);
  return it == calls_by_user_.end() ? 0 : it->second;
}

}  // namespace annoloop::providers
