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

#include "annoloop/http_transport.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "annoloop/error.hpp"

namespace annoloop::providers {
namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "base_url '" + url + "' has no scheme");
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_begin == std::string::npos) {
    out.scheme_host_port = url;
  } else {
    out.scheme_host_port = url.substr(0, path_begin);
    out.path_prefix = url.substr(path_begin);
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::optional<std::int64_t> optional_int(const json& j, const char* key) {
  if (j.is_object() && j.contains(key) && j.at(key).is_number_integer()) {
    return j.at(key).get<std::int64_t>();
  }
  return std::nullopt;
}

void parse_openai(const json& j, RawResponse& r) {
  const auto& choice = j.at("choices").at(0);
  const auto& content = choice.at("message").at("content");
  if (content.is_string()) r.body_text = content.get<std::string>();
  const auto reason = choice.value("finish_reason", std::string{});
  r.finish_reason = reason == "stop"     ? FinishReason::kStop
                    : reason == "length" ? FinishReason::kLength
                                         : FinishReason::kOther;
  if (j.contains("usage")) {
    r.prompt_tokens = optional_int(j.at("usage"), "prompt_tokens");
    r.output_tokens = optional_int(j.at("usage"), "completion_tokens");
  }
}

void parse_native(const json& j, RawResponse& r) {
  const auto& cand = j.at("candidates").at(0);
  if (cand.contains("content") && cand.at("content").contains("parts")) {
    for (const auto& part : cand.at("content").at("parts")) {
      if (part.contains("text") && part.at("text").is_string()) {
        r.body_text += part.at("text").get<std::string>();
      }
    }
  }
  const auto reason = cand.value("finishReason", std::string{});
  r.finish_reason = reason == "STOP"         ? FinishReason::kStop
                    : reason == "MAX_TOKENS" ? FinishReason::kLength
                                             : FinishReason::kOther;
  if (j.contains("usageMetadata")) {
    r.prompt_tokens = optional_int(j.at("usageMetadata"), "promptTokenCount");
    r.output_tokens = optional_int(j.at("usageMetadata"), "candidatesTokenCount");
  }
}

}  // namespace

HttpCall build_http_call(const ModelSpec& spec, const ChatRequest& request,
                         const std::string& api_key) {
  const auto url = split_url(spec.base_url);
  HttpCall call;
  call.scheme_host_port = url.scheme_host_port;
  call.headers["Content-Type"] = "application/json";

  json body;
  if (spec.kind == ProviderKind::kNativeJson) {
    call.path = url.path_prefix + "/models/" + spec.model_id + ":generateContent";
    if (!api_key.empty()) call.headers["x-goog-api-key"] = api_key;
    if (!request.system.empty()) {
      body["systemInstruction"] = {{"parts", json::array({{{"text", request.system}}})}};
    }
    body["contents"] =
        json::array({{{"role", "user"}, {"parts", json::array({{{"text", request.user}}})}}});
    json gen = {{"temperature", spec.temperature}, {"maxOutputTokens", spec.max_output_tokens}};
    if (request.json_mode) gen["responseMimeType"] = "application/json";
    body["generationConfig"] = std::move(gen);
  } else {
    call.path = url.path_prefix + "/chat/completions";
    if (!api_key.empty()) call.headers["Authorization"] = "Bearer " + api_key;
    json messages = json::array();
    if (!request.system.empty()) {
      messages.push_back({{"role", "system"}, {"content", request.system}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user}});
    body = {{"model", spec.model_id},
            {"messages", std::move(messages)},
            {"temperature", spec.temperature},
            {"max_tokens", spec.max_output_tokens}};
    if (request.json_mode) body["response_format"] = {{"type", "json_object"}};
  }
  call.body = body.dump();
  return call;
}

RawResponse parse_http_reply(ProviderKind kind, int status, const std::string& payload) {
  RawResponse r;
  r.http_status = status;
  r.wire_body = payload;
  r.finish_reason = FinishReason::kOther;
  if (status < 200 || status >= 300) return r;
  const auto j = json::parse(payload, nullptr, false);
  if (j.is_discarded()) return r;
  try {
    if (kind == ProviderKind::kNativeJson) {
      parse_native(j, r);
    } else {
      parse_openai(j, r);
    }
  } catch (const json::exception&) {
    r.body_text.clear();
    r.finish_reason = FinishReason::kOther;
  }
  return r;
}

std::string scrub(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  for (auto pos = text.find(secret); pos != std::string::npos; pos = text.find(secret, pos)) {
    text.replace(pos, secret.size(), "[redacted]");
  }
  return text;
}

TransportResult HttpTransport::send(const ModelSpec& spec, const ChatRequest& request) {
  std::string api_key;
  if (!spec.api_key_ref.empty()) {
    const char* v = std::getenv(spec.api_key_ref.c_str());
    if (v == nullptr || *v == '\0') {
      // Surfaced as an authentication failure so it is not retried.
      RawResponse r;
      r.http_status = 401;
      r.finish_reason = FinishReason::kOther;
      r.wire_body = "environment variable " + spec.api_key_ref + " is not set";
      return r;
    }
    api_key = v;
  }

  const HttpCall call = build_http_call(spec, request, api_key);
  httplib::Client client(call.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(spec.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  for (const auto& [k, v] : call.headers) {
    if (k != "Content-Type") headers.emplace(k, v);
  }

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(call.path, headers, call.body, "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                            elapsed >= timeout);
    return TransportFailure{timed_out ? ErrorClass::kTimeout : ErrorClass::kNetworkError,
                            scrub(httplib::to_string(err), api_key)};
  }
  return parse_http_reply(spec.kind, res->status, scrub(res->body, api_key));
}

}  // namespace annoloop::providers
