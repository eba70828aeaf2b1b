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

#include <map>
#include <string>

#include "annoloop/providers.hpp"

namespace annoloop::providers {

// A fully shaped HTTP call, independent of any networking library.
struct HttpCall {
  std::string scheme_host_port;  // e.g. "https://api.example.com:443"
  std::string path;
  std::map<std::string, std::string> headers;
  std::string body;
};

// OpenAI-compatible: POST {base}/chat/completions with a system+user messages
// array and response_format json_object.
// Native JSON: POST {base}/models/{model}:generateContent with a system
// instruction and responseMimeType application/json.
// Throws Error(kConfigError) for an unusable base_url.
HttpCall build_http_call(const ModelSpec& spec, const ChatRequest& request,
                         const std::string& api_key);

// Extracts message content, finish reason and usage from a reply payload.
// Non-2xx statuses keep an empty body_text; undecodable 2xx payloads also do,
// which classifies as a malformed response.
RawResponse parse_http_reply(ProviderKind kind, int status, const std::string& payload);

// Replaces every occurrence of `secret` in `text`.
std::string scrub(std::string text, const std::string& secret);

class HttpTransport final : public Transport {
 public:
  TransportResult send(const ModelSpec& spec, const ChatRequest& request) override;
};

}  // namespace annoloop::providers
