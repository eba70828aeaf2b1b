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

#include <algorithm>

#include "annoloop/dataset.hpp"
#include "annoloop/error.hpp"
#include "annoloop/runner.hpp"
#include "annoloop/serialization.hpp"

namespace annoloop::runner {

SessionLogWriter::SessionLogWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (file_ == nullptr) throw Error(ErrorCode::kIoError, "cannot open log " + path_.string());
}

SessionLogWriter::~SessionLogWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void SessionLogWriter::append(agents::LogEntry entry) {
  std::lock_guard lock(mu_);
  entry.timestamp_ms = std::max(entry.timestamp_ms, last_ts_);
  last_ts_ = entry.timestamp_ms;
  std::string line = nlohmann::json(entry).dump(-1, ' ', false,
                                                nlohmann::json::error_handler_t::replace);
  line.push_back('\n');
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw Error(ErrorCode::kIoError, "failed to append to " + path_.string());
  }
  ++written_;
}

std::size_t SessionLogWriter::entries_written() const {
  std::lock_guard lock(mu_);
  return written_;
}

LogReadResult read_log(const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  LogReadResult out;

  std::vector<std::string_view> lines;
  std::string_view rest(content);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const bool last = i + 1 == lines.size();
    auto j = nlohmann::json::parse(lines[i], nullptr, false);
    if (!j.is_discarded()) {
      try {
        out.entries.push_back(j.get<agents::LogEntry>());
        continue;
      } catch (const std::exception&) {
        // fall through to the tail check
      }
    }
    if (last) {
      out.warnings.push_back(LogWarning::kTruncatedTail);
    } else {
      throw Error(ErrorCode::kIoError,
                  path.string() + ": corrupt log entry on line " + std::to_string(i + 1));
    }
  }
  return out;
}

LogReadResult read_log(const std::filesystem::path& output_dir, const std::string& run_id) {
  return read_log(output_dir / run_id / kSessionLogName);
}

}  // namespace annoloop::runner
