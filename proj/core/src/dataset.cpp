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

#include "annoloop/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "annoloop/csv.hpp"
#include "annoloop/error.hpp"

namespace annoloop::runner {

std::vector<Sample> parse_dataset_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) {
    throw Error(ErrorCode::kMissingHeader, "dataset is empty; expected header id,text,gold");
  }
  const auto& header = records.front().fields;
  const csv::Row expected{"id", "text", "gold"};
  if (header != expected) {
    std::string missing;
    for (const auto& col : expected) {
      if (std::find(header.begin(), header.end(), col) == header.end()) {
        missing += missing.empty() ? col : "," + col;
      }
    }
    throw Error(ErrorCode::kMissingHeader,
                missing.empty() ? "header must be exactly id,text,gold"
                                : "header is missing column(s): " + missing);
  }

  std::vector<Sample> out;
  out.reserve(records.size() - 1);
  std::set<std::string, std::less<>> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != 3) {
      throw Error(ErrorCode::kRowFieldCount,
                  "line " + std::to_string(rec.line) + ": expected 3 fields, found " +
                      std::to_string(rec.fields.size()));
    }
    if (!seen.insert(rec.fields[0]).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "line " + std::to_string(rec.line) + ": duplicate id '" + rec.fields[0] + "'");
    }
    out.push_back({out.size(), rec.fields[0], rec.fields[1], rec.fields[2]});
  }
  return out;
}

std::vector<Sample> load_dataset_csv(const std::filesystem::path& path) {
  return parse_dataset_csv(read_text_file(path));
}

std::vector<agents::ExamplePair> parse_examples_csv(std::string_view text) {
  std::vector<agents::ExamplePair> out;
  for (auto& s : parse_dataset_csv(text)) {
    out.push_back({std::move(s.text), std::move(s.gold_tagged)});
  }
  return out;
}

std::vector<agents::ExamplePair> load_examples_csv(const std::filesystem::path& path) {
  return parse_examples_csv(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace annoloop::runner
