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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "annoloop/agents.hpp"
#include "annoloop/workflow.hpp"

namespace annoloop::runner {

inline constexpr std::string_view kDatasetHeader = "id,text,gold";

// Exact header "id,text,gold", then one sample per record in file order.
// Throws Error(kMissingHeader), Error(kRowFieldCount) or Error(kDuplicateId).
std::vector<Sample> parse_dataset_csv(std::string_view text);
std::vector<Sample> load_dataset_csv(const std::filesystem::path& path);

// Few-shot example files share the dataset layout: text is the source, gold
// the tagged demonstration.
std::vector<agents::ExamplePair> parse_examples_csv(std::string_view text);
std::vector<agents::ExamplePair> load_examples_csv(const std::filesystem::path& path);

// Throws Error(kIoError).
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace annoloop::runner
