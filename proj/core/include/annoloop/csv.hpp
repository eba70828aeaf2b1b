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
#include <string>
#include <string_view>
#include <vector>

// RFC 4180 style CSV: comma separated, double-quote quoting with "" escapes,
// LF or CRLF record ends. A leading UTF-8 BOM is ignored and blank lines are
// skipped. An unterminated quote runs to the end of the input.
namespace annoloop::csv {

using Row = std::vector<std::string>;

struct Record {
  Row fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

std::vector<Record> parse(std::string_view text);

// Quotes the field when it contains a comma, quote, CR or LF.
std::string escape_field(std::string_view field);

// Fields joined by commas, terminated by "\n".
std::string format_row(const Row& row);

}  // namespace annoloop::csv
