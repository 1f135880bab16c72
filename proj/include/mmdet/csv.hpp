/*
 * Copyright 2026 The mmdet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mmdet::csv {

// Minimal RFC 4180 reader: quoted fields, doubled quotes, embedded commas
// and newlines. Tracks the physical line where each record starts so
// callers can report parse errors precisely.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Returns false at end of input.
  bool next(std::vector<std::string>& fields);

  // 1-based line number where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// Writes one record, quoting only fields that need it, terminated by '\n'.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string quote_if_needed(std::string_view field);

// Reads a whole file; the first record must equal `header` exactly.
// Returns data rows paired with their line numbers.
struct Row {
  std::vector<std::string> fields;
  std::size_t line;
};
std::vector<Row> read_file(const std::filesystem::path& path,
                           const std::vector<std::string>& header);

// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);

// Strict full-field parse; throws ParseError naming `line`.
double parse_double(std::string_view text, std::size_t line);

}  // namespace mmdet::csv
