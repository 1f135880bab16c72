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

#include "mmdet/dataset.hpp"

#include <fstream>

#include "mmdet/csv.hpp"
#include "mmdet/errors.hpp"

namespace mmdet {
namespace {

const std::vector<std::string> kDatasetHeader = {"image_id", "caption_id",
                                                 "label", "source"};
const std::vector<std::string> kPairsHeader = {"image_id", "caption_id"};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kTrue:
      return "True";
    case Label::kMC:
      return "MC";
    case Label::kOOC:
      return "OOC";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "True") return Label::kTrue;
  if (text == "MC") return Label::kMC;
  if (text == "OOC") return Label::kOOC;
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "validation" || text == "val") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw ArgumentError("unknown split '" + std::string(text) + "'");
}

ClassCounts Dataset::class_counts() const {
  ClassCounts c;
  for (const auto& r : records) ++c[r.label];
  return c;
}

bool Dataset::balanced() const {
  const auto c = class_counts();
  std::size_t ref = 0;
  for (auto n : c.counts) {
    if (n == 0) continue;
    if (ref == 0) ref = n;
    if (n != ref) return false;
  }
  return true;
}

void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  csv::write_row(out, kDatasetHeader);
  for (const auto& r : dataset.records) {
    csv::write_row(out, {r.image_id, r.caption_id, std::string(to_string(r.label)),
                         r.source});
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path, Split split) {
  Dataset ds;
  ds.split = split;
  for (auto& row : csv::read_file(path, kDatasetHeader)) {
    auto label = parse_label(row.fields[2]);
    if (!label) {
      throw ParseError(path.string() + ": unknown label '" + row.fields[2] + "'",
                       row.line);
    }
    if (row.fields[0].empty() || row.fields[1].empty()) {
      throw ParseError(path.string() + ": empty id", row.line);
    }
    ds.records.push_back({std::move(row.fields[0]), std::move(row.fields[1]),
                          *label, std::move(row.fields[3]), std::nullopt});
  }
  return ds;
}

void write_pairs_csv(const std::vector<TruthfulPair>& pairs,
                     const std::filesystem::path& path) {
  auto out = open_out(path);
  csv::write_row(out, kPairsHeader);
  for (const auto& p : pairs) csv::write_row(out, {p.image_id, p.caption_id});
}

std::vector<TruthfulPair> read_pairs_csv(const std::filesystem::path& path) {
  std::vector<TruthfulPair> pairs;
  for (auto& row : csv::read_file(path, kPairsHeader)) {
    if (row.fields[0].empty() || row.fields[1].empty()) {
      throw ParseError(path.string() + ": empty id", row.line);
    }
    pairs.push_back({std::move(row.fields[0]), std::move(row.fields[1])});
  }
  return pairs;
}

}  // namespace mmdet
