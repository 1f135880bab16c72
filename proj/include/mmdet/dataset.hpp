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

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmdet {

// Three-way taxonomy: truthful pair, miscaptioned image, out-of-context
// image/caption combination.
enum class Label : std::uint8_t { kTrue = 0, kMC = 1, kOOC = 2 };
inline constexpr std::array<Label, 3> kAllLabels = {Label::kTrue, Label::kMC,
                                                    Label::kOOC};

std::string_view to_string(Label label);
// Accepts "True", "MC", "OOC" (case-sensitive); nullopt otherwise.
std::optional<Label> parse_label(std::string_view text);

enum class Split : std::uint8_t { kTrain, kValidation, kTest };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct PairRecord {
  std::string image_id;
  std::string caption_id;
  Label label = Label::kTrue;
  std::string source;
  // Retrieval similarity for generated MC records; not serialized.
  std::optional<double> similarity;

  friend bool operator==(const PairRecord& a, const PairRecord& b) {
    return a.image_id == b.image_id && a.caption_id == b.caption_id &&
           a.label == b.label && a.source == b.source;
  }
};

struct ClassCounts {
  std::array<std::size_t, 3> counts{};
  std::size_t operator[](Label l) const {
    return counts[static_cast<std::size_t>(l)];
  }
  std::size_t& operator[](Label l) { return counts[static_cast<std::size_t>(l)]; }
  std::size_t total() const { return counts[0] + counts[1] + counts[2]; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct Dataset {
  std::vector<PairRecord> records;
  Split split = Split::kTrain;

  ClassCounts class_counts() const;
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  // True when every class that occurs has the same count.
  bool balanced() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.split == b.split && a.records == b.records;
  }
};

struct TruthfulPair {
  std::string image_id;
  std::string caption_id;
  friend bool operator==(const TruthfulPair&, const TruthfulPair&) = default;
};

// CSV `image_id,caption_id,label,source`. The split is not part of the
// file; callers state it.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, Split split);

// CSV `image_id,caption_id`.
void write_pairs_csv(const std::vector<TruthfulPair>& pairs,
                     const std::filesystem::path& path);
std::vector<TruthfulPair> read_pairs_csv(const std::filesystem::path& path);

}  // namespace mmdet
