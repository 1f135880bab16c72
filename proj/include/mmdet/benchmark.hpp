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

// Modality-balanced evaluation sets.
//
// A trio is one fact-checked case: a truthful image/caption, a false caption
// for the same image, and optionally an out-of-context image for the
// truthful caption. Expanding trios gives every image one True and one MC
// record and every caption (when an OOC image exists) one True and one OOC
// record, so neither modality alone can beat chance on those subsets.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmdet/dataset.hpp"
#include "mmdet/embstore.hpp"

namespace mmdet {

struct TrioRecord {
  std::string group_id;
  std::string true_image_id;
  std::string true_caption_id;
  std::string false_caption_id;
  std::optional<std::string> ooc_image_id;
  // Manifest-only metadata; not needed for expansion.
  std::string true_caption_text;
  std::string false_caption_text;
  std::optional<std::string> true_image_sha256;
  std::optional<std::string> ooc_image_sha256;

  friend bool operator==(const TrioRecord&, const TrioRecord&) = default;
};

inline constexpr std::string_view kBenchmarkSource = "benchmark";

// Throws BalanceError naming the first id used by more than one trio slot.
void check_trios(const std::vector<TrioRecord>& trios);

// (I_t, C_t, True), (I_t, C_f, MC) and, when present, (I_x, C_t, OOC).
// Split = test.
Dataset expand_trios(const std::vector<TrioRecord>& trios);

struct BalanceReport {
  std::map<std::string, std::size_t> image_counts;    // records per image
  std::map<std::string, std::size_t> caption_counts;  // records per caption
  ClassCounts class_counts;
  std::size_t doubly_placed_captions = 0;  // True + OOC
  std::size_t singly_placed_captions = 0;  // True only (no OOC image)
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

BalanceReport validate_modality_balance(const Dataset& dataset);
// JSON with a fixed key order.
std::string balance_report_json(const BalanceReport& report);

enum class BinaryMode : std::uint8_t { kTrueVsOOC, kTrueVsMC, kMerged };
std::string_view to_string(BinaryMode mode);
BinaryMode parse_binary_mode(std::string_view text);

// Two-class view. Labels are kept as-is; a binary classifier treats every
// non-True label as the misinformation class.
Dataset derive_binary(const Dataset& dataset, BinaryMode mode);

// Reads an expanded benchmark (dataset CSV) and checks every id against the
// stores. Split = test.
Dataset load_benchmark(const std::filesystem::path& manifest,
                       const EmbeddingStore& images, const EmbeddingStore& texts);

// Trio manifest CSV:
// group_id,true_image,true_caption_text,true_caption_id,false_caption_text,
// false_caption_id,ooc_image
//
// Image fields are image ids, optionally followed by "#sha256=<hex>"; when
// `media_root` is given, the file media_root/<id> is hashed and compared.
std::vector<TrioRecord> read_trio_manifest(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& media_root = std::nullopt);
void write_trio_manifest(const std::vector<TrioRecord>& trios,
                         const std::filesystem::path& path);

}  // namespace mmdet
