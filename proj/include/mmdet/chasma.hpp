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

// Crossmodal hard synthetic misalignment.
//
// For every truthful (image, caption) pair a uniform p is drawn. When
// p <= threshold the false caption is the pool entry most similar to the
// truthful caption (text-text); otherwise the one most similar to the image
// (image-text). Similarity is cosine, computed as the dot product of
// unit-normalized f32 vectors accumulated in f64 in index order, which makes
// every (query, candidate) score bit-identical between the blocked kernel
// and the brute-force loop. Ties go to the lexicographically smallest id.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmdet/dataset.hpp"
#include "mmdet/embstore.hpp"

namespace mmdet {

class CaptionPool {
 public:
  // Normalizes every row. Throws UndefinedError on a zero vector and
  // ArgumentError on duplicate ids.
  static CaptionPool from_store(const EmbeddingStore& store);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::uint32_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return {embeddings_.data() + i * dim_, dim_};
  }

 private:
  std::uint32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> embeddings_;
};

enum class Branch : std::uint8_t { kTextText, kImageText };
std::string_view to_string(Branch b);
Branch parse_branch(std::string_view text);

struct MisalignmentAssignment {
  std::string image_id;
  std::string true_caption_id;
  std::string false_caption_id;
  Branch branch = Branch::kTextText;
  double p = 0.0;
  double similarity = 0.0;

  friend bool operator==(const MisalignmentAssignment&,
                         const MisalignmentAssignment&) = default;
};

struct MisalignOptions {
  std::uint64_t seed = 0;
  double threshold = 0.5;
  unsigned workers = 1;
};

struct MisalignStats {
  // Text-branch picks whose similarity rounds to 1 (query caption present
  // verbatim in the pool). Legal, but usually means overlapping corpora.
  std::size_t exact_matches = 0;
};

std::vector<MisalignmentAssignment> misalign(
    std::span<const TruthfulPair> pairs, const EmbeddingStore& images,
    const EmbeddingStore& texts, const CaptionPool& pool,
    const MisalignOptions& options = {}, MisalignStats* stats = nullptr);

// Reference definition: a plain double loop over pairs and candidates.
std::vector<MisalignmentAssignment> misalign_bruteforce(
    std::span<const TruthfulPair> pairs, const EmbeddingStore& images,
    const EmbeddingStore& texts, const CaptionPool& pool,
    std::uint64_t seed = 0, double threshold = 0.5);

// The p sequence both implementations draw: one value per pair, in order.
std::vector<double> draw_branch_probabilities(std::size_t n, std::uint64_t seed);

inline constexpr std::string_view kChasmaSource = "chasma";

// One True record per pair, one MC record (same image, assigned false
// caption) per assignment. Split = train.
Dataset build_mc_dataset(std::span<const TruthfulPair> pairs,
                         std::span<const MisalignmentAssignment> assignments);

// Keeps one MC record per false caption: highest similarity, then smallest
// image id. Non-MC records pass through. Record order is preserved.
Dataset deduplicate_false_captions(const Dataset& dataset);

// Reduces every present class to the smallest class count by seeded
// sampling without replacement. Surviving records keep their order.
Dataset downsample_balance(const Dataset& dataset, std::uint64_t seed);

enum class AggregateKind : std::uint8_t { kBinary, kMulticlass };

// Concatenates (provenance preserved) then balances. Multiclass requires at
// least one source contributing OOC and at least one contributing MC.
Dataset aggregate(std::span<const Dataset> datasets, std::uint64_t seed,
                  AggregateKind kind = AggregateKind::kBinary);

// CSV `image_id,true_caption_id,false_caption_id,branch,p,similarity`.
void write_assignments_csv(std::span<const MisalignmentAssignment> rows,
                           const std::filesystem::path& path);
std::vector<MisalignmentAssignment> read_assignments_csv(
    const std::filesystem::path& path);

}  // namespace mmdet
