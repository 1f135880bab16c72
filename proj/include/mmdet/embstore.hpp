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

// Binary embedding store ("EMBS"), one modality per file.
//
// Layout, all integers and floats little-endian, no padding:
//   0..3    magic "EMBS"
//   4..5    u16 format version (1)
//   6       u8 modality (0 = image, 1 = text)
//   7       u8 reserved (0)
//   8..11   u32 dim
//   12..19  u64 count
//   id table: count x (u16 byte length, UTF-8 bytes)
//   payload: count * dim f32, row-major
//
// Vectors are archived exactly as extracted; normalization happens when
// they are loaded into a retrieval structure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmdet {

enum class Modality : std::uint8_t { kImage = 0, kText = 1 };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kMaxIdBytes = 64;

struct StoreRecord {
  std::string id;
  std::vector<float> vector;
};

class EmbeddingStore {
 public:
  EmbeddingStore(Modality modality, std::uint32_t dim);

  // Builds a store and enforces the write-side invariants: dim > 0,
  // unique ids of at most 64 bytes, every vector of length dim. Non-finite
  // values are accepted here and reported by validate_store.
  static EmbeddingStore from_records(std::span<const StoreRecord> records,
                                     std::uint32_t dim, Modality modality);

  // No invariant checks beyond shape; duplicate ids keep their first index.
  // Used by the reader so that damaged files can still be validated.
  static EmbeddingStore adopt(Modality modality, std::uint32_t dim,
                              std::vector<std::string> ids,
                              std::vector<float> data);

  Modality modality() const { return modality_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> data() const { return data_; }
  std::span<const float> row(std::size_t index) const {
    return {data_.data() + index * dim_, dim_};
  }

  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  // Throws LookupError naming the id.
  std::size_t index_of(std::string_view id) const;
  std::span<const float> vector(std::string_view id) const {
    return row(index_of(id));
  }

  // Test hook: mutable access to raw payload.
  std::span<float> mutable_data() { return data_; }

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

 private:
  void build_index();

  Modality modality_;
  std::uint32_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Validates the records, writes the file, and returns the in-memory store.
EmbeddingStore write_store(std::span<const StoreRecord> records,
                           std::uint32_t dim, Modality modality,
                           const std::filesystem::path& path);

// Serializes an existing store (e.g. one produced by the synthetic
// generator). Rejects duplicate ids.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);

std::string encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::string_view bytes);
EmbeddingStore open_store(const std::filesystem::path& path);

// L2 normalization computed in double, rounded to f32 on output.
// Throws UndefinedError on an all-zero (or non-finite norm) vector.
std::vector<float> unit_normalize(std::span<const float> v);

// Cosine similarity with double accumulation.
double cosine(std::span<const float> a, std::span<const float> b);

struct StoreValidationReport {
  std::size_t nan_count = 0;  // non-finite components (NaN or +-Inf)
  std::vector<std::string> duplicate_ids;
  bool dim_mismatch = false;
  std::vector<std::string> zero_vector_ids;

  bool clean() const {
    return nan_count == 0 && duplicate_ids.empty() && !dim_mismatch &&
           zero_vector_ids.empty();
  }
};

StoreValidationReport validate_store(
    const EmbeddingStore& store,
    std::optional<std::uint32_t> expected_dim = std::nullopt);

}  // namespace mmdet
