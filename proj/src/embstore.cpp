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

#include "mmdet/embstore.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include "mmdet/errors.hpp"

namespace mmdet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the store codec assumes a little-endian host");
static_assert(sizeof(float) == 4);

constexpr char kMagic[4] = {'E', 'M', 'B', 'S'};
constexpr std::size_t kHeaderBytes = 20;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

void check_records(std::span<const StoreRecord> records, std::uint32_t dim) {
  if (dim == 0) throw ArgumentError("store dim must be positive");
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.size() > kMaxIdBytes) {
      throw ArgumentError("id longer than 64 bytes at index " +
                          std::to_string(i) + ": '" + r.id + "'");
    }
    if (!seen.insert(r.id).second) {
      throw ArgumentError("duplicate id '" + r.id + "'");
    }
    if (r.vector.size() != dim) {
      throw ArgumentError("dimension mismatch at index " + std::to_string(i) +
                          ": expected " + std::to_string(dim) + ", got " +
                          std::to_string(r.vector.size()));
    }
  }
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::string_view to_string(Modality m) {
  return m == Modality::kImage ? "image" : "text";
}

Modality parse_modality(std::string_view text) {
  if (text == "image") return Modality::kImage;
  if (text == "text") return Modality::kText;
  throw ArgumentError("unknown modality '" + std::string(text) + "'");
}

EmbeddingStore::EmbeddingStore(Modality modality, std::uint32_t dim)
    : modality_(modality), dim_(dim) {}

EmbeddingStore EmbeddingStore::from_records(std::span<const StoreRecord> records,
                                            std::uint32_t dim,
                                            Modality modality) {
  check_records(records, dim);
  EmbeddingStore store(modality, dim);
  store.ids_.reserve(records.size());
  store.data_.reserve(records.size() * dim);
  for (const auto& r : records) {
    store.ids_.push_back(r.id);
    store.data_.insert(store.data_.end(), r.vector.begin(), r.vector.end());
  }
  store.build_index();
  return store;
}

EmbeddingStore EmbeddingStore::adopt(Modality modality, std::uint32_t dim,
                                     std::vector<std::string> ids,
                                     std::vector<float> data) {
  if (data.size() != ids.size() * static_cast<std::size_t>(dim)) {
    throw ArgumentError("payload size does not match count x dim");
  }
  EmbeddingStore store(modality, dim);
  store.ids_ = std::move(ids);
  store.data_ = std::move(data);
  store.build_index();
  return store;
}

void EmbeddingStore::build_index() {
  index_.clear();
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

std::optional<std::size_t> EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingStore::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw LookupError("id '" + std::string(id) + "' not found in " +
                    std::string(to_string(modality_)) + " store");
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
  if (a.modality_ != b.modality_ || a.dim_ != b.dim_ || a.ids_ != b.ids_ ||
      a.data_.size() != b.data_.size()) {
    return false;
  }
  // Bitwise, so NaN payloads compare equal to themselves.
  return std::memcmp(a.data_.data(), b.data_.data(),
                     a.data_.size() * sizeof(float)) == 0;
}

std::string encode_store(const EmbeddingStore& store) {
  std::string out;
  std::size_t id_bytes = 0;
  for (const auto& id : store.ids()) id_bytes += 2 + id.size();
  out.reserve(kHeaderBytes + id_bytes + store.data().size_bytes());
  out.append(kMagic, 4);
  put<std::uint16_t>(out, kStoreVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(store.modality()));
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, store.dim());
  put<std::uint64_t>(out, store.size());
  for (const auto& id : store.ids()) {
    if (id.size() > kMaxIdBytes) throw ArgumentError("id too long: " + id);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
  }
  out.append(reinterpret_cast<const char*>(store.data().data()),
             store.data().size_bytes());
  return out;
}

EmbeddingStore decode_store(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw CorruptionError("truncated header: expected " +
                          std::to_string(kHeaderBytes) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic: not an EMBS store");
  }
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kStoreVersion) {
    throw FormatError("unsupported store version " + std::to_string(version));
  }
  const auto modality_code = get<std::uint8_t>(bytes, 6);
  if (modality_code > 1) {
    throw FormatError("unknown modality code " + std::to_string(modality_code));
  }
  const auto dim = get<std::uint32_t>(bytes, 8);
  const auto count = get<std::uint64_t>(bytes, 12);
  if (dim == 0) throw FormatError("store dim is zero");

  std::size_t offset = kHeaderBytes;
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    if (offset + 2 > bytes.size()) {
      throw CorruptionError("truncated id table at entry " + std::to_string(i));
    }
    const auto len = get<std::uint16_t>(bytes, offset);
    offset += 2;
    if (offset + len > bytes.size()) {
      throw CorruptionError("truncated id table at entry " + std::to_string(i));
    }
    ids.emplace_back(bytes.substr(offset, len));
    offset += len;
  }
  const std::uint64_t expected = count * dim * sizeof(float);
  const std::uint64_t actual = bytes.size() - offset;
  if (actual != expected) {
    throw CorruptionError("vector payload: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(actual));
  }
  std::vector<float> data(count * dim);
  std::memcpy(data.data(), bytes.data() + offset, expected);
  return EmbeddingStore::adopt(static_cast<Modality>(modality_code), dim,
                               std::move(ids), std::move(data));
}

EmbeddingStore open_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return decode_store(bytes);
  } catch (const CorruptionError& e) {
    throw CorruptionError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

EmbeddingStore write_store(std::span<const StoreRecord> records,
                           std::uint32_t dim, Modality modality,
                           const std::filesystem::path& path) {
  auto store = EmbeddingStore::from_records(records, dim, modality);
  write_bytes(path, encode_store(store));
  return store;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  const auto report = validate_store(store);
  if (!report.duplicate_ids.empty()) {
    throw ArgumentError("duplicate id '" + report.duplicate_ids.front() + "'");
  }
  write_bytes(path, encode_store(store));
}

std::vector<float> unit_normalize(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw UndefinedError("cannot normalize a zero or non-finite vector");
  }
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(v[i] / norm);
  }
  return out;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw UndefinedError("cosine of zero vector");
  return dot / std::sqrt(na * nb);
}

StoreValidationReport validate_store(const EmbeddingStore& store,
                                     std::optional<std::uint32_t> expected_dim) {
  StoreValidationReport report;
  report.dim_mismatch = expected_dim && *expected_dim != store.dim();
  std::unordered_set<std::string_view> seen, reported;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& id = store.ids()[i];
    if (!seen.insert(id).second && reported.insert(id).second) {
      report.duplicate_ids.push_back(id);
    }
    bool all_zero = true;
    for (float x : store.row(i)) {
      if (!std::isfinite(x)) ++report.nan_count;
      if (x != 0.0f) all_zero = false;
    }
    if (all_zero) report.zero_vector_ids.push_back(id);
  }
  return report;
}

}  // namespace mmdet
