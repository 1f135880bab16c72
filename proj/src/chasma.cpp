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

#include "mmdet/chasma.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "mmdet/csv.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/rng.hpp"

namespace mmdet {
namespace {

constexpr std::size_t kLanes = 16;        // candidates per packed block
constexpr std::size_t kQueryTile = 4;     // queries per register tile
constexpr std::size_t kChunkBlocks = 16;  // blocks per cache chunk

typedef float f16v __attribute__((vector_size(64)));
typedef double d8v __attribute__((vector_size(64)));

struct Best {
  double sim = -std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();
};

inline void consider(Best& best, double sim, std::size_t index,
                     const std::vector<std::string>& ids) {
  if (sim > best.sim ||
      (sim == best.sim && (best.index == std::numeric_limits<std::size_t>::max() ||
                           ids[index] < ids[best.index]))) {
    best.sim = sim;
    best.index = index;
  }
}

// Pool laid out for the kernel: block b holds candidates [16b, 16b+16),
// stored k-major so one 64-byte load fetches coordinate k of 16 candidates.
struct PackedPool {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::size_t blocks = 0;
  std::vector<float, std::allocator<float>> data;

  explicit PackedPool(const CaptionPool& pool)
      : dim(pool.dim()), count(pool.size()),
        blocks((pool.size() + kLanes - 1) / kLanes),
        data(blocks * pool.dim() * kLanes + kLanes, 0.0f) {
    for (std::size_t j = 0; j < count; ++j) {
      const auto row = pool.row(j);
      const std::size_t b = j / kLanes, lane = j % kLanes;
      float* base = block(b);
      for (std::size_t k = 0; k < dim; ++k) base[k * kLanes + lane] = row[k];
    }
  }

  // Block starts are 64-byte aligned relative to an aligned base.
  float* block(std::size_t b) { return aligned_base() + b * dim * kLanes; }
  const float* block(std::size_t b) const {
    return const_cast<PackedPool*>(this)->block(b);
  }

 private:
  float* aligned_base() {
    auto addr = reinterpret_cast<std::uintptr_t>(data.data());
    auto aligned = (addr + 63) & ~std::uintptr_t{63};
    return reinterpret_cast<float*>(aligned);
  }
};

// Scores `nq` (<= 4) queries against one 16-candidate block. Each lane is a
// sequential f64 sum over k, the same order as the scalar reference.
void score_block(const float* const* queries, std::size_t nq,
                 const float* block, std::size_t dim,
                 double (*out)[kLanes]) {
  d8v acc[kQueryTile][2] = {};
  for (std::size_t k = 0; k < dim; ++k) {
    f16v c;
    __builtin_memcpy(&c, block + k * kLanes, sizeof(c));
    typedef float f8v __attribute__((vector_size(32)));
    f8v lo, hi;
    __builtin_memcpy(&lo, &c, sizeof(lo));
    __builtin_memcpy(&hi, reinterpret_cast<const char*>(&c) + 32, sizeof(hi));
    const d8v dlo = __builtin_convertvector(lo, d8v);
    const d8v dhi = __builtin_convertvector(hi, d8v);
    for (std::size_t q = 0; q < kQueryTile; ++q) {
      if (q >= nq) break;
      const double x = static_cast<double>(queries[q][k]);
      acc[q][0] += x * dlo;
      acc[q][1] += x * dhi;
    }
  }
  for (std::size_t q = 0; q < nq; ++q) {
    for (std::size_t j = 0; j < 8; ++j) {
      out[q][j] = acc[q][0][j];
      out[q][8 + j] = acc[q][1][j];
    }
  }
}

void scan_range(const PackedPool& packed, const CaptionPool& pool,
                const std::vector<std::vector<float>>& queries,
                std::size_t begin, std::size_t end, std::vector<Best>& best) {
  double scores[kQueryTile][kLanes];
  for (std::size_t chunk = 0; chunk < packed.blocks; chunk += kChunkBlocks) {
    const std::size_t chunk_end = std::min(packed.blocks, chunk + kChunkBlocks);
    for (std::size_t q0 = begin; q0 < end; q0 += kQueryTile) {
      const std::size_t nq = std::min(kQueryTile, end - q0);
      const float* qptr[kQueryTile] = {};
      for (std::size_t q = 0; q < nq; ++q) qptr[q] = queries[q0 + q].data();
      for (std::size_t b = chunk; b < chunk_end; ++b) {
        score_block(qptr, nq, packed.block(b), packed.dim, scores);
        const std::size_t first = b * kLanes;
        const std::size_t valid = std::min(kLanes, packed.count - first);
        for (std::size_t q = 0; q < nq; ++q) {
          for (std::size_t j = 0; j < valid; ++j) {
            consider(best[q0 + q], scores[q][j], first + j, pool.ids());
          }
        }
      }
    }
  }
}

struct Prepared {
  std::vector<double> p;
  std::vector<Branch> branch;
  std::vector<std::vector<float>> queries;
};

Prepared prepare_queries(std::span<const TruthfulPair> pairs,
                         const EmbeddingStore& images,
                         const EmbeddingStore& texts, const CaptionPool& pool,
                         std::uint64_t seed, double threshold) {
  if (pool.empty()) throw ArgumentError("misalign: caption pool is empty");
  if (images.dim() != pool.dim() || texts.dim() != pool.dim()) {
    throw ArgumentError("misalign: image, text and pool stores must share dim");
  }
  Prepared prep;
  prep.p = draw_branch_probabilities(pairs.size(), seed);
  prep.branch.resize(pairs.size());
  prep.queries.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool text_branch = prep.p[i] <= threshold;
    prep.branch[i] = text_branch ? Branch::kTextText : Branch::kImageText;
    // Both ids must resolve whatever the branch.
    const auto image = images.vector(pairs[i].image_id);
    const auto caption = texts.vector(pairs[i].caption_id);
    prep.queries[i] = unit_normalize(text_branch ? caption : image);
  }
  return prep;
}

std::vector<MisalignmentAssignment> assemble(std::span<const TruthfulPair> pairs,
                                             const Prepared& prep,
                                             const CaptionPool& pool,
                                             const std::vector<Best>& best) {
  std::vector<MisalignmentAssignment> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out.push_back({pairs[i].image_id, pairs[i].caption_id,
                   pool.ids()[best[i].index], prep.branch[i], prep.p[i],
                   best[i].sim});
  }
  return out;
}

}  // namespace

CaptionPool CaptionPool::from_store(const EmbeddingStore& store) {
  CaptionPool pool;
  pool.dim_ = store.dim();
  pool.ids_ = store.ids();
  pool.embeddings_.reserve(store.data().size());
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!seen.insert(store.ids()[i]).second) {
      throw ArgumentError("caption pool: duplicate id '" + store.ids()[i] + "'");
    }
    std::vector<float> row;
    try {
      row = unit_normalize(store.row(i));
    } catch (const UndefinedError&) {
      throw UndefinedError("caption pool: zero vector for id '" +
                           store.ids()[i] + "'");
    }
    pool.embeddings_.insert(pool.embeddings_.end(), row.begin(), row.end());
  }
  return pool;
}

std::string_view to_string(Branch b) {
  return b == Branch::kTextText ? "text_text" : "image_text";
}

Branch parse_branch(std::string_view text) {
  if (text == "text_text") return Branch::kTextText;
  if (text == "image_text") return Branch::kImageText;
  throw ArgumentError("unknown branch '" + std::string(text) + "'");
}

std::vector<double> draw_branch_probabilities(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, "misalign");
  std::vector<double> p(n);
  for (auto& v : p) v = rng.uniform();
  return p;
}

std::vector<MisalignmentAssignment> misalign(
    std::span<const TruthfulPair> pairs, const EmbeddingStore& images,
    const EmbeddingStore& texts, const CaptionPool& pool,
    const MisalignOptions& options, MisalignStats* stats) {
  auto prep = prepare_queries(pairs, images, texts, pool, options.seed,
                              options.threshold);
  std::vector<Best> best(pairs.size());
  if (!pairs.empty()) {
    const PackedPool packed(pool);
    const unsigned workers = std::max(1u, options.workers);
    const std::size_t per =
        (pairs.size() + workers - 1) / workers;
    if (workers == 1) {
      scan_range(packed, pool, prep.queries, 0, pairs.size(), best);
    } else {
      std::vector<std::jthread> threads;
      for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(pairs.size(), w * per);
        const std::size_t end = std::min(pairs.size(), begin + per);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
          scan_range(packed, pool, prep.queries, begin, end, best);
        });
      }
    }
  }
  auto out = assemble(pairs, prep, pool, best);
  if (stats) {
    stats->exact_matches = 0;
    for (const auto& a : out) {
      if (a.branch == Branch::kTextText && std::abs(a.similarity - 1.0) < 1e-6) {
        ++stats->exact_matches;
      }
    }
  }
  return out;
}

std::vector<MisalignmentAssignment> misalign_bruteforce(
    std::span<const TruthfulPair> pairs, const EmbeddingStore& images,
    const EmbeddingStore& texts, const CaptionPool& pool, std::uint64_t seed,
    double threshold) {
  if (pool.empty()) throw ArgumentError("misalign: caption pool is empty");
  if (images.dim() != pool.dim() || texts.dim() != pool.dim()) {
    throw ArgumentError("misalign: image, text and pool stores must share dim");
  }
  const auto p = draw_branch_probabilities(pairs.size(), seed);
  std::vector<MisalignmentAssignment> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto image = images.vector(pairs[i].image_id);
    const auto caption = texts.vector(pairs[i].caption_id);
    const Branch branch = p[i] <= threshold ? Branch::kTextText : Branch::kImageText;
    const auto query = unit_normalize(branch == Branch::kTextText ? caption : image);
    double best_sim = -std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const auto cand = pool.row(j);
      double sim = 0.0;
      for (std::size_t k = 0; k < query.size(); ++k) {
        sim += static_cast<double>(query[k]) * static_cast<double>(cand[k]);
      }
      if (j == 0 || sim > best_sim ||
          (sim == best_sim && pool.ids()[j] < pool.ids()[best_j])) {
        best_sim = sim;
        best_j = j;
      }
    }
    out.push_back({pairs[i].image_id, pairs[i].caption_id, pool.ids()[best_j],
                   branch, p[i], best_sim});
  }
  return out;
}

Dataset build_mc_dataset(std::span<const TruthfulPair> pairs,
                         std::span<const MisalignmentAssignment> assignments) {
  if (pairs.size() != assignments.size()) {
    throw ArgumentError("build_mc_dataset: " + std::to_string(pairs.size()) +
                        " pairs but " + std::to_string(assignments.size()) +
                        " assignments");
  }
  Dataset ds;
  ds.split = Split::kTrain;
  ds.records.reserve(2 * pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& a = assignments[i];
    if (a.image_id != pairs[i].image_id || a.true_caption_id != pairs[i].caption_id) {
      throw ArgumentError("build_mc_dataset: assignment " + std::to_string(i) +
                          " does not match its pair");
    }
    ds.records.push_back({pairs[i].image_id, pairs[i].caption_id, Label::kTrue,
                          std::string(kChasmaSource), std::nullopt});
  }
  for (const auto& a : assignments) {
    ds.records.push_back({a.image_id, a.false_caption_id, Label::kMC,
                          std::string(kChasmaSource), a.similarity});
  }
  return ds;
}

Dataset deduplicate_false_captions(const Dataset& dataset) {
  // caption id -> index of the surviving record
  std::unordered_map<std::string_view, std::size_t> keep;
  const auto score = [](const PairRecord& r) {
    return r.similarity.value_or(-std::numeric_limits<double>::infinity());
  };
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    if (r.label != Label::kMC) continue;
    auto [it, inserted] = keep.emplace(r.caption_id, i);
    if (inserted) continue;
    const auto& cur = dataset.records[it->second];
    if (score(r) > score(cur) ||
        (score(r) == score(cur) && r.image_id < cur.image_id)) {
      it->second = i;
    }
  }
  Dataset out;
  out.split = dataset.split;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    if (r.label == Label::kMC && keep.at(r.caption_id) != i) continue;
    out.records.push_back(r);
  }
  return out;
}

Dataset downsample_balance(const Dataset& dataset, std::uint64_t seed) {
  const auto counts = dataset.class_counts();
  std::size_t target = std::numeric_limits<std::size_t>::max();
  for (auto n : counts.counts) {
    if (n > 0) target = std::min(target, n);
  }
  if (target == std::numeric_limits<std::size_t>::max()) return dataset;

  Rng rng(seed, "balance");
  std::vector<bool> keep(dataset.records.size(), false);
  for (Label label : kAllLabels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
      if (dataset.records[i].label == label) idx.push_back(i);
    }
    if (idx.empty()) continue;
    // Partial Fisher-Yates: the first `target` slots are a uniform sample.
    for (std::size_t i = 0; i < target && idx.size() > target; ++i) {
      const std::size_t j = i + rng.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < target; ++i) keep[idx[i]] = true;
  }
  Dataset out;
  out.split = dataset.split;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (keep[i]) out.records.push_back(dataset.records[i]);
  }
  return out;
}

Dataset aggregate(std::span<const Dataset> datasets, std::uint64_t seed,
                  AggregateKind kind) {
  if (datasets.empty()) throw ArgumentError("aggregate: no datasets");
  Dataset merged;
  merged.split = datasets.front().split;
  bool has_ooc = false, has_mc = false;
  for (const auto& ds : datasets) {
    if (ds.split != merged.split) {
      throw ArgumentError("aggregate: split mismatch (" +
                          std::string(to_string(merged.split)) + " vs " +
                          std::string(to_string(ds.split)) + ")");
    }
    const auto c = ds.class_counts();
    has_ooc |= c[Label::kOOC] > 0;
    has_mc |= c[Label::kMC] > 0;
    merged.records.insert(merged.records.end(), ds.records.begin(),
                          ds.records.end());
  }
  if (kind == AggregateKind::kMulticlass) {
    if (!has_ooc) throw CoverageError("aggregate: no source contributes OOC");
    if (!has_mc) throw CoverageError("aggregate: no source contributes MC");
  }
  return downsample_balance(merged, seed);
}

void write_assignments_csv(std::span<const MisalignmentAssignment> rows,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  csv::write_row(out, {"image_id", "true_caption_id", "false_caption_id",
                       "branch", "p", "similarity"});
  for (const auto& a : rows) {
    csv::write_row(out, {a.image_id, a.true_caption_id, a.false_caption_id,
                         std::string(to_string(a.branch)),
                         csv::format_double(a.p),
                         csv::format_double(a.similarity)});
  }
}

std::vector<MisalignmentAssignment> read_assignments_csv(
    const std::filesystem::path& path) {
  std::vector<MisalignmentAssignment> rows;
  for (auto& row : csv::read_file(path, {"image_id", "true_caption_id",
                                         "false_caption_id", "branch", "p",
                                         "similarity"})) {
    MisalignmentAssignment a;
    a.image_id = std::move(row.fields[0]);
    a.true_caption_id = std::move(row.fields[1]);
    a.false_caption_id = std::move(row.fields[2]);
    try {
      a.branch = parse_branch(row.fields[3]);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), row.line);
    }
    a.p = csv::parse_double(row.fields[4], row.line);
    a.similarity = csv::parse_double(row.fields[5], row.line);
    rows.push_back(std::move(a));
  }
  return rows;
}

}  // namespace mmdet
