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

#include <span>
#include <vector>

#include "mmdet/dataset.hpp"
#include "mmdet/detector.hpp"
#include "mmdet/embstore.hpp"

namespace mmdet {

// Class index of a record label for a detector with `classes` outputs.
// Binary: True -> 0, anything else -> 1. Multiclass: True 0, MC 1, OOC 2.
int class_index(Label label, int classes);

// Dense, detector-ready view of a dataset. Vectors are copied as stored
// (no normalization).
struct FeatureSet {
  Matrix images;  // N x m, empty when the mode ignores images
  Matrix texts;   // N x m, empty when the mode ignores captions
  std::vector<int> labels;
  std::vector<Label> record_labels;

  std::size_t size() const { return labels.size(); }
  Batch batch(std::span<const std::size_t> rows) const;
  Batch slice(std::size_t begin, std::size_t end) const;
};

// Looks ids up in the given stores, first match wins (so a caption may live
// in the truthful-caption store or in the misleading pool).
FeatureSet encode_features(const Dataset& dataset,
                           std::span<const EmbeddingStore* const> image_stores,
                           std::span<const EmbeddingStore* const> text_stores,
                           DetectorMode mode, int classes);

}  // namespace mmdet
