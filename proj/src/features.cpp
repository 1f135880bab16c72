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

#include "mmdet/features.hpp"

#include "mmdet/errors.hpp"

namespace mmdet {
namespace {

std::span<const float> lookup(std::span<const EmbeddingStore* const> stores,
                              const std::string& id, std::string_view what) {
  for (const auto* s : stores) {
    if (auto i = s->find(id)) return s->row(*i);
  }
  throw LookupError(std::string(what) + " id '" + id + "' not found in any store");
}

}  // namespace

int class_index(Label label, int classes) {
  if (classes == 1) return label == Label::kTrue ? 0 : 1;
  return static_cast<int>(label);
}

Batch FeatureSet::batch(std::span<const std::size_t> rows) const {
  Batch b;
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (images.size() > 0) b.images.resize(n, images.cols());
  if (texts.size() > 0) b.texts.resize(n, texts.cols());
  b.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (images.size() > 0) b.images.row(i) = images.row(rows[i]);
    if (texts.size() > 0) b.texts.row(i) = texts.row(rows[i]);
    b.labels[i] = labels[rows[i]];
  }
  return b;
}

Batch FeatureSet::slice(std::size_t begin, std::size_t end) const {
  Batch b;
  const auto n = static_cast<Eigen::Index>(end - begin);
  if (images.size() > 0) b.images = images.middleRows(begin, n);
  if (texts.size() > 0) b.texts = texts.middleRows(begin, n);
  b.labels.assign(labels.begin() + begin, labels.begin() + end);
  return b;
}

FeatureSet encode_features(const Dataset& dataset,
                           std::span<const EmbeddingStore* const> image_stores,
                           std::span<const EmbeddingStore* const> text_stores,
                           DetectorMode mode, int classes) {
  if (classes != 1 && classes != 3) throw ArgumentError("classes must be 1 or 3");
  const bool want_images = uses_images(mode);
  const bool want_texts = uses_texts(mode);
  if (want_images && image_stores.empty()) throw ArgumentError("mode needs an image store");
  if (want_texts && text_stores.empty()) throw ArgumentError("mode needs a text store");
  std::optional<std::uint32_t> dim;
  const auto check_dim = [&](std::span<const EmbeddingStore* const> stores) {
    for (const auto* s : stores) {
      if (dim && *dim != s->dim()) throw ArgumentError("stores disagree on dim");
      dim = s->dim();
    }
  };
  if (want_images) check_dim(image_stores);
  if (want_texts) check_dim(text_stores);

  FeatureSet fs;
  const auto n = static_cast<Eigen::Index>(dataset.size());
  if (want_images) fs.images.resize(n, *dim);
  if (want_texts) fs.texts.resize(n, *dim);
  fs.labels.reserve(dataset.size());
  fs.record_labels.reserve(dataset.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = dataset.records[i];
    if (want_images) {
      const auto v = lookup(image_stores, r.image_id, "image");
      for (std::uint32_t k = 0; k < *dim; ++k) fs.images(i, k) = v[k];
    }
    if (want_texts) {
      const auto v = lookup(text_stores, r.caption_id, "caption");
      for (std::uint32_t k = 0; k < *dim; ++k) fs.texts(i, k) = v[k];
    }
    fs.labels.push_back(class_index(r.label, classes));
    fs.record_labels.push_back(r.label);
  }
  return fs;
}

}  // namespace mmdet
