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

// Transformer detector over pre-extracted image/caption embeddings.
//
// Token modes feed a short sequence (2 tokens for image+caption, 1 for a
// single modality) through post-norm encoder layers without positional
// encoding, average-pool the outputs and classify with
//   LN -> Linear(d_in, m/2) -> GELU -> Linear(m/2, n).
// The dimensional mode has no encoder: the head reads the 2m-wide
// concatenation [image; caption] directly.
//
// Everything is double precision. Rows are tokens; linear layers compute
// X * W + b with W stored (in x out).

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmdet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DetectorMode : std::uint8_t {
  kMultimodalToken = 0,  // D(I,C)
  kMultimodalDim = 1,    // D-(I;C)
  kTextOnly = 2,         // D-(C)
  kImageOnly = 3,        // D-(I)
};
std::string_view to_string(DetectorMode mode);
DetectorMode parse_detector_mode(std::string_view text);
bool uses_images(DetectorMode mode);
bool uses_texts(DetectorMode mode);

struct DetectorConfig {
  DetectorMode mode = DetectorMode::kMultimodalToken;
  int layers = 1;
  int heads = 2;
  int ff = 128;
  double dropout = 0.1;
  int dim = 768;
  int classes = 1;  // 1 = binary (sigmoid), 3 = multiclass (softmax)

  // Throws ArgumentError when the config is unusable.
  void validate() const;
  bool has_encoder() const { return mode != DetectorMode::kMultimodalDim; }
  int tokens() const;      // sequence length fed to the encoder
  int head_input() const;  // width entering the head
  int head_hidden() const { return dim / 2; }

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct LayerNormParams {
  Matrix gain;  // 1 x d
  Matrix bias;  // 1 x d
};

struct EncoderLayerParams {
  Linear query, key, value, output;
  Linear ff1, ff2;
  LayerNormParams norm1, norm2;
};

struct HeadParams {
  LayerNormParams norm;
  Linear hidden;
  Linear out;
};

struct DetectorParams {
  std::vector<EncoderLayerParams> layers;
  HeadParams head;

  // Visits every tensor in a fixed order with a stable dotted name.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(
      const std::function<void(const std::string&, const Matrix&)>& fn) const;

  std::size_t parameter_count() const;
  // Same shapes, all zeros.
  DetectorParams zeros_like() const;
  bool all_finite() const;

  friend bool operator==(const DetectorParams& a, const DetectorParams& b);
};

// Glorot-uniform weights, zero biases, unit layer-norm gains.
DetectorParams init_params(const DetectorConfig& config, std::uint64_t seed);

// Throws ArgumentError if tensor shapes disagree with the config.
void check_shapes(const DetectorParams& params, const DetectorConfig& config);

struct Batch {
  Matrix images;            // B x m, empty when unused
  Matrix texts;             // B x m, empty when unused
  std::vector<int> labels;  // class index; for n = 1, 1 means misinformation

  std::size_t size() const { return labels.size(); }
};

inline constexpr double kLayerNormEps = 1e-5;

double gelu(double x);
double gelu_grad(double x);

// Activations recorded by a training forward pass.
struct LayerNormCache {
  Matrix xhat;                // normalized input
  Eigen::VectorXd inv_std;    // per row
};

struct EncoderLayerCache {
  Matrix input;
  Matrix q, k, v;
  // probs[(b * heads + h) * S * S + s * S + t]: softmax before dropout.
  std::vector<double> probs;
  std::vector<double> prob_mask;  // 0 or 1/(1-p); empty if no dropout
  Matrix context;                 // concatenated heads, before output proj
  LayerNormCache norm1;
  Matrix normed1;                 // LN1 output
  Matrix ff_pre;                  // ff1 output before GELU
  Matrix ff_act;                  // GELU output
  std::vector<double> ff_mask;    // dropout mask on ff2 output
  LayerNormCache norm2;
};

struct ForwardCache {
  std::size_t batch = 0;
  std::vector<EncoderLayerCache> layers;
  Matrix pooled;  // head input
  LayerNormCache head_norm;
  Matrix head_normed;
  Matrix hidden_pre;
  Matrix hidden_act;
};

struct ForwardPass {
  Matrix logits;                              // B x n
  std::shared_ptr<const ForwardCache> cache;  // null unless training
};

// Dropout is active only when `training` is true; masks come from
// `dropout_seed` so a training pass can be replayed exactly.
ForwardPass forward(const DetectorParams& params, const DetectorConfig& config,
                    const Batch& batch, bool training,
                    std::uint64_t dropout_seed = 0);

// Mean binary (n = 1) or categorical (n = 3) cross-entropy from logits.
double loss(const Matrix& logits, std::span<const int> labels, int classes);
// d loss / d logits.
Matrix loss_grad(const Matrix& logits, std::span<const int> labels, int classes);

// Exact gradients of `loss` for the batch, replaying the recorded pass.
// Throws StateError if `pass` carries no cache.
DetectorParams backward(const DetectorParams& params, const DetectorConfig& config,
                        const Batch& batch, const ForwardPass& pass);

// Predicted class per row: argmax for n = 3, sigmoid(z) > 0.5 for n = 1.
std::vector<int> predict(const Matrix& logits, int classes);

}  // namespace mmdet
