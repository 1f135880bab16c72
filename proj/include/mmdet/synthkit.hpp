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

// Seeded synthetic embedding corpora.
//
// Every vector is content + noise + planted factors. Content and noise live
// in the orthogonal complement of a few random orthonormal "planted"
// directions, so planted factors are read without interference:
//
//   u    crossmodal factor, shared by both modalities. A truthful pair has
//        matching signs on u; every misleading caption carries the opposite
//        sign of the caption it perturbs. Each modality is marginally a fair
//        coin on u; only the joint sign agreement carries the label.
//   v_T  caption style (text_bias): + on truthful captions, - on misleading.
//   v_I  image style (image_bias): + on authentic images, - on manipulated.
//
// Misleading captions share the content of their truthful caption with
// fresh noise, so retrieval over the pool has hard negatives by
// construction. The world (directions) depends only on the seed; the
// samples depend on the seed and `sample_stream`, so a held-out corpus or a
// benchmark drawn with another stream shares the training corpus' world.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mmdet/benchmark.hpp"
#include "mmdet/dataset.hpp"
#include "mmdet/embstore.hpp"

namespace mmdet {

enum class SignalMode : std::uint8_t { kCrossmodalOnly, kTextBias, kImageBias, kNoise };
std::string_view to_string(SignalMode mode);
SignalMode parse_signal_mode(std::string_view text);

struct SynthConfig {
  int dim = 32;
  std::size_t n_pairs = 1000;
  SignalMode signal_mode = SignalMode::kCrossmodalOnly;
  double signal_strength = 1.0;  // in [0, 1]
  std::uint64_t seed = 0;
  std::string sample_stream = "corpus";
  double ooc_fraction = 1.0;  // benchmark only: share of trios with an OOC image

  void validate() const;
};

// Planted amplitudes at strength 1. Small next to the unit-scale content so
// nearest-neighbour retrieval is driven by content, not by the label.
inline constexpr double kFactorAmplitude = 0.3;
inline constexpr double kStyleAmplitude = 0.3;
inline constexpr double kNoiseScale = 0.3;

struct SynthCorpus {
  EmbeddingStore images{Modality::kImage, 1};
  EmbeddingStore texts{Modality::kText, 1};  // truthful captions
  EmbeddingStore pool{Modality::kText, 1};   // misleading captions
  std::vector<TruthfulPair> pairs;
  // True(image_i, caption_i) then MC(image, pool_i) with the planted
  // partner. Under image_bias the MC image is the manipulated copy, which
  // is also in `images`.
  Dataset labeled;
};

SynthCorpus generate_corpus(const SynthConfig& config);

struct SynthBenchmark {
  std::vector<TrioRecord> trios;
  EmbeddingStore images{Modality::kImage, 1};
  EmbeddingStore texts{Modality::kText, 1};
};

// n_pairs trios. Trio g: True(I_g, C_g), MC(I_g, F_g), OOC(O_g, C_g) when it
// has an OOC image. F_g and O_g carry the opposite factor sign.
SynthBenchmark generate_balanced_benchmark(const SynthConfig& config);

inline constexpr std::string_view kSynthSource = "synth";

}  // namespace mmdet
