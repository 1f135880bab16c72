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

#include "mmdet/synthkit.hpp"

#include <cmath>

#include "mmdet/errors.hpp"
#include "mmdet/rng.hpp"

namespace mmdet {
namespace {

enum Direction { kFactor = 0, kTextStyle = 1, kImageStyle = 2, kDirections = 3 };

// Directions that the mode plants; the rest stay unused.
std::vector<int> planted(SignalMode mode) {
  switch (mode) {
    case SignalMode::kCrossmodalOnly: return {kFactor};
    case SignalMode::kTextBias: return {kFactor, kTextStyle};
    case SignalMode::kImageBias: return {kFactor, kImageStyle};
    case SignalMode::kNoise: return {};
  }
  return {};
}

class World {
 public:
  World(const SynthConfig& c) : dim_(static_cast<std::size_t>(c.dim)) {
    Rng rng(c.seed, "world");
    dirs_.assign(kDirections, {});
    const auto used = planted(c.signal_mode);
    for (int d : used) {
      std::vector<double> v(dim_);
      for (;;) {
        for (double& x : v) x = rng.normal();
        for (int o : used) {
          if (o == d) break;
          project_out(v, dirs_[o]);
        }
        const double n = norm(v);
        if (n > 1e-6) {
          for (double& x : v) x /= n;
          break;
        }
      }
      dirs_[d] = std::move(v);
    }
    for (int d : used) basis_.push_back(&dirs_[d]);
    const std::size_t free = dim_ - basis_.size();
    sigma_ = free > 0 ? 1.0 / std::sqrt(static_cast<double>(free)) : 0.0;
  }

  // Isotropic Gaussian with unit expected squared norm in the complement
  // of the planted directions.
  std::vector<double> content(Rng& rng, double scale) const {
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.normal() * sigma_ * scale;
    for (const auto* b : basis_) project_out(v, *b);
    return v;
  }

  void plant(std::vector<double>& v, Direction d, double amount) const {
    if (dirs_[d].empty() || amount == 0.0) return;
    for (std::size_t i = 0; i < dim_; ++i) v[i] += amount * dirs_[d][i];
  }

  std::size_t dim() const { return dim_; }

 private:
  static double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  static void project_out(std::vector<double>& v, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) d += v[i] * b[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * b[i];
  }

  std::size_t dim_;
  std::vector<std::vector<double>> dirs_;
  std::vector<const std::vector<double>*> basis_;
  double sigma_ = 0.0;
};

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

struct StoreBuilder {
  std::vector<std::string> ids;
  std::vector<float> data;

  void push(std::string id, const std::vector<double>& v) {
    ids.push_back(std::move(id));
    for (double x : v) data.push_back(static_cast<float>(x));
  }
  EmbeddingStore build(Modality m, std::size_t dim) {
    return EmbeddingStore::adopt(m, static_cast<std::uint32_t>(dim), std::move(ids),
                                 std::move(data));
  }
};

double sign(Rng& rng) { return (rng.next() >> 63) != 0 ? 1.0 : -1.0; }

}  // namespace

std::string_view to_string(SignalMode mode) {
  switch (mode) {
    case SignalMode::kCrossmodalOnly: return "crossmodal_only";
    case SignalMode::kTextBias: return "text_bias";
    case SignalMode::kImageBias: return "image_bias";
    case SignalMode::kNoise: return "noise";
  }
  return "?";
}

SignalMode parse_signal_mode(std::string_view text) {
  for (auto m : {SignalMode::kCrossmodalOnly, SignalMode::kTextBias,
                 SignalMode::kImageBias, SignalMode::kNoise}) {
    if (text == to_string(m)) return m;
  }
  throw ArgumentError("unknown signal mode '" + std::string(text) + "'");
}

void SynthConfig::validate() const {
  if (dim < 2) throw ArgumentError("synth: dim must be >= 2");
  if (n_pairs < 1) throw ArgumentError("synth: n_pairs must be >= 1");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
    throw ArgumentError("synth: signal_strength must lie in [0, 1]");
  }
  if (!(ooc_fraction >= 0.0 && ooc_fraction <= 1.0)) {
    throw ArgumentError("synth: ooc_fraction must lie in [0, 1]");
  }
  if (sample_stream.empty()) throw ArgumentError("synth: empty sample_stream");
}

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  const World world(config);
  Rng rng(config.seed, config.sample_stream);
  const double a = kFactorAmplitude * config.signal_strength;
  const double s = kStyleAmplitude * config.signal_strength;
  const bool text_bias = config.signal_mode == SignalMode::kTextBias;
  const bool image_bias = config.signal_mode == SignalMode::kImageBias;
  const std::string& tag = config.sample_stream;

  StoreBuilder images, texts, pool;
  SynthCorpus out;
  Dataset& ds = out.labeled;
  ds.split = Split::kTrain;
  std::vector<PairRecord> mc;
  for (std::size_t i = 0; i < config.n_pairs; ++i) {
    const double z = sign(rng);
    const auto content = world.content(rng, 1.0);
    auto image = add(content, world.content(rng, kNoiseScale));
    auto caption = add(content, world.content(rng, kNoiseScale));
    auto lure = add(content, world.content(rng, kNoiseScale));
    world.plant(image, kFactor, a * z);
    world.plant(caption, kFactor, a * z);
    world.plant(lure, kFactor, -a * z);
    if (text_bias) {
      world.plant(caption, kTextStyle, s);
      world.plant(lure, kTextStyle, -s);
    }
    const std::string image_id = tag + "-img-" + std::to_string(i);
    const std::string caption_id = tag + "-cap-" + std::to_string(i);
    const std::string lure_id = tag + "-lure-" + std::to_string(i);
    std::string mc_image = image_id;
    if (image_bias) {
      auto manipulated = add(content, world.content(rng, kNoiseScale));
      world.plant(manipulated, kFactor, a * z);
      world.plant(manipulated, kImageStyle, -s);
      world.plant(image, kImageStyle, s);
      mc_image = tag + "-imgm-" + std::to_string(i);
      images.push(mc_image, manipulated);
    }
    images.push(image_id, image);
    texts.push(caption_id, caption);
    pool.push(lure_id, lure);
    out.pairs.push_back({image_id, caption_id});
    ds.records.push_back({image_id, caption_id, Label::kTrue, std::string(kSynthSource), {}});
    mc.push_back({mc_image, lure_id, Label::kMC, std::string(kSynthSource), {}});
  }
  ds.records.insert(ds.records.end(), mc.begin(), mc.end());
  out.images = images.build(Modality::kImage, world.dim());
  out.texts = texts.build(Modality::kText, world.dim());
  out.pool = pool.build(Modality::kText, world.dim());
  return out;
}

SynthBenchmark generate_balanced_benchmark(const SynthConfig& config) {
  config.validate();
  const World world(config);
  Rng rng(config.seed, config.sample_stream);
  Rng pick(config.seed, config.sample_stream + "/ooc");
  const double a = kFactorAmplitude * config.signal_strength;
  const double s = kStyleAmplitude * config.signal_strength;
  const bool text_bias = config.signal_mode == SignalMode::kTextBias;
  const bool image_bias = config.signal_mode == SignalMode::kImageBias;
  const std::string& tag = config.sample_stream;

  // Which trios get an OOC image: a seeded subset of the requested size.
  const std::size_t n = config.n_pairs;
  const auto n_ooc = static_cast<std::size_t>(
      std::llround(config.ooc_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < n_ooc; ++i) {
    std::swap(order[i], order[i + pick.below(n - i)]);
  }
  std::vector<bool> has_ooc(n, false);
  for (std::size_t i = 0; i < n_ooc; ++i) has_ooc[order[i]] = true;

  SynthBenchmark out;
  StoreBuilder images, texts;
  for (std::size_t g = 0; g < n; ++g) {
    const double z = sign(rng);
    const auto content = world.content(rng, 1.0);
    auto image = add(content, world.content(rng, kNoiseScale));
    auto caption = add(content, world.content(rng, kNoiseScale));
    auto lure = add(content, world.content(rng, kNoiseScale));
    world.plant(image, kFactor, a * z);
    world.plant(caption, kFactor, a * z);
    world.plant(lure, kFactor, -a * z);
    if (text_bias) {
      world.plant(caption, kTextStyle, s);
      world.plant(lure, kTextStyle, -s);
    }
    if (image_bias) world.plant(image, kImageStyle, s);

    TrioRecord t;
    t.group_id = tag + "-g" + std::to_string(g);
    t.true_image_id = tag + "-img-" + std::to_string(g);
    t.true_caption_id = tag + "-cap-" + std::to_string(g);
    t.false_caption_id = tag + "-lure-" + std::to_string(g);
    t.true_caption_text = "synthetic caption " + std::to_string(g);
    t.false_caption_text = "synthetic misleading caption " + std::to_string(g);
    images.push(t.true_image_id, image);
    texts.push(t.true_caption_id, caption);
    texts.push(t.false_caption_id, lure);
    if (has_ooc[g]) {
      // Authentic image from elsewhere: unrelated content, opposite sign.
      auto ooc = add(world.content(rng, 1.0), world.content(rng, kNoiseScale));
      world.plant(ooc, kFactor, -a * z);
      if (image_bias) world.plant(ooc, kImageStyle, s);
      t.ooc_image_id = tag + "-ooc-" + std::to_string(g);
      images.push(*t.ooc_image_id, ooc);
    }
    out.trios.push_back(std::move(t));
  }
  out.images = images.build(Modality::kImage, world.dim());
  out.texts = texts.build(Modality::kText, world.dim());
  return out;
}

}  // namespace mmdet
