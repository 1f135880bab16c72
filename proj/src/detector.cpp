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

#include "mmdet/detector.hpp"

#include <cmath>
#include <numbers>

#include "mmdet/errors.hpp"
#include "mmdet/rng.hpp"

namespace mmdet {
namespace {

Linear make_linear(int in, int out) {
  return {Matrix::Zero(in, out), Matrix::Zero(1, out)};
}

LayerNormParams make_norm(int d) {
  return {Matrix::Ones(1, d), Matrix::Zero(1, d)};
}

Matrix affine(const Matrix& x, const Linear& lin) {
  Matrix y = x * lin.weight;
  y.rowwise() += lin.bias.row(0);
  return y;
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& p,
                  LayerNormCache* cache) {
  const auto d = x.cols();
  Matrix xhat(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(d);
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

// Returns dx; accumulates dgain and dbias.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache,
                           const LayerNormParams& p, LayerNormParams& grad) {
  grad.gain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grad.bias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * p.gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_dxhat = dxhat.row(r).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(r).dot(cache.xhat.row(r)) / d;
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_dxhat -
                 cache.xhat.row(r).array() * mean_dxhat_xhat);
  }
  return dx;
}

void linear_backward(const Matrix& input, const Matrix& dy, Linear& grad) {
  grad.weight.noalias() += input.transpose() * dy;
  grad.bias.row(0) += dy.colwise().sum();
}

Matrix apply_gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

std::vector<double> dropout_mask(Rng& rng, std::size_t n, double rate) {
  std::vector<double> mask(n);
  const double scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : scale;
  return mask;
}

Matrix assemble_tokens(const DetectorConfig& config, const Batch& batch) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const int m = config.dim;
  switch (config.mode) {
    case DetectorMode::kTextOnly:
      return batch.texts;
    case DetectorMode::kImageOnly:
      return batch.images;
    case DetectorMode::kMultimodalToken: {
      // Row b*2 is the image token, b*2+1 the caption token.
      Matrix x(2 * B, m);
      for (Eigen::Index b = 0; b < B; ++b) {
        x.row(2 * b) = batch.images.row(b);
        x.row(2 * b + 1) = batch.texts.row(b);
      }
      return x;
    }
    case DetectorMode::kMultimodalDim: {
      Matrix x(B, 2 * m);
      x.leftCols(m) = batch.images;
      x.rightCols(m) = batch.texts;
      return x;
    }
  }
  return {};
}

void check_batch(const DetectorConfig& config, const Batch& batch) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto check = [&](const Matrix& m, bool needed, const char* what) {
    if (!needed) return;
    if (m.rows() != B || m.cols() != config.dim) {
      throw ArgumentError(std::string("batch ") + what + " must be " +
                          std::to_string(B) + " x " + std::to_string(config.dim) +
                          ", got " + std::to_string(m.rows()) + " x " +
                          std::to_string(m.cols()));
    }
  };
  check(batch.images, uses_images(config.mode), "images");
  check(batch.texts, uses_texts(config.mode), "texts");
}

Matrix encoder_layer(const EncoderLayerParams& p, const DetectorConfig& config,
                     const Matrix& x, std::size_t batch, Rng* rng,
                     EncoderLayerCache* cache) {
  const int S = config.tokens();
  const int H = config.heads;
  const int dh = config.dim / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool drop = rng != nullptr && config.dropout > 0.0;

  Matrix q = affine(x, p.query);
  Matrix k = affine(x, p.key);
  Matrix v = affine(x, p.value);

  const std::size_t nprob = batch * H * S * S;
  std::vector<double> probs(nprob);
  std::vector<double> prob_mask;
  if (drop) prob_mask = dropout_mask(*rng, nprob, config.dropout);

  Matrix context = Matrix::Zero(x.rows(), config.dim);
  std::vector<double> logits(S);
  for (std::size_t b = 0; b < batch; ++b) {
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        const auto row_s = static_cast<Eigen::Index>(b * S + s);
        double mx = -INFINITY;
        for (int t = 0; t < S; ++t) {
          const auto row_t = static_cast<Eigen::Index>(b * S + t);
          logits[t] = q.row(row_s).segment(h * dh, dh).dot(k.row(row_t).segment(h * dh, dh)) * scale;
          mx = std::max(mx, logits[t]);
        }
        double z = 0.0;
        for (int t = 0; t < S; ++t) {
          logits[t] = std::exp(logits[t] - mx);
          z += logits[t];
        }
        for (int t = 0; t < S; ++t) {
          const std::size_t idx = ((b * H + h) * S + s) * S + t;
          probs[idx] = logits[t] / z;
          const double w = drop ? probs[idx] * prob_mask[idx] : probs[idx];
          const auto row_t = static_cast<Eigen::Index>(b * S + t);
          context.row(row_s).segment(h * dh, dh) += w * v.row(row_t).segment(h * dh, dh);
        }
      }
    }
  }

  Matrix residual1 = x + affine(context, p.output);
  LayerNormCache n1;
  Matrix normed1 = layer_norm(residual1, p.norm1, cache ? &n1 : nullptr);
  Matrix ff_pre = affine(normed1, p.ff1);
  Matrix ff_act = apply_gelu(ff_pre);
  Matrix ff_out = affine(ff_act, p.ff2);
  std::vector<double> ff_mask;
  if (drop) {
    ff_mask = dropout_mask(*rng, static_cast<std::size_t>(ff_out.size()), config.dropout);
    for (Eigen::Index i = 0; i < ff_out.size(); ++i) ff_out.data()[i] *= ff_mask[i];
  }
  Matrix residual2 = normed1 + ff_out;
  LayerNormCache n2;
  Matrix out = layer_norm(residual2, p.norm2, cache ? &n2 : nullptr);

  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->prob_mask = std::move(prob_mask);
    cache->context = std::move(context);
    cache->norm1 = std::move(n1);
    cache->normed1 = std::move(normed1);
    cache->ff_pre = std::move(ff_pre);
    cache->ff_act = std::move(ff_act);
    cache->ff_mask = std::move(ff_mask);
    cache->norm2 = std::move(n2);
  }
  return out;
}

// Returns d loss / d layer input; accumulates parameter gradients.
Matrix encoder_layer_backward(const EncoderLayerParams& p,
                              const DetectorConfig& config,
                              const EncoderLayerCache& c, std::size_t batch,
                              const Matrix& dout, EncoderLayerParams& g) {
  const int S = config.tokens();
  const int H = config.heads;
  const int dh = config.dim / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dres2 = layer_norm_backward(dout, c.norm2, p.norm2, g.norm2);
  Matrix dnormed1 = dres2;
  Matrix dff_out = dres2;
  if (!c.ff_mask.empty()) {
    for (Eigen::Index i = 0; i < dff_out.size(); ++i) dff_out.data()[i] *= c.ff_mask[i];
  }
  linear_backward(c.ff_act, dff_out, g.ff2);
  Matrix dff_act = dff_out * p.ff2.weight.transpose();
  Matrix dff_pre = dff_act.array() * c.ff_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  linear_backward(c.normed1, dff_pre, g.ff1);
  dnormed1.noalias() += dff_pre * p.ff1.weight.transpose();

  Matrix dres1 = layer_norm_backward(dnormed1, c.norm1, p.norm1, g.norm1);
  Matrix dx = dres1;
  linear_backward(c.context, dres1, g.output);
  Matrix dcontext = dres1 * p.output.weight.transpose();

  Matrix dq = Matrix::Zero(c.q.rows(), c.q.cols());
  Matrix dk = Matrix::Zero(c.k.rows(), c.k.cols());
  Matrix dv = Matrix::Zero(c.v.rows(), c.v.cols());
  std::vector<double> dprob(S);
  for (std::size_t b = 0; b < batch; ++b) {
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        const auto row_s = static_cast<Eigen::Index>(b * S + s);
        const auto dctx = dcontext.row(row_s).segment(h * dh, dh);
        const std::size_t base = ((b * H + h) * S + s) * S;
        double weighted = 0.0;
        for (int t = 0; t < S; ++t) {
          const auto row_t = static_cast<Eigen::Index>(b * S + t);
          const double mask = c.prob_mask.empty() ? 1.0 : c.prob_mask[base + t];
          const double w = c.probs[base + t] * mask;
          dv.row(row_t).segment(h * dh, dh) += w * dctx;
          dprob[t] = dctx.dot(c.v.row(row_t).segment(h * dh, dh)) * mask;
          weighted += c.probs[base + t] * dprob[t];
        }
        for (int t = 0; t < S; ++t) {
          const auto row_t = static_cast<Eigen::Index>(b * S + t);
          const double dscore = c.probs[base + t] * (dprob[t] - weighted) * scale;
          dq.row(row_s).segment(h * dh, dh) += dscore * c.k.row(row_t).segment(h * dh, dh);
          dk.row(row_t).segment(h * dh, dh) += dscore * c.q.row(row_s).segment(h * dh, dh);
        }
      }
    }
  }
  linear_backward(c.input, dq, g.query);
  linear_backward(c.input, dk, g.key);
  linear_backward(c.input, dv, g.value);
  dx.noalias() += dq * p.query.weight.transpose();
  dx.noalias() += dk * p.key.weight.transpose();
  dx.noalias() += dv * p.value.weight.transpose();
  return dx;
}

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    fn(pre + "attn.query.weight", L.query.weight);
    fn(pre + "attn.query.bias", L.query.bias);
    fn(pre + "attn.key.weight", L.key.weight);
    fn(pre + "attn.key.bias", L.key.bias);
    fn(pre + "attn.value.weight", L.value.weight);
    fn(pre + "attn.value.bias", L.value.bias);
    fn(pre + "attn.output.weight", L.output.weight);
    fn(pre + "attn.output.bias", L.output.bias);
    fn(pre + "norm1.gain", L.norm1.gain);
    fn(pre + "norm1.bias", L.norm1.bias);
    fn(pre + "ff1.weight", L.ff1.weight);
    fn(pre + "ff1.bias", L.ff1.bias);
    fn(pre + "ff2.weight", L.ff2.weight);
    fn(pre + "ff2.bias", L.ff2.bias);
    fn(pre + "norm2.gain", L.norm2.gain);
    fn(pre + "norm2.bias", L.norm2.bias);
  }
  fn("head.norm.gain", p.head.norm.gain);
  fn("head.norm.bias", p.head.norm.bias);
  fn("head.hidden.weight", p.head.hidden.weight);
  fn("head.hidden.bias", p.head.hidden.bias);
  fn("head.out.weight", p.head.out.weight);
  fn("head.out.bias", p.head.out.bias);
}

DetectorParams make_shapes(const DetectorConfig& config) {
  DetectorParams p;
  const int m = config.dim;
  if (config.has_encoder()) {
    for (int l = 0; l < config.layers; ++l) {
      EncoderLayerParams L;
      L.query = make_linear(m, m);
      L.key = make_linear(m, m);
      L.value = make_linear(m, m);
      L.output = make_linear(m, m);
      L.ff1 = make_linear(m, config.ff);
      L.ff2 = make_linear(config.ff, m);
      L.norm1 = make_norm(m);
      L.norm2 = make_norm(m);
      p.layers.push_back(std::move(L));
    }
  }
  p.head.norm = make_norm(config.head_input());
  p.head.hidden = make_linear(config.head_input(), config.head_hidden());
  p.head.out = make_linear(config.head_hidden(), config.classes);
  return p;
}

}  // namespace

std::string_view to_string(DetectorMode mode) {
  switch (mode) {
    case DetectorMode::kMultimodalToken:
      return "multimodal_token";
    case DetectorMode::kMultimodalDim:
      return "multimodal_dim";
    case DetectorMode::kTextOnly:
      return "text_only";
    case DetectorMode::kImageOnly:
      return "image_only";
  }
  return "?";
}

DetectorMode parse_detector_mode(std::string_view text) {
  if (text == "multimodal_token") return DetectorMode::kMultimodalToken;
  if (text == "multimodal_dim") return DetectorMode::kMultimodalDim;
  if (text == "text_only") return DetectorMode::kTextOnly;
  if (text == "image_only") return DetectorMode::kImageOnly;
  throw ArgumentError("unknown detector mode '" + std::string(text) + "'");
}

bool uses_images(DetectorMode mode) { return mode != DetectorMode::kTextOnly; }
bool uses_texts(DetectorMode mode) { return mode != DetectorMode::kImageOnly; }

void DetectorConfig::validate() const {
  if (dim < 2 || dim % 2 != 0) throw ArgumentError("dim must be even and >= 2");
  if (classes != 1 && classes != 3) throw ArgumentError("classes must be 1 or 3");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must be in [0, 1)");
  if (has_encoder()) {
    if (layers < 1) throw ArgumentError("layers must be >= 1");
    if (heads < 1 || dim % heads != 0) {
      throw ArgumentError("dim " + std::to_string(dim) + " not divisible by heads " +
                          std::to_string(heads));
    }
    if (ff < 1) throw ArgumentError("ff must be >= 1");
  }
}

int DetectorConfig::tokens() const {
  return mode == DetectorMode::kMultimodalToken ? 2 : 1;
}

int DetectorConfig::head_input() const {
  return mode == DetectorMode::kMultimodalDim ? 2 * dim : dim;
}

void DetectorParams::for_each(
    const std::function<void(const std::string&, Matrix&)>& fn) {
  visit(*this, fn);
}

void DetectorParams::for_each(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  visit(*this, fn);
}

std::size_t DetectorParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

DetectorParams DetectorParams::zeros_like() const {
  DetectorParams z = *this;
  z.for_each([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

bool DetectorParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

bool operator==(const DetectorParams& a, const DetectorParams& b) {
  std::vector<const Matrix*> ta, tb;
  a.for_each([&](const std::string&, const Matrix& m) { ta.push_back(&m); });
  b.for_each([&](const std::string&, const Matrix& m) { tb.push_back(&m); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->rows() != tb[i]->rows() || ta[i]->cols() != tb[i]->cols()) return false;
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

DetectorParams init_params(const DetectorConfig& config, std::uint64_t seed) {
  config.validate();
  DetectorParams p = make_shapes(config);
  Rng rng(seed, "init");
  p.for_each([&](const std::string& name, Matrix& m) {
    if (name.ends_with(".weight")) glorot(m, rng);
  });
  return p;
}

void check_shapes(const DetectorParams& params, const DetectorConfig& config) {
  config.validate();
  const DetectorParams ref = make_shapes(config);
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> want, got;
  ref.for_each([&](const std::string& n, const Matrix& m) { want.push_back({n, {m.rows(), m.cols()}}); });
  params.for_each([&](const std::string& n, const Matrix& m) { got.push_back({n, {m.rows(), m.cols()}}); });
  if (want != got) throw ArgumentError("parameter shapes do not match the detector config");
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

ForwardPass forward(const DetectorParams& params, const DetectorConfig& config,
                    const Batch& batch, bool training, std::uint64_t dropout_seed) {
  check_batch(config, batch);
  const std::size_t B = batch.size();
  std::shared_ptr<ForwardCache> cache;
  if (training) {
    cache = std::make_shared<ForwardCache>();
    cache->batch = B;
  }
  Rng rng(dropout_seed, "dropout");
  Rng* rng_ptr = training ? &rng : nullptr;

  Matrix x = assemble_tokens(config, batch);
  Matrix pooled;
  if (config.has_encoder()) {
    if (training) cache->layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      x = encoder_layer(params.layers[l], config, x, B, rng_ptr,
                        training ? &cache->layers[l] : nullptr);
    }
    const int S = config.tokens();
    if (S == 1) {
      pooled = std::move(x);
    } else {
      pooled = Matrix::Zero(static_cast<Eigen::Index>(B), config.dim);
      for (std::size_t b = 0; b < B; ++b) {
        for (int s = 0; s < S; ++s) pooled.row(b) += x.row(b * S + s);
        pooled.row(b) /= static_cast<double>(S);
      }
    }
  } else {
    pooled = std::move(x);
  }

  LayerNormCache hn;
  Matrix normed = layer_norm(pooled, params.head.norm, training ? &hn : nullptr);
  Matrix hidden_pre = affine(normed, params.head.hidden);
  Matrix hidden_act = apply_gelu(hidden_pre);
  ForwardPass pass;
  pass.logits = affine(hidden_act, params.head.out);
  if (training) {
    cache->pooled = std::move(pooled);
    cache->head_norm = std::move(hn);
    cache->head_normed = std::move(normed);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden_act = std::move(hidden_act);
    pass.cache = std::move(cache);
  }
  return pass;
}

namespace {

void check_labels(const Matrix& logits, std::span<const int> labels, int classes) {
  if (classes != 1 && classes != 3) throw ArgumentError("classes must be 1 or 3");
  if (logits.cols() != classes || static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ArgumentError("logits shape does not match labels");
  }
  const int hi = classes == 1 ? 1 : 2;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > hi) {
      throw ArgumentError("label " + std::to_string(labels[i]) + " out of range at row " +
                          std::to_string(i));
    }
  }
  if (labels.empty()) throw ArgumentError("empty batch");
}

}  // namespace

double loss(const Matrix& logits, std::span<const int> labels, int classes) {
  check_labels(logits, labels, classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (classes == 1) {
      const double z = logits(i, 0);
      const double y = labels[i];
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    } else {
      const double mx = logits.row(i).maxCoeff();
      const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
      total += lse - logits(i, labels[i]);
    }
  }
  return total / static_cast<double>(logits.rows());
}

Matrix loss_grad(const Matrix& logits, std::span<const int> labels, int classes) {
  check_labels(logits, labels, classes);
  const double inv = 1.0 / static_cast<double>(logits.rows());
  Matrix g(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (classes == 1) {
      const double z = logits(i, 0);
      const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                                : std::exp(z) / (1.0 + std::exp(z));
      g(i, 0) = (sig - labels[i]) * inv;
    } else {
      const double mx = logits.row(i).maxCoeff();
      Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
      e /= e.sum();
      e(labels[i]) -= 1.0;
      g.row(i) = e * inv;
    }
  }
  return g;
}

DetectorParams backward(const DetectorParams& params, const DetectorConfig& config,
                        const Batch& batch, const ForwardPass& pass) {
  if (!pass.cache) throw StateError("backward requires a training forward pass");
  const ForwardCache& c = *pass.cache;
  if (c.batch != batch.size()) throw StateError("cached pass belongs to another batch");
  DetectorParams g = params.zeros_like();

  const Matrix dlogits = loss_grad(pass.logits, batch.labels, config.classes);
  linear_backward(c.hidden_act, dlogits, g.head.out);
  Matrix dact = dlogits * params.head.out.weight.transpose();
  Matrix dpre = dact.array() *
                c.hidden_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
  linear_backward(c.head_normed, dpre, g.head.hidden);
  Matrix dnormed = dpre * params.head.hidden.weight.transpose();
  Matrix dpooled = layer_norm_backward(dnormed, c.head_norm, params.head.norm, g.head.norm);

  if (!config.has_encoder()) return g;

  const int S = config.tokens();
  const std::size_t B = batch.size();
  Matrix dx;
  if (S == 1) {
    dx = std::move(dpooled);
  } else {
    dx.resize(static_cast<Eigen::Index>(B * S), config.dim);
    for (std::size_t b = 0; b < B; ++b) {
      for (int s = 0; s < S; ++s) dx.row(b * S + s) = dpooled.row(b) / static_cast<double>(S);
    }
  }
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    dx = encoder_layer_backward(params.layers[l], config, c.layers[l], B, dx, g.layers[l]);
  }
  return g;
}

std::vector<int> predict(const Matrix& logits, int classes) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (classes == 1) {
      out[i] = logits(i, 0) > 0.0 ? 1 : 0;
    } else {
      Eigen::Index arg = 0;
      logits.row(i).maxCoeff(&arg);
      out[i] = static_cast<int>(arg);
    }
  }
  return out;
}

}  // namespace mmdet
