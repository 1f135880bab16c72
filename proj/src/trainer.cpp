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

#include "mmdet/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/metrics.hpp"
#include "mmdet/rng.hpp"

namespace mmdet {
namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

std::vector<Matrix*> tensors(DetectorParams& p) {
  std::vector<Matrix*> out;
  p.for_each([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

class Adam {
 public:
  Adam(const DetectorParams& like, const TrainConfig& c)
      : m_(like.zeros_like()), v_(like.zeros_like()), c_(c) {}

  void step(DetectorParams& params, DetectorParams& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    auto p = tensors(params), g = tensors(grads), m = tensors(m_), v = tensors(v_);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i]->array() = c_.beta1 * m[i]->array() + (1.0 - c_.beta1) * g[i]->array();
      v[i]->array() = c_.beta2 * v[i]->array() + (1.0 - c_.beta2) * g[i]->array().square();
      p[i]->array() -= c_.learning_rate * (m[i]->array() / bc1) /
                       ((v[i]->array() / bc2).sqrt() + c_.adam_eps);
    }
  }

 private:
  DetectorParams m_, v_;
  const TrainConfig& c_;
  int t_ = 0;
};

nlohmann::ordered_json detector_json(const DetectorConfig& d) {
  return {{"mode", std::string(to_string(d.mode))}, {"layers", d.layers},
          {"heads", d.heads},  {"ff", d.ff},
          {"dropout", d.dropout}, {"dim", d.dim},
          {"classes", d.classes}};
}

nlohmann::ordered_json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},       {"patience", t.patience},
          {"seed", t.seed},                   {"beta1", t.beta1},
          {"beta2", t.beta2},                 {"adam_eps", t.adam_eps}};
}

nlohmann::ordered_json report_object(const TrainReport& r, bool wall) {
  nlohmann::ordered_json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val_accuracy"] = r.best_val_accuracy;
  j["epochs_run"] = r.val_accuracy.size();
  j["early_stopped"] = r.early_stopped;
  j["train_loss"] = r.train_loss;
  j["val_accuracy"] = r.val_accuracy;
  j["detector"] = detector_json(r.detector);
  j["train"] = train_json(r.train);
  if (wall) j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) {
    throw ArgumentError("patience must be in [1, max_epochs]");
  }
  if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be >= 0");
}

std::string train_report_json(const TrainReport& report, bool include_wall_time) {
  return report_object(report, include_wall_time).dump(2) + "\n";
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double val_fraction,
                                            std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("val_fraction must lie in (0, 1)");
  }
  if (dataset.size() < 2) throw ArgumentError("split needs at least 2 records");
  Rng rng(seed, "split");
  std::vector<bool> to_val(dataset.size(), false);
  for (Label label : kAllLabels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.records[i].label == label) idx.push_back(i);
    }
    if (idx.empty()) continue;
    shuffle(idx, rng);
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < n_val; ++i) to_val[idx[i]] = true;
  }
  Dataset tr, va;
  tr.split = Split::kTrain;
  va.split = Split::kValidation;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (to_val[i] ? va : tr).records.push_back(dataset.records[i]);
  }
  return {std::move(tr), std::move(va)};
}

TrainResult train(const FeatureSet& train_set, const FeatureSet& val_set,
                  const DetectorConfig& detector, const TrainConfig& config) {
  detector.validate();
  config.validate();
  if (train_set.size() == 0) throw ArgumentError("train: empty training set");
  if (val_set.size() == 0) throw ArgumentError("train: empty validation set");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.report.detector = detector;
  result.report.train = config;
  DetectorParams params = init_params(detector, config.seed);
  result.params = params;
  Adam adam(params, config);
  Rng shuffle_rng(config.seed, "shuffle");
  Rng dropout_rng(config.seed, "dropout");

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Batch batch = train_set.batch(
          std::span<const std::size_t>(order.data() + begin, end - begin));
      const auto pass = forward(params, detector, batch, true, dropout_rng.next());
      loss_sum += loss(pass.logits, batch.labels, detector.classes) *
                  static_cast<double>(batch.size());
      DetectorParams grads = backward(params, detector, batch, pass);
      adam.step(params, grads);
    }
    result.report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
    const double acc = accuracy(params, detector, val_set);
    result.report.val_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      result.report.best_epoch = epoch;
      result.params = params;
    } else if (epoch - result.report.best_epoch >= config.patience) {
      result.report.early_stopped = epoch < config.max_epochs;
      break;
    }
  }
  result.report.best_val_accuracy = best;
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::size_t Grid::size() const {
  return layers.size() * ff.size() * heads.size() *
         std::max<std::size_t>(1, learning_rates.size());
}

GridResult grid_search(const FeatureSet& train_set, const FeatureSet& val_set,
                       const DetectorConfig& base, const Grid& grid,
                       const TrainConfig& config, unsigned workers) {
  if (grid.size() == 0) throw ArgumentError("grid_search: empty grid");
  std::vector<GridRun> runs;
  const std::vector<double> lrs =
      grid.learning_rates.empty() ? std::vector<double>{config.learning_rate}
                                  : grid.learning_rates;
  for (int L : grid.layers) {
    for (int f : grid.ff) {
      for (int h : grid.heads) {
        for (double lr : lrs) {
          GridRun run;
          run.index = runs.size();
          run.detector = base;
          run.detector.layers = L;
          run.detector.ff = f;
          run.detector.heads = h;
          run.train = config;
          run.train.learning_rate = lr;
          run.train.seed = config.seed + run.index;
          run.detector.validate();
          runs.push_back(run);
        }
      }
    }
  }

  std::vector<std::optional<TrainResult>> results(runs.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < runs.size();) {
      results[i] = train(train_set, val_set, runs[i].detector, runs[i].train);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, runs.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work);
  }

  GridResult out;
  double best = -1.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].report = results[i]->report;
    if (results[i]->report.best_val_accuracy > best) {
      best = results[i]->report.best_val_accuracy;
      out.best_index = i;
    }
  }
  out.params = std::move(results[out.best_index]->params);
  out.detector = runs[out.best_index].detector;
  out.report = runs[out.best_index].report;
  out.runs = std::move(runs);
  return out;
}

std::string grid_result_json(const GridResult& result, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["best_index"] = result.best_index;
  j["best"] = report_object(result.report, include_wall_time);
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : result.runs) {
    nlohmann::ordered_json o;
    o["index"] = r.index;
    o["layers"] = r.detector.layers;
    o["ff"] = r.detector.ff;
    o["heads"] = r.detector.heads;
    o["learning_rate"] = r.train.learning_rate;
    o["seed"] = r.train.seed;
    o["best_epoch"] = r.report.best_epoch;
    o["best_val_accuracy"] = r.report.best_val_accuracy;
    runs.push_back(o);
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

}  // namespace mmdet
