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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmdet/dataset.hpp"
#include "mmdet/detector.hpp"
#include "mmdet/features.hpp"

namespace mmdet {

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 512;
  int max_epochs = 30;
  int patience = 10;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainReport {
  std::vector<double> train_loss;    // mean loss per epoch
  std::vector<double> val_accuracy;  // per epoch
  int best_epoch = 0;                // 1-based; earliest epoch reaching the max
  double best_val_accuracy = 0.0;
  bool early_stopped = false;
  DetectorConfig detector;
  TrainConfig train;
  double wall_seconds = 0.0;

  // Equality ignores wall time.
  friend bool operator==(const TrainReport& a, const TrainReport& b) {
    return a.train_loss == b.train_loss && a.val_accuracy == b.val_accuracy &&
           a.best_epoch == b.best_epoch && a.best_val_accuracy == b.best_val_accuracy &&
           a.early_stopped == b.early_stopped && a.detector == b.detector &&
           a.train == b.train;
  }
};

// Wall time is left out when `include_wall_time` is false so the output is a
// pure function of inputs and seed.
std::string train_report_json(const TrainReport& report, bool include_wall_time = true);

// Stratified by label: each class contributes round(val_fraction * n_class)
// records to validation. Seeded and deterministic.
std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset,
                                            double val_fraction = 0.10,
                                            std::uint64_t seed = 0);

struct TrainResult {
  DetectorParams params;  // from the best epoch
  TrainReport report;
};

// Adam over seeded per-epoch shuffles (last partial batch kept), validation
// accuracy after every epoch, early stopping on patience, best epoch
// restored.
TrainResult train(const FeatureSet& train_set, const FeatureSet& val_set,
                  const DetectorConfig& detector, const TrainConfig& config);

struct Grid {
  std::vector<int> layers = {1, 4};
  std::vector<int> ff = {128, 1024};
  std::vector<int> heads = {2, 8};
  std::vector<double> learning_rates;  // empty: use TrainConfig's

  std::size_t size() const;
};

struct GridRun {
  std::size_t index = 0;
  DetectorConfig detector;
  TrainConfig train;
  TrainReport report;
};

struct GridResult {
  DetectorParams params;
  DetectorConfig detector;
  TrainReport report;
  std::size_t best_index = 0;
  std::vector<GridRun> runs;  // enumeration order
};

// Enumerates layers (outer), then ff, then heads, then learning rate. Run i
// trains with seed config.seed + i. Highest validation accuracy wins, the
// earliest enumerated on ties. `workers` > 1 trains combinations
// concurrently without changing the result.
GridResult grid_search(const FeatureSet& train_set, const FeatureSet& val_set,
                       const DetectorConfig& base, const Grid& grid,
                       const TrainConfig& config, unsigned workers = 1);

std::string grid_result_json(const GridResult& result, bool include_wall_time = true);

}  // namespace mmdet
