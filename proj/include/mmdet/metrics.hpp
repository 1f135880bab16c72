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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmdet/dataset.hpp"
#include "mmdet/detector.hpp"
#include "mmdet/features.hpp"

namespace mmdet {

struct EvalReport {
  double overall_accuracy = 0.0;
  std::vector<std::string> class_names;  // True/Misinformation or True/MC/OOC
  std::map<std::string, double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
  // Accuracy per original record label, so a binary model evaluated on a
  // merged set still reports True / MC / OOC separately.
  std::map<std::string, double> per_label_accuracy;
  std::size_t records = 0;
};

// Builds the report from predicted and actual class indices.
EvalReport make_eval_report(std::span<const int> predicted,
                            std::span<const int> actual,
                            std::span<const Label> record_labels, int classes);

// Runs the detector in inference mode over the whole feature set.
EvalReport evaluate(const DetectorParams& params, const DetectorConfig& config,
                    const FeatureSet& features);

// Overall accuracy only; same batching as evaluate().
double accuracy(const DetectorParams& params, const DetectorConfig& config,
                const FeatureSet& features);

std::string eval_report_json(const EvalReport& report);

// Relative accuracy change of the multimodal model over the unimodal one,
// in percent. Negative values mean the unimodal model wins.
double delta_pct(double multimodal_acc, double unimodal_acc);

// (mean(uni) - mean(multi)) / pooled sample standard deviation. Positive
// values mean the unimodal model wins. Throws UndefinedError when either
// sample has fewer than two values or the pooled variance is zero.
double cohens_d(std::span<const double> unimodal_accs,
                std::span<const double> multimodal_accs);

// Canonical variant names are the detector mode names; the short
// aliases D(I,C), D-(I;C), D-(C), D-(I) are accepted on input.
std::string canonical_variant(std::string_view name);

struct AccuracyRow {
  std::string training_dataset;
  std::string variant;
  std::string eval_set;
  double accuracy = 0.0;
};

struct BiasRow {
  std::string eval_set;
  std::string multimodal_variant;
  std::string unimodal_variant;
  std::vector<std::string> training_datasets;
  std::vector<double> delta_pcts;  // per training dataset
  double mean_delta_pct = 0.0;
  std::optional<double> cohens_d;  // nullopt when undefined
};

struct BiasAuditReport {
  std::vector<BiasRow> rows;
  std::vector<AccuracyRow> table;
};

// Throws CoverageError naming the missing (eval_set, training_dataset,
// variant) cell when some training dataset lacks a variant that the
// eval set uses elsewhere.
BiasAuditReport audit(std::span<const AccuracyRow> table);

// CSV `training_dataset,variant,eval_set,accuracy`.
std::vector<AccuracyRow> read_accuracy_table(const std::filesystem::path& path);
void write_accuracy_table(std::span<const AccuracyRow> rows,
                          const std::filesystem::path& path);
void append_accuracy_row(const AccuracyRow& row, const std::filesystem::path& path);

std::string audit_json(const BiasAuditReport& report);
// CSV `eval_set,multimodal_variant,unimodal_variant,n,mean_delta_pct,cohens_d`
std::string audit_csv(const BiasAuditReport& report);

}  // namespace mmdet
