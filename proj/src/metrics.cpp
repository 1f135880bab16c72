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

#include "mmdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mmdet/csv.hpp"
#include "mmdet/errors.hpp"

namespace mmdet {
namespace {

constexpr std::size_t kEvalBatch = 2048;

const std::vector<std::string> kTableHeader = {"training_dataset", "variant",
                                               "eval_set", "accuracy"};

std::vector<int> predict_all(const DetectorParams& params,
                             const DetectorConfig& config,
                             const FeatureSet& features) {
  std::vector<int> out;
  out.reserve(features.size());
  for (std::size_t begin = 0; begin < features.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(features.size(), begin + kEvalBatch);
    const auto pass = forward(params, config, features.slice(begin, end), false);
    const auto pred = predict(pass.logits, config.classes);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

double mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

EvalReport make_eval_report(std::span<const int> predicted,
                            std::span<const int> actual,
                            std::span<const Label> record_labels, int classes) {
  if (predicted.size() != actual.size() || record_labels.size() != actual.size()) {
    throw ArgumentError("make_eval_report: length mismatch");
  }
  if (classes != 1 && classes != 3) throw ArgumentError("classes must be 1 or 3");
  EvalReport r;
  r.records = actual.size();
  r.class_names = classes == 1 ? std::vector<std::string>{"True", "Misinformation"}
                               : std::vector<std::string>{"True", "MC", "OOC"};
  const std::size_t k = r.class_names.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::map<Label, std::pair<std::size_t, std::size_t>> by_label;  // correct, total
  std::size_t correct = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || static_cast<std::size_t>(actual[i]) >= k ||
        predicted[i] < 0 || static_cast<std::size_t>(predicted[i]) >= k) {
      throw ArgumentError("class index out of range at record " + std::to_string(i));
    }
    ++r.confusion[actual[i]][predicted[i]];
    const bool ok = actual[i] == predicted[i];
    correct += ok;
    auto& bl = by_label[record_labels[i]];
    bl.first += ok;
    ++bl.second;
  }
  r.overall_accuracy = actual.empty() ? 0.0 : static_cast<double>(correct) / actual.size();
  for (std::size_t c = 0; c < k; ++c) {
    const auto row = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
    if (row > 0) {
      r.per_class_accuracy[r.class_names[c]] = static_cast<double>(r.confusion[c][c]) / row;
    }
  }
  for (const auto& [label, ct] : by_label) {
    r.per_label_accuracy[std::string(to_string(label))] =
        static_cast<double>(ct.first) / ct.second;
  }
  return r;
}

EvalReport evaluate(const DetectorParams& params, const DetectorConfig& config,
                    const FeatureSet& features) {
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int hi = config.classes == 1 ? 1 : 2;
    if (features.labels[i] < 0 || features.labels[i] > hi) {
      throw ArgumentError("dataset labels incompatible with a " +
                          std::to_string(config.classes) + "-output detector");
    }
  }
  const auto pred = predict_all(params, config, features);
  return make_eval_report(pred, features.labels, features.record_labels, config.classes);
}

double accuracy(const DetectorParams& params, const DetectorConfig& config,
                const FeatureSet& features) {
  if (features.size() == 0) throw ArgumentError("accuracy of an empty set");
  const auto pred = predict_all(params, config, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == features.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::string eval_report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["records"] = report.records;
  j["overall_accuracy"] = report.overall_accuracy;
  j["class_names"] = report.class_names;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& name : report.class_names) {
    if (auto it = report.per_class_accuracy.find(name); it != report.per_class_accuracy.end()) {
      pc[name] = it->second;
    }
  }
  j["per_class_accuracy"] = pc;
  j["confusion"] = report.confusion;
  nlohmann::ordered_json pl = nlohmann::ordered_json::object();
  for (Label l : kAllLabels) {
    const std::string name(to_string(l));
    if (auto it = report.per_label_accuracy.find(name); it != report.per_label_accuracy.end()) {
      pl[name] = it->second;
    }
  }
  j["per_label_accuracy"] = pl;
  return j.dump(2) + "\n";
}

double delta_pct(double multimodal_acc, double unimodal_acc) {
  if (!(unimodal_acc > 0.0)) {
    throw ArgumentError("delta_pct: unimodal accuracy must be positive");
  }
  return 100.0 * (multimodal_acc - unimodal_acc) / unimodal_acc;
}

double cohens_d(std::span<const double> unimodal_accs,
                std::span<const double> multimodal_accs) {
  const std::size_t n1 = unimodal_accs.size(), n2 = multimodal_accs.size();
  if (n1 < 2 || n2 < 2) {
    throw UndefinedError("cohens_d: each sample needs at least two values");
  }
  const double pooled = ((n1 - 1) * sample_variance(unimodal_accs) +
                         (n2 - 1) * sample_variance(multimodal_accs)) /
                        static_cast<double>(n1 + n2 - 2);
  if (!(pooled > 0.0)) throw UndefinedError("cohens_d: zero pooled variance");
  return (mean(unimodal_accs) - mean(multimodal_accs)) / std::sqrt(pooled);
}

std::string canonical_variant(std::string_view name) {
  if (name == "multimodal_token" || name == "D(I,C)") return "multimodal_token";
  if (name == "multimodal_dim" || name == "D-(I;C)") return "multimodal_dim";
  if (name == "text_only" || name == "D-(C)") return "text_only";
  if (name == "image_only" || name == "D-(I)") return "image_only";
  throw ArgumentError("unknown variant '" + std::string(name) + "'");
}

BiasAuditReport audit(std::span<const AccuracyRow> table) {
  BiasAuditReport report;
  report.table.assign(table.begin(), table.end());

  // Preserve first-appearance order of eval sets and training datasets.
  std::vector<std::string> eval_sets;
  std::map<std::string, std::vector<std::string>> trainings;
  std::map<std::string, std::set<std::string>> variants;
  std::map<std::tuple<std::string, std::string, std::string>, double> cell;
  for (const auto& row : table) {
    const auto v = canonical_variant(row.variant);
    if (std::find(eval_sets.begin(), eval_sets.end(), row.eval_set) == eval_sets.end()) {
      eval_sets.push_back(row.eval_set);
    }
    auto& tr = trainings[row.eval_set];
    if (std::find(tr.begin(), tr.end(), row.training_dataset) == tr.end()) {
      tr.push_back(row.training_dataset);
    }
    variants[row.eval_set].insert(v);
    if (!cell.emplace(std::make_tuple(row.eval_set, row.training_dataset, v), row.accuracy)
             .second) {
      throw ArgumentError("duplicate accuracy cell (" + row.eval_set + ", " +
                          row.training_dataset + ", " + v + ")");
    }
  }

  static const std::vector<std::string> kMulti = {"multimodal_token", "multimodal_dim"};
  static const std::vector<std::string> kUni = {"text_only", "image_only"};
  for (const auto& es : eval_sets) {
    const auto& vs = variants[es];
    for (const auto& tr : trainings[es]) {
      for (const auto& v : vs) {
        if (!cell.contains({es, tr, v})) {
          throw CoverageError("missing accuracy cell (eval_set=" + es +
                              ", training_dataset=" + tr + ", variant=" + v + ")");
        }
      }
    }
    for (const auto& multi : kMulti) {
      if (!vs.contains(multi)) continue;
      for (const auto& uni : kUni) {
        if (!vs.contains(uni)) continue;
        BiasRow row;
        row.eval_set = es;
        row.multimodal_variant = multi;
        row.unimodal_variant = uni;
        std::vector<double> multi_col, uni_col;
        for (const auto& tr : trainings[es]) {
          const double m = cell.at({es, tr, multi});
          const double u = cell.at({es, tr, uni});
          row.training_datasets.push_back(tr);
          row.delta_pcts.push_back(delta_pct(m, u));
          multi_col.push_back(m);
          uni_col.push_back(u);
        }
        row.mean_delta_pct = mean(row.delta_pcts);
        try {
          row.cohens_d = cohens_d(uni_col, multi_col);
        } catch (const UndefinedError&) {
          row.cohens_d.reset();
        }
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

std::vector<AccuracyRow> read_accuracy_table(const std::filesystem::path& path) {
  std::vector<AccuracyRow> rows;
  for (auto& r : csv::read_file(path, kTableHeader)) {
    AccuracyRow row{r.fields[0], r.fields[1], r.fields[2],
                    csv::parse_double(r.fields[3], r.line)};
    try {
      canonical_variant(row.variant);
    } catch (const ArgumentError& e) {
      throw ParseError(path.string() + ": " + e.what(), r.line);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_accuracy_table(std::span<const AccuracyRow> rows,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  csv::write_row(out, kTableHeader);
  for (const auto& r : rows) {
    csv::write_row(out, {r.training_dataset, r.variant, r.eval_set,
                         csv::format_double(r.accuracy)});
  }
}

void append_accuracy_row(const AccuracyRow& row, const std::filesystem::path& path) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) csv::write_row(out, kTableHeader);
  csv::write_row(out, {row.training_dataset, row.variant, row.eval_set,
                       csv::format_double(row.accuracy)});
}

std::string audit_json(const BiasAuditReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json o;
    o["eval_set"] = r.eval_set;
    o["multimodal_variant"] = r.multimodal_variant;
    o["unimodal_variant"] = r.unimodal_variant;
    o["n"] = r.training_datasets.size();
    o["mean_delta_pct"] = r.mean_delta_pct;
    o["cohens_d"] = r.cohens_d ? nlohmann::ordered_json(*r.cohens_d) : nlohmann::ordered_json();
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.training_datasets.size(); ++i) {
      per.push_back({{"training_dataset", r.training_datasets[i]},
                     {"delta_pct", r.delta_pcts[i]}});
    }
    o["per_training_dataset"] = per;
    rows.push_back(o);
  }
  j["rows"] = rows;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& t : report.table) {
    table.push_back({{"training_dataset", t.training_dataset},
                     {"variant", t.variant},
                     {"eval_set", t.eval_set},
                     {"accuracy", t.accuracy}});
  }
  j["table"] = table;
  return j.dump(2) + "\n";
}

std::string audit_csv(const BiasAuditReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"eval_set", "multimodal_variant", "unimodal_variant", "n",
                       "mean_delta_pct", "cohens_d"});
  for (const auto& r : report.rows) {
    csv::write_row(out, {r.eval_set, r.multimodal_variant, r.unimodal_variant,
                         std::to_string(r.training_datasets.size()),
                         csv::format_double(r.mean_delta_pct),
                         r.cohens_d ? csv::format_double(*r.cohens_d) : std::string()});
  }
  return out.str();
}

}  // namespace mmdet
