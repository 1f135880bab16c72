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

#include "mmdet/benchmark.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

#include "mmdet/csv.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/hashing.hpp"
#include "json.hpp"

namespace mmdet {
namespace {

const std::vector<std::string> kTrioHeader = {
    "group_id",           "true_image",       "true_caption_text",
    "true_caption_id",    "false_caption_text", "false_caption_id",
    "ooc_image"};

constexpr std::string_view kHashTag = "#sha256=";

struct ImageRef {
  std::string id;
  std::optional<std::string> sha256;
};

ImageRef split_image_ref(const std::string& field) {
  const auto pos = field.find(kHashTag);
  if (pos == std::string::npos) return {field, std::nullopt};
  return {field.substr(0, pos), field.substr(pos + kHashTag.size())};
}

std::string join_image_ref(const std::string& id,
                           const std::optional<std::string>& sha) {
  return sha ? id + std::string(kHashTag) + *sha : id;
}

}  // namespace

void check_trios(const std::vector<TrioRecord>& trios) {
  // Images share one namespace across the I_t and I_x slots; captions share
  // one across C_t and C_f.
  std::unordered_map<std::string, std::string> images, captions, groups;
  const auto claim = [](auto& seen, const std::string& id, const std::string& where) {
    auto [it, inserted] = seen.emplace(id, where);
    if (!inserted) {
      throw BalanceError("id '" + id + "' used by " + it->second + " and " + where);
    }
  };
  for (const auto& t : trios) {
    const std::string where = "group '" + t.group_id + "'";
    if (t.true_image_id.empty() || t.true_caption_id.empty() ||
        t.false_caption_id.empty()) {
      throw ArgumentError("trio " + where + " has an empty id");
    }
    claim(groups, t.group_id, where);
    claim(images, t.true_image_id, where);
    claim(captions, t.true_caption_id, where);
    claim(captions, t.false_caption_id, where);
    if (t.ooc_image_id) claim(images, *t.ooc_image_id, where);
  }
}

Dataset expand_trios(const std::vector<TrioRecord>& trios) {
  check_trios(trios);
  Dataset ds;
  ds.split = Split::kTest;
  const std::string src(kBenchmarkSource);
  for (const auto& t : trios) {
    ds.records.push_back({t.true_image_id, t.true_caption_id, Label::kTrue, src, {}});
    ds.records.push_back({t.true_image_id, t.false_caption_id, Label::kMC, src, {}});
    if (t.ooc_image_id) {
      ds.records.push_back({*t.ooc_image_id, t.true_caption_id, Label::kOOC, src, {}});
    }
  }
  return ds;
}

BalanceReport validate_modality_balance(const Dataset& dataset) {
  BalanceReport report;
  report.class_counts = dataset.class_counts();

  struct Use {
    std::size_t as_true = 0, as_mc = 0, as_ooc = 0;
  };
  std::map<std::string, Use> image_use, caption_use;
  std::set<std::tuple<std::string, std::string, Label>> seen;
  for (const auto& r : dataset.records) {
    ++report.image_counts[r.image_id];
    ++report.caption_counts[r.caption_id];
    auto& iu = image_use[r.image_id];
    auto& cu = caption_use[r.caption_id];
    switch (r.label) {
      case Label::kTrue:
        ++iu.as_true;
        ++cu.as_true;
        break;
      case Label::kMC:
        ++iu.as_mc;
        ++cu.as_mc;
        break;
      case Label::kOOC:
        ++iu.as_ooc;
        ++cu.as_ooc;
        break;
    }
    if (!seen.emplace(r.image_id, r.caption_id, r.label).second) {
      report.violations.push_back("duplicate record (" + r.image_id + ", " +
                                  r.caption_id + ", " +
                                  std::string(to_string(r.label)) + ")");
    }
  }

  for (const auto& [id, u] : image_use) {
    if (u.as_true > 0 || u.as_mc > 0) {
      if (u.as_true != 1 || u.as_mc != 1) {
        report.violations.push_back(
            "image '" + id + "' appears in " + std::to_string(u.as_true) +
            " True and " + std::to_string(u.as_mc) + " MC records (expected 1 and 1)");
      }
      if (u.as_ooc != 0) {
        report.violations.push_back("image '" + id +
                                    "' appears in both True/MC and OOC records");
      }
    } else if (u.as_ooc > 1) {
      report.violations.push_back("OOC image '" + id + "' appears in " +
                                  std::to_string(u.as_ooc) + " OOC records");
    }
  }
  for (const auto& [id, u] : caption_use) {
    if (u.as_ooc > 0 && u.as_true != 1) {
      report.violations.push_back("caption '" + id + "' appears in " +
                                  std::to_string(u.as_ooc) + " OOC but " +
                                  std::to_string(u.as_true) + " True records");
    }
    if (u.as_true > 1) {
      report.violations.push_back("caption '" + id + "' appears in " +
                                  std::to_string(u.as_true) + " True records");
    }
    if (u.as_ooc > 1) {
      report.violations.push_back("caption '" + id + "' appears in " +
                                  std::to_string(u.as_ooc) + " OOC records");
    }
    if (u.as_mc > 0 && (u.as_true > 0 || u.as_ooc > 0)) {
      report.violations.push_back("caption '" + id +
                                  "' is both a false caption and a truthful one");
    }
    if (u.as_mc > 1) {
      report.violations.push_back("false caption '" + id + "' appears in " +
                                  std::to_string(u.as_mc) + " MC records");
    }
    if (u.as_true == 1) {
      if (u.as_ooc == 1) {
        ++report.doubly_placed_captions;
      } else if (u.as_ooc == 0) {
        ++report.singly_placed_captions;
      }
    }
  }
  return report;
}

std::string balance_report_json(const BalanceReport& report) {
  nlohmann::ordered_json j;
  j["ok"] = report.ok();
  j["class_counts"] = {{"True", report.class_counts[Label::kTrue]},
                       {"MC", report.class_counts[Label::kMC]},
                       {"OOC", report.class_counts[Label::kOOC]}};
  j["doubly_placed_captions"] = report.doubly_placed_captions;
  j["singly_placed_captions"] = report.singly_placed_captions;
  j["violations"] = report.violations;
  nlohmann::ordered_json images = nlohmann::ordered_json::object();
  for (const auto& [id, n] : report.image_counts) images[id] = n;
  nlohmann::ordered_json captions = nlohmann::ordered_json::object();
  for (const auto& [id, n] : report.caption_counts) captions[id] = n;
  j["image_counts"] = std::move(images);
  j["caption_counts"] = std::move(captions);
  return j.dump(2) + "\n";
}

std::string_view to_string(BinaryMode mode) {
  switch (mode) {
    case BinaryMode::kTrueVsOOC:
      return "true_vs_ooc";
    case BinaryMode::kTrueVsMC:
      return "true_vs_mc";
    case BinaryMode::kMerged:
      return "merged";
  }
  return "?";
}

BinaryMode parse_binary_mode(std::string_view text) {
  if (text == "true_vs_ooc") return BinaryMode::kTrueVsOOC;
  if (text == "true_vs_mc") return BinaryMode::kTrueVsMC;
  if (text == "merged") return BinaryMode::kMerged;
  throw ArgumentError("unknown binary mode '" + std::string(text) + "'");
}

Dataset derive_binary(const Dataset& dataset, BinaryMode mode) {
  const auto counts = dataset.class_counts();
  if (counts[Label::kTrue] == 0) throw CoverageError("derive_binary: no True records");
  if (mode == BinaryMode::kTrueVsOOC && counts[Label::kOOC] == 0) {
    throw CoverageError("derive_binary: true_vs_ooc requested but no OOC records");
  }
  if (mode == BinaryMode::kTrueVsMC && counts[Label::kMC] == 0) {
    throw CoverageError("derive_binary: true_vs_mc requested but no MC records");
  }
  if (mode == BinaryMode::kMerged && counts[Label::kMC] + counts[Label::kOOC] == 0) {
    throw CoverageError("derive_binary: merged requested but no misinformation records");
  }
  Dataset out;
  out.split = dataset.split;
  for (const auto& r : dataset.records) {
    const bool keep = r.label == Label::kTrue || mode == BinaryMode::kMerged ||
                      (mode == BinaryMode::kTrueVsOOC && r.label == Label::kOOC) ||
                      (mode == BinaryMode::kTrueVsMC && r.label == Label::kMC);
    if (keep) out.records.push_back(r);
  }
  return out;
}

Dataset load_benchmark(const std::filesystem::path& manifest,
                       const EmbeddingStore& images, const EmbeddingStore& texts) {
  Dataset ds = read_dataset_csv(manifest, Split::kTest);
  for (const auto& r : ds.records) {
    images.index_of(r.image_id);
    texts.index_of(r.caption_id);
  }
  return ds;
}

std::vector<TrioRecord> read_trio_manifest(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& media_root) {
  std::vector<TrioRecord> trios;
  for (auto& row : csv::read_file(path, kTrioHeader)) {
    auto& f = row.fields;
    if (f[0].empty() || f[1].empty() || f[3].empty() || f[5].empty()) {
      throw ParseError(path.string() + ": required field is empty", row.line);
    }
    TrioRecord t;
    t.group_id = f[0];
    auto true_image = split_image_ref(f[1]);
    t.true_image_id = true_image.id;
    t.true_image_sha256 = true_image.sha256;
    t.true_caption_text = f[2];
    t.true_caption_id = f[3];
    t.false_caption_text = f[4];
    t.false_caption_id = f[5];
    if (!f[6].empty()) {
      auto ooc = split_image_ref(f[6]);
      t.ooc_image_id = ooc.id;
      t.ooc_image_sha256 = ooc.sha256;
    }
    if (media_root) {
      const auto verify = [&](const std::string& id,
                              const std::optional<std::string>& sha) {
        if (!sha) return;
        const auto actual = sha256_file(*media_root / id);
        if (actual != *sha) {
          throw ParseError(path.string() + ": content hash mismatch for '" + id +
                               "' (manifest " + *sha + ", file " + actual + ")",
                           row.line);
        }
      };
      verify(t.true_image_id, t.true_image_sha256);
      if (t.ooc_image_id) verify(*t.ooc_image_id, t.ooc_image_sha256);
    }
    trios.push_back(std::move(t));
  }
  return trios;
}

void write_trio_manifest(const std::vector<TrioRecord>& trios,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  csv::write_row(out, kTrioHeader);
  for (const auto& t : trios) {
    csv::write_row(out, {t.group_id, join_image_ref(t.true_image_id, t.true_image_sha256),
                         t.true_caption_text, t.true_caption_id, t.false_caption_text,
                         t.false_caption_id,
                         t.ooc_image_id ? join_image_ref(*t.ooc_image_id, t.ooc_image_sha256)
                                        : std::string()});
  }
}

}  // namespace mmdet
