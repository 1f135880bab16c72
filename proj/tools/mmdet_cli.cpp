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

// mmdet: command-line entry point for the whole pipeline.
//
// Exit status: 0 success, 1 validation failure or runtime error, 2 usage
// error. Every run that writes outputs also writes a run manifest next to
// them (<out>.manifest.json, or manifest.json inside an output directory).

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmdet/benchmark.hpp"
#include "mmdet/chasma.hpp"
#include "mmdet/checkpoint.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/features.hpp"
#include "mmdet/hashing.hpp"
#include "mmdet/metrics.hpp"
#include "mmdet/rng.hpp"
#include "mmdet/synthkit.hpp"
#include "mmdet/trainer.hpp"

#ifndef MMDET_VERSION
#define MMDET_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// JSON config files: top-level keys are global options, nested objects are
// subcommands, e.g. {"seed": 0, "train": {"lr": 0.001, "images": ["a.embs"]}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    return dump(app, default_also).dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void walk(const json& obj, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, v] : obj.items()) {
      if (v.is_object()) {
        auto next = parents;
        next.push_back(key);
        walk(v, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      items.push_back(std::move(item));
    }
  }

  static json dump(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || opt->get_configurable() == false) continue;
      const auto& name = opt->get_lnames().front();
      if (!opt->results().empty()) {
        j[name] = opt->results().size() == 1 ? json(opt->results().front())
                                             : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json s = dump(sub, default_also);
      if (!s.empty()) j[sub->get_name()] = std::move(s);
    }
    return j;
  }
};

// Typed JSON for a CLI string value: numbers and booleans stay typed.
json typed(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  double d = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, d);
  if (!s.empty() && r.ec == std::errc() && r.ptr == end) {
    std::int64_t i = 0;
    const auto ri = std::from_chars(s.data(), end, i);
    if (ri.ec == std::errc() && ri.ptr == end) return i;
    return d;
  }
  return s;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mmdet::Error("cannot write " + path.string());
  out << text;
  if (!out) throw mmdet::Error("write failed: " + path.string());
}

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw mmdet::Error("input file not found: " + p.string());
  return p;
}

fs::path manifest_beside(const fs::path& out) {
  return fs::path(out.string() + ".manifest.json");
}

// State shared by every subcommand.
struct Run {
  CLI::App* app = nullptr;
  CLI::App* leaf = nullptr;
  std::vector<std::string> argv;
  std::string started;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  json extra = json::object();

  fs::path in(const fs::path& p) {
    require_file(p);
    inputs.push_back(p);
    return p;
  }
  fs::path out(const fs::path& p) {
    outputs.push_back(p);
    return p;
  }

  json resolved_config() const {
    json j = json::object();
    std::vector<const CLI::App*> chain;
    for (const CLI::App* a = leaf; a != nullptr; a = a->get_parent()) chain.insert(chain.begin(), a);
    for (const CLI::App* a : chain) {
      for (const CLI::Option* opt : a->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const auto& name = opt->get_lnames().front();
        if (name == "help" || name == "config" || name == "version") continue;
        const bool many = opt->get_items_expected_max() > 1;
        if (!opt->results().empty()) {
          if (many) {
            json arr = json::array();
            for (const auto& r : opt->results()) arr.push_back(typed(r));
            j[name] = arr;
          } else {
            j[name] = typed(opt->results().back());
          }
        } else if (opt->get_expected_min() == 0) {
          j[name] = false;
        } else if (!opt->get_default_str().empty()) {
          j[name] = typed(opt->get_default_str());
        } else {
          j[name] = many ? json::array() : json(nullptr);
        }
      }
    }
    return j;
  }

  std::string command() const {
    std::vector<std::string> parts;
    for (const CLI::App* a = leaf; a != nullptr && a->get_parent() != nullptr; a = a->get_parent()) {
      parts.insert(parts.begin(), a->get_name());
    }
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : " ") + p;
    return s;
  }

  void write_manifest(const fs::path& path) const {
    json m;
    m["tool"] = "mmdet";
    m["version"] = MMDET_VERSION;
    m["command"] = command();
    m["argv"] = argv;
    m["config"] = resolved_config();
    json streams = json::object();
    for (const char* s : {"misalign", "split", "init", "shuffle", "dropout", "balance", "world"}) {
      streams[s] = mmdet::derive_seed(seed, s);
    }
    m["seeds"] = {{"seed", seed}, {"streams", streams}};
    json ins = json::array();
    for (const auto& p : inputs) ins.push_back({{"path", p.string()}, {"sha256", mmdet::sha256_file(p)}});
    m["inputs"] = ins;
    json outs = json::array();
    for (const auto& p : outputs) outs.push_back(p.string());
    m["outputs"] = outs;
    if (!extra.empty()) m["run"] = extra;
    m["started_at"] = started;
    m["finished_at"] = iso_now();
    write_text(path, m.dump(2) + "\n");
  }
};

std::vector<mmdet::EmbeddingStore> open_stores(Run& run, const std::vector<std::string>& paths) {
  std::vector<mmdet::EmbeddingStore> out;
  for (const auto& p : paths) out.push_back(mmdet::open_store(run.in(p)));
  return out;
}

std::vector<const mmdet::EmbeddingStore*> pointers(const std::vector<mmdet::EmbeddingStore>& v) {
  std::vector<const mmdet::EmbeddingStore*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

int store_dim(const std::vector<mmdet::EmbeddingStore>& a,
              const std::vector<mmdet::EmbeddingStore>& b) {
  std::optional<std::uint32_t> dim;
  for (const auto* v : {&a, &b}) {
    for (const auto& s : *v) {
      if (dim && *dim != s.dim()) throw mmdet::ArgumentError("stores disagree on dim");
      dim = s.dim();
    }
  }
  if (!dim) throw mmdet::ArgumentError("no embedding stores given");
  return static_cast<int>(*dim);
}

json store_summary(const mmdet::EmbeddingStore& s) {
  return {{"modality", std::string(mmdet::to_string(s.modality()))},
          {"dim", s.dim()},
          {"count", s.size()}};
}

json validation_json(const mmdet::StoreValidationReport& r) {
  return {{"clean", r.clean()},
          {"nan_count", r.nan_count},
          {"duplicate_ids", r.duplicate_ids},
          {"dim_mismatch", r.dim_mismatch},
          {"zero_vector_ids", r.zero_vector_ids}};
}

// ---- training options shared by train and grid ----

struct TrainOptions {
  std::string train_csv, val_csv;
  double val_fraction = 0.10;
  std::vector<std::string> images, texts;
  std::string mode = "multimodal_token";
  int classes = 1;
  int layers = 1, heads = 2, ff = 128;
  double dropout = 0.1;
  double lr = 5e-5;
  std::size_t batch_size = 512;
  int epochs = 30, patience = 10;
  std::string out_dir;

  void add(CLI::App* sub, bool grid) {
    sub->add_option("--train", train_csv, "Training dataset CSV")->required();
    sub->add_option("--val", val_csv, "Validation dataset CSV (default: split from --train)");
    sub->add_option("--val-fraction", val_fraction, "Validation share when splitting")->capture_default_str();
    sub->add_option("--images", images, "Image embedding store(s), first match wins");
    sub->add_option("--texts", texts, "Caption embedding store(s), first match wins");
    sub->add_option("--mode", mode, "multimodal_token | multimodal_dim | text_only | image_only")
        ->capture_default_str();
    sub->add_option("--classes", classes, "1 (binary) or 3 (multiclass)")->capture_default_str();
    if (!grid) {
      sub->add_option("--layers", layers, "Encoder layers")->capture_default_str();
      sub->add_option("--heads", heads, "Attention heads")->capture_default_str();
      sub->add_option("--ff", ff, "Feed-forward width")->capture_default_str();
    }
    sub->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
    sub->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--batch-size", batch_size, "Batch size")->capture_default_str();
    sub->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    sub->add_option("--patience", patience, "Epochs without improvement before stopping")
        ->capture_default_str();
    sub->add_option("--out-dir", out_dir, "Run directory (best.dpar, report.json)")->required();
  }

  struct Prepared {
    mmdet::FeatureSet train, val;
    mmdet::DetectorConfig detector;
    mmdet::TrainConfig config;
  };

  Prepared prepare(Run& run) const {
    const auto mode_v = mmdet::parse_detector_mode(mmdet::canonical_variant(mode));
    auto image_stores = open_stores(run, images);
    auto text_stores = open_stores(run, texts);
    auto tr = mmdet::read_dataset_csv(run.in(train_csv), mmdet::Split::kTrain);
    mmdet::Dataset va;
    if (!val_csv.empty()) {
      va = mmdet::read_dataset_csv(run.in(val_csv), mmdet::Split::kValidation);
    } else {
      std::tie(tr, va) = mmdet::split_train_val(tr, val_fraction, run.seed);
    }
    Prepared p;
    p.detector.mode = mode_v;
    p.detector.classes = classes;
    p.detector.layers = layers;
    p.detector.heads = heads;
    p.detector.ff = ff;
    p.detector.dropout = dropout;
    p.detector.dim = store_dim(image_stores, text_stores);
    const auto ip = pointers(image_stores), tp = pointers(text_stores);
    p.train = mmdet::encode_features(tr, ip, tp, mode_v, classes);
    p.val = mmdet::encode_features(va, ip, tp, mode_v, classes);
    p.config.learning_rate = lr;
    p.config.batch_size = batch_size;
    p.config.max_epochs = epochs;
    p.config.patience = patience;
    p.config.seed = run.seed;
    return p;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmdet: synthetic misalignment, balanced benchmarks, detector training and bias audits"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (flags override it)");
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", MMDET_VERSION);

  Run run;
  for (int i = 1; i < argc; ++i) run.argv.emplace_back(argv[i]);
  app.add_option("--seed", run.seed, "Root seed for every derived stream")->capture_default_str();
  app.add_option("--workers", run.workers, "Worker threads (outputs do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::function<int()> action;
  const auto leaf = [&](CLI::App* sub, std::function<int()> fn) {
    sub->fallthrough();
    sub->callback([&run, &action, sub, fn] {
      run.leaf = sub;
      action = fn;
    });
  };

  // ---- store ----
  auto* store = app.add_subcommand("store", "Embedding store utilities")->require_subcommand(1);
  store->fallthrough();
  std::string store_path, store_out;
  std::optional<std::uint32_t> store_dim_opt;

  auto* store_validate = store->add_subcommand("validate", "Check store invariants; exit 1 if any fail");
  store_validate->add_option("--store", store_path, "Store file")->required();
  store_validate->add_option("--dim", store_dim_opt, "Expected dimension");
  store_validate->add_option("--out", store_out, "Write the report as JSON");
  leaf(store_validate, [&] {
    const auto s = mmdet::open_store(run.in(store_path));
    const auto report = mmdet::validate_store(s, store_dim_opt);
    json j = store_summary(s);
    j["report"] = validation_json(report);
    std::cout << j.dump(2) << "\n";
    if (!store_out.empty()) {
      write_text(run.out(store_out), j.dump(2) + "\n");
      run.write_manifest(manifest_beside(store_out));
    }
    return report.clean() ? 0 : 1;
  });

  auto* store_info = store->add_subcommand("info", "Print modality, dim and count");
  store_info->add_option("--store", store_path, "Store file")->required();
  store_info->add_option("--out", store_out, "Write the summary as JSON");
  leaf(store_info, [&] {
    const auto s = mmdet::open_store(run.in(store_path));
    const json j = store_summary(s);
    std::cout << j.dump(2) << "\n";
    if (!store_out.empty()) {
      write_text(run.out(store_out), j.dump(2) + "\n");
      run.write_manifest(manifest_beside(store_out));
    }
    return 0;
  });

  // ---- chasma ----
  auto* chasma = app.add_subcommand("chasma", "Hard synthetic misalignment and dataset shaping")
                     ->require_subcommand(1);
  chasma->fallthrough();
  std::string pairs_csv, images_embs, texts_embs, pool_embs, out_path, dataset_out, assignments_csv;
  std::string dataset_csv;
  std::vector<std::string> dataset_list;
  double threshold = 0.5;
  std::string aggregate_kind = "binary";

  auto* generate = chasma->add_subcommand("generate", "Assign a misleading caption to every truthful pair");
  generate->add_option("--pairs", pairs_csv, "Truthful pairs CSV (image_id,caption_id)")->required();
  generate->add_option("--images", images_embs, "Image store")->required();
  generate->add_option("--texts", texts_embs, "Truthful caption store")->required();
  generate->add_option("--pool", pool_embs, "Misleading caption pool store")->required();
  generate->add_option("--threshold", threshold, "p <= threshold takes the text-text branch")
      ->capture_default_str();
  generate->add_option("--out", out_path, "Assignments CSV")->required();
  generate->add_option("--dataset-out", dataset_out, "Also write the True+MC dataset CSV");
  leaf(generate, [&] {
    const auto pairs = mmdet::read_pairs_csv(run.in(pairs_csv));
    const auto images = mmdet::open_store(run.in(images_embs));
    const auto texts = mmdet::open_store(run.in(texts_embs));
    const auto pool = mmdet::CaptionPool::from_store(mmdet::open_store(run.in(pool_embs)));
    mmdet::MisalignStats stats;
    const auto as = mmdet::misalign(pairs, images, texts, pool,
                                    {.seed = run.seed, .threshold = threshold, .workers = run.workers},
                                    &stats);
    if (stats.exact_matches > 0) {
      std::cerr << "warning: " << stats.exact_matches
                << " text-branch picks are verbatim copies of the query caption "
                   "(pool overlaps the truthful captions)\n";
    }
    mmdet::write_assignments_csv(as, run.out(out_path));
    run.extra["exact_matches"] = stats.exact_matches;
    if (!dataset_out.empty()) {
      mmdet::write_dataset_csv(mmdet::build_mc_dataset(pairs, as), run.out(dataset_out));
    }
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  auto* dedup = chasma->add_subcommand("dedup", "Keep one MC record per false caption");
  dedup->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
  dedup->add_option("--assignments", assignments_csv, "Assignments CSV carrying similarities")->required();
  dedup->add_option("--out", out_path, "Output dataset CSV")->required();
  leaf(dedup, [&] {
    auto ds = mmdet::read_dataset_csv(run.in(dataset_csv), mmdet::Split::kTrain);
    std::map<std::pair<std::string, std::string>, double> sim;
    for (const auto& a : mmdet::read_assignments_csv(run.in(assignments_csv))) {
      sim[{a.image_id, a.false_caption_id}] = a.similarity;
    }
    for (auto& r : ds.records) {
      if (r.label != mmdet::Label::kMC) continue;
      if (auto it = sim.find({r.image_id, r.caption_id}); it != sim.end()) r.similarity = it->second;
    }
    const auto out = mmdet::deduplicate_false_captions(ds);
    mmdet::write_dataset_csv(out, run.out(out_path));
    run.extra["records_in"] = ds.size();
    run.extra["records_out"] = out.size();
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  auto* balance = chasma->add_subcommand("balance", "Down-sample every class to the smallest");
  balance->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
  balance->add_option("--out", out_path, "Output dataset CSV")->required();
  leaf(balance, [&] {
    const auto ds = mmdet::read_dataset_csv(run.in(dataset_csv), mmdet::Split::kTrain);
    mmdet::write_dataset_csv(mmdet::downsample_balance(ds, run.seed), run.out(out_path));
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  auto* agg = chasma->add_subcommand("aggregate", "Concatenate datasets and balance");
  agg->add_option("--dataset", dataset_list, "Dataset CSV (repeat for each source)")->required();
  agg->add_option("--kind", aggregate_kind, "binary | multiclass")
      ->capture_default_str()
      ->check(CLI::IsMember({"binary", "multiclass"}));
  agg->add_option("--out", out_path, "Output dataset CSV")->required();
  leaf(agg, [&] {
    std::vector<mmdet::Dataset> parts;
    for (const auto& p : dataset_list) parts.push_back(mmdet::read_dataset_csv(run.in(p), mmdet::Split::kTrain));
    const auto kind = aggregate_kind == "multiclass" ? mmdet::AggregateKind::kMulticlass
                                                     : mmdet::AggregateKind::kBinary;
    mmdet::write_dataset_csv(mmdet::aggregate(parts, run.seed, kind), run.out(out_path));
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "Modality-balanced evaluation sets")->require_subcommand(1);
  bench->fallthrough();
  std::string trios_csv, media_root, binary_mode;

  auto* expand = bench->add_subcommand("expand", "Expand a trio manifest into a labeled dataset");
  expand->add_option("--trios", trios_csv, "Trio manifest CSV")->required();
  expand->add_option("--media-root", media_root, "Verify image content hashes under this directory");
  expand->add_option("--out", out_path, "Output dataset CSV")->required();
  leaf(expand, [&] {
    std::optional<fs::path> root;
    if (!media_root.empty()) root = media_root;
    const auto trios = mmdet::read_trio_manifest(run.in(trios_csv), root);
    mmdet::write_dataset_csv(mmdet::expand_trios(trios), run.out(out_path));
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  auto* bvalidate = bench->add_subcommand("validate", "Check modality balance; exit 1 on violations");
  bvalidate->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
  bvalidate->add_option("--out", out_path, "Write the balance report as JSON");
  leaf(bvalidate, [&] {
    const auto ds = mmdet::read_dataset_csv(run.in(dataset_csv), mmdet::Split::kTest);
    const auto report = mmdet::validate_modality_balance(ds);
    const auto text = mmdet::balance_report_json(report);
    if (!out_path.empty()) {
      write_text(run.out(out_path), text);
      run.write_manifest(manifest_beside(out_path));
    } else {
      std::cout << text;
    }
    for (const auto& v : report.violations) std::cerr << "violation: " << v << "\n";
    return report.ok() ? 0 : 1;
  });

  auto* binarize = bench->add_subcommand("binarize", "Derive a binary evaluation set");
  binarize->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
  binarize->add_option("--mode", binary_mode, "true_vs_ooc | true_vs_mc | merged")
      ->required()
      ->check(CLI::IsMember({"true_vs_ooc", "true_vs_mc", "merged"}));
  binarize->add_option("--out", out_path, "Output dataset CSV")->required();
  leaf(binarize, [&] {
    const auto ds = mmdet::read_dataset_csv(run.in(dataset_csv), mmdet::Split::kTest);
    mmdet::write_dataset_csv(mmdet::derive_binary(ds, mmdet::parse_binary_mode(binary_mode)),
                             run.out(out_path));
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Synthetic embedding corpora")->require_subcommand(1);
  synth->fallthrough();
  mmdet::SynthConfig sc;
  std::string signal = "crossmodal_only", synth_dir, stream;
  const auto synth_common = [&](CLI::App* sub) {
    sub->add_option("--out-dir", synth_dir, "Output directory")->required();
    sub->add_option("--dim", sc.dim, "Embedding dimension")->capture_default_str();
    sub->add_option("--signal", signal, "crossmodal_only | text_bias | image_bias | noise")
        ->capture_default_str()
        ->check(CLI::IsMember({"crossmodal_only", "text_bias", "image_bias", "noise"}));
    sub->add_option("--strength", sc.signal_strength, "Signal strength in [0, 1]")->capture_default_str();
  };

  auto* corpus = synth->add_subcommand("corpus", "Stores, truthful pairs and a labeled dataset");
  synth_common(corpus);
  corpus->add_option("--pairs", sc.n_pairs, "Number of truthful pairs")->capture_default_str();
  stream = "corpus";
  corpus->add_option("--stream", stream, "Sample stream name (same seed, other stream: same world)")
      ->capture_default_str();
  leaf(corpus, [&] {
    sc.seed = run.seed;
    sc.signal_mode = mmdet::parse_signal_mode(signal);
    sc.sample_stream = stream;
    const auto c = mmdet::generate_corpus(sc);
    const fs::path dir = synth_dir;
    fs::create_directories(dir);
    mmdet::save_store(c.images, run.out(dir / "images.embs"));
    mmdet::save_store(c.texts, run.out(dir / "texts.embs"));
    mmdet::save_store(c.pool, run.out(dir / "pool.embs"));
    mmdet::write_pairs_csv(c.pairs, run.out(dir / "pairs.csv"));
    mmdet::write_dataset_csv(c.labeled, run.out(dir / "labeled.csv"));
    run.write_manifest(dir / "manifest.json");
    return 0;
  });

  auto* sbench = synth->add_subcommand("bench", "Balanced trio benchmark with stores");
  synth_common(sbench);
  std::size_t n_trios = 338;
  std::string bench_stream = "bench";
  sbench->add_option("--trios", n_trios, "Number of trios")->capture_default_str();
  sbench->add_option("--ooc-fraction", sc.ooc_fraction, "Share of trios with an OOC image")
      ->capture_default_str();
  sbench->add_option("--stream", bench_stream, "Sample stream name")->capture_default_str();
  leaf(sbench, [&] {
    sc.seed = run.seed;
    sc.signal_mode = mmdet::parse_signal_mode(signal);
    sc.sample_stream = bench_stream;
    sc.n_pairs = n_trios;
    const auto b = mmdet::generate_balanced_benchmark(sc);
    const fs::path dir = synth_dir;
    fs::create_directories(dir);
    mmdet::write_trio_manifest(b.trios, run.out(dir / "trios.csv"));
    mmdet::save_store(b.images, run.out(dir / "images.embs"));
    mmdet::save_store(b.texts, run.out(dir / "texts.embs"));
    mmdet::write_dataset_csv(mmdet::expand_trios(b.trios), run.out(dir / "benchmark.csv"));
    run.write_manifest(dir / "manifest.json");
    return 0;
  });

  // ---- train / grid ----
  TrainOptions topt;
  auto* train = app.add_subcommand("train", "Train one detector with early stopping");
  topt.add(train, false);
  leaf(train, [&] {
    const auto p = topt.prepare(run);
    const auto result = mmdet::train(p.train, p.val, p.detector, p.config);
    const fs::path dir = topt.out_dir;
    fs::create_directories(dir);
    mmdet::save_checkpoint(p.detector, result.params, run.out(dir / "best.dpar"));
    write_text(run.out(dir / "report.json"), mmdet::train_report_json(result.report, false));
    run.extra["wall_seconds"] = result.report.wall_seconds;
    run.write_manifest(dir / "manifest.json");
    std::cout << "best epoch " << result.report.best_epoch << ", validation accuracy "
              << result.report.best_val_accuracy << "\n";
    return 0;
  });

  TrainOptions gopt;
  std::vector<int> grid_layers = {1, 4}, grid_ff = {128, 1024}, grid_heads = {2, 8};
  std::vector<double> grid_lr;
  auto* grid = app.add_subcommand("grid", "Grid search over layers, ff width, heads and lr");
  gopt.add(grid, true);
  grid->add_option("--grid-layers", grid_layers, "Layer counts")->delimiter(',')->capture_default_str();
  grid->add_option("--grid-ff", grid_ff, "Feed-forward widths")->delimiter(',')->capture_default_str();
  grid->add_option("--grid-heads", grid_heads, "Head counts")->delimiter(',')->capture_default_str();
  grid->add_option("--grid-lr", grid_lr, "Learning rates (default: --lr)")->delimiter(',');
  leaf(grid, [&] {
    const auto p = gopt.prepare(run);
    mmdet::Grid g;
    g.layers = grid_layers;
    g.ff = grid_ff;
    g.heads = grid_heads;
    g.learning_rates = grid_lr;
    const auto result = mmdet::grid_search(p.train, p.val, p.detector, g, p.config, run.workers);
    const fs::path dir = gopt.out_dir;
    fs::create_directories(dir);
    mmdet::save_checkpoint(result.detector, result.params, run.out(dir / "best.dpar"));
    write_text(run.out(dir / "report.json"), mmdet::train_report_json(result.report, false));
    write_text(run.out(dir / "grid.json"), mmdet::grid_result_json(result, false));
    json walls = json::array();
    for (const auto& r : result.runs) walls.push_back(r.report.wall_seconds);
    run.extra["wall_seconds"] = walls;
    run.write_manifest(dir / "manifest.json");
    std::cout << "best combination " << result.best_index << " (layers " << result.detector.layers
              << ", ff " << result.detector.ff << ", heads " << result.detector.heads
              << "), validation accuracy " << result.report.best_val_accuracy << "\n";
    return 0;
  });

  // ---- evaluate ----
  std::string checkpoint_path, append_table, training_name, eval_set, variant;
  std::vector<std::string> eval_images, eval_texts;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint (.dpar)")->required();
  evaluate->add_option("--dataset", dataset_csv, "Dataset CSV")->required();
  evaluate->add_option("--images", eval_images, "Image store(s)");
  evaluate->add_option("--texts", eval_texts, "Caption store(s)");
  evaluate->add_option("--binary-mode", binary_mode, "Derive a binary set first")
      ->check(CLI::IsMember({"true_vs_ooc", "true_vs_mc", "merged"}));
  evaluate->add_option("--out", out_path, "Evaluation report JSON")->required();
  evaluate->add_option("--append-table", append_table, "Append the accuracy (percent) to this table");
  evaluate->add_option("--training-dataset", training_name, "Table column: training dataset name");
  evaluate->add_option("--eval-set", eval_set, "Table column: evaluation set name");
  evaluate->add_option("--variant", variant, "Table column: variant (default: checkpoint mode)");
  leaf(evaluate, [&] {
    if (!append_table.empty() && (training_name.empty() || eval_set.empty())) {
      throw CLI::ValidationError("--append-table", "needs --training-dataset and --eval-set");
    }
    const auto ck = mmdet::load_checkpoint(run.in(checkpoint_path));
    auto ds = mmdet::read_dataset_csv(run.in(dataset_csv), mmdet::Split::kTest);
    if (!binary_mode.empty()) ds = mmdet::derive_binary(ds, mmdet::parse_binary_mode(binary_mode));
    const auto images = open_stores(run, eval_images);
    const auto texts = open_stores(run, eval_texts);
    const auto features = mmdet::encode_features(ds, pointers(images), pointers(texts),
                                                 ck.config.mode, ck.config.classes);
    const auto report = mmdet::evaluate(ck.params, ck.config, features);
    write_text(run.out(out_path), mmdet::eval_report_json(report));
    if (!append_table.empty()) {
      const std::string v = variant.empty() ? std::string(mmdet::to_string(ck.config.mode)) : variant;
      mmdet::append_accuracy_row({training_name, v, eval_set, 100.0 * report.overall_accuracy},
                                 run.out(append_table));
    }
    run.write_manifest(manifest_beside(out_path));
    std::cout << "accuracy " << report.overall_accuracy << " on " << report.records << " records\n";
    return 0;
  });

  // ---- audit ----
  std::string table_csv, audit_csv_out;
  auto* audit = app.add_subcommand("audit", "Unimodal-bias audit: mean delta% and Cohen's d");
  audit->add_option("--table", table_csv, "Accuracy table CSV (training_dataset,variant,eval_set,accuracy)")
      ->required();
  audit->add_option("--out", out_path, "Audit JSON")->required();
  audit->add_option("--csv", audit_csv_out, "Also write the audit rows as CSV");
  leaf(audit, [&] {
    const auto table = mmdet::read_accuracy_table(run.in(table_csv));
    const auto report = mmdet::audit(table);
    write_text(run.out(out_path), mmdet::audit_json(report));
    if (!audit_csv_out.empty()) write_text(run.out(audit_csv_out), mmdet::audit_csv(report));
    run.write_manifest(manifest_beside(out_path));
    return 0;
  });

  run.app = &app;
  run.started = iso_now();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return action ? action() : 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
