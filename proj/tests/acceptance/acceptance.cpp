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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and budgets
// are constants below; nothing is read from the environment.
//
// Usage: mmdet_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "detector_oracle.hpp"
#include "mmdet/benchmark.hpp"
#include "mmdet/chasma.hpp"
#include "mmdet/checkpoint.hpp"
#include "mmdet/embstore.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/features.hpp"
#include "mmdet/metrics.hpp"
#include "mmdet/rng.hpp"
#include "mmdet/synthkit.hpp"
#include "mmdet/trainer.hpp"
#include "reference_tables.hpp"

#ifndef MMDET_CLI_PATH
#error "MMDET_CLI_PATH must point at the mmdet executable"
#endif

namespace fs = std::filesystem;
using namespace mmdet;

namespace {

// ---- pinned tolerances and budgets ----
constexpr double kAuditDeltaTol = 0.02;      // mean delta%, absolute
constexpr double kAuditDTol = 0.01;          // Cohen's d, absolute
constexpr double kCellDeltaTol = 0.05;       // per-cell delta%, absolute
constexpr double kMetricBudget = 1.0;        // seconds
constexpr double kOracleBudget = 60.0;
constexpr double kImageOnlyOptimum = 0.50;   // exact bound
constexpr double kTrainedSlack = 0.52;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradFloor = 1e-6;          // denominator floor for relative error
constexpr double kGradBudget = 120.0;
constexpr double kTextBiasGap = 2.0;         // points
constexpr double kCrossmodalMargin = 25.0;   // points
constexpr double kBiasBudget = 15.0 * 60.0;
constexpr std::size_t kFuzzCases = 1000;
constexpr double kThroughputBudget = 5.0 * 60.0;
constexpr double kSpeedupTarget = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    Rng rng(static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = fs::temp_directory_path() / ("mmdet-acceptance-" + tag + "-" + std::to_string(rng.next() % 1000000007));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

EmbeddingStore gaussian_store(Modality m, std::uint32_t dim, std::size_t n, const std::string& prefix,
                              std::uint64_t seed) {
  Rng rng(seed, prefix);
  std::vector<std::string> ids(n);
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) ids[i] = prefix + std::to_string(i);
  for (auto& x : data) x = static_cast<float>(rng.normal());
  return EmbeddingStore::adopt(m, dim, std::move(ids), std::move(data));
}

std::vector<TruthfulPair> identity_pairs(std::size_t n) {
  std::vector<TruthfulPair> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {"i" + std::to_string(i), "c" + std::to_string(i)};
  return out;
}

bool same_assignment(const MisalignmentAssignment& a, const MisalignmentAssignment& b) {
  return a.image_id == b.image_id && a.true_caption_id == b.true_caption_id &&
         a.false_caption_id == b.false_caption_id && a.branch == b.branch && a.p == b.p &&
         a.similarity == b.similarity;
}

// ---- 1: metric reproduction ----

const BiasRow& find_row(const BiasAuditReport& r, const std::string& eval_set,
                        const std::string& mm, const std::string& uni) {
  for (const auto& row : r.rows) {
    if (row.eval_set == eval_set && row.multimodal_variant == mm && row.unimodal_variant == uni) return row;
  }
  throw LookupError("audit row missing: " + eval_set + "/" + mm + "/" + uni);
}

Outcome metric_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> bad;

  const auto verite = audit(reference::verite_table());
  const auto& v = find_row(verite, "VERITE", "multimodal_token", "text_only");
  if (std::abs(v.mean_delta_pct - 27.94) > kAuditDeltaTol) bad.push_back("VERITE delta% " + fmt(v.mean_delta_pct));
  if (!v.cohens_d || std::abs(*v.cohens_d - -3.56) > kAuditDTol) {
    bad.push_back("VERITE d " + (v.cohens_d ? fmt(*v.cohens_d) : std::string("undefined")));
  }

  const auto tests = audit(reference::test_set_table());
  const auto& t = find_row(tests, "test", "multimodal_token", "text_only");
  if (t.delta_pcts.size() != 9 || std::abs(t.mean_delta_pct - 25.33) > kAuditDeltaTol) {
    bad.push_back("test-set delta% " + fmt(t.mean_delta_pct));
  }

  // Binary VERITE cells: one eval set per split, one training dataset per row.
  std::vector<AccuracyRow> table;
  for (const auto& c : reference::kVeriteBinary) {
    const std::string es = "VERITE " + c.split;
    table.push_back({c.training, "D(I,C)", es, c.token_acc});
    table.push_back({c.training, "D-(I;C)", es, c.dim_acc});
    table.push_back({c.training, "D-(C)", es, c.text_only});
  }
  const auto binary = audit(table);
  std::size_t cells = 0, cells_ok = 0;
  for (const auto& c : reference::kVeriteBinary) {
    const std::string es = "VERITE " + c.split;
    for (const auto& [variant, expected] :
         {std::pair<std::string, double>{"multimodal_token", c.token_delta}, {"multimodal_dim", c.dim_delta}}) {
      const auto& row = find_row(binary, es, variant, "text_only");
      const auto it = std::find(row.training_datasets.begin(), row.training_datasets.end(), c.training);
      const double got = row.delta_pcts[static_cast<std::size_t>(it - row.training_datasets.begin())];
      ++cells;
      if (std::abs(got - expected) <= kCellDeltaTol) {
        ++cells_ok;
      } else {
        bad.push_back(c.training + " / " + c.split + " / " + variant + ": got " + fmt(got, 2) +
                      ", reference " + fmt(expected, 2));
      }
    }
  }

  const double secs = seconds_since(t0);
  if (secs >= kMetricBudget) bad.push_back("runtime " + fmt(secs, 3) + " s");
  std::string detail = "VERITE delta% " + fmt(v.mean_delta_pct, 3) + " d " + fmt(*v.cohens_d, 3) +
                       "; test-set delta% " + fmt(t.mean_delta_pct, 3) + "; binary cells " +
                       std::to_string(cells_ok) + "/" + std::to_string(cells) + " within " +
                       fmt(kCellDeltaTol, 2) + "; " + fmt(secs, 3) + " s";
  for (const auto& b : bad) detail += "\n      mismatch: " + b;
  return {bad.empty(), detail};
}

// ---- 2: exact misalignment vs brute force ----

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint32_t dims[] = {2, 16, 768};
  const std::size_t pools[] = {1, 10, 10000};
  const std::size_t pair_counts[] = {1, 200, 2000};
  ScratchDir scratch("oracle");
  std::size_t instances = 0, mismatched = 0, nondeterministic = 0;
  std::set<std::uint32_t> seen_dims;
  std::set<std::size_t> seen_pools, seen_pairs;
  for (std::size_t i = 0; i < 21; ++i) {
    const auto dim = dims[i % 3];
    const auto pool_n = pools[(i / 3) % 3];
    const auto n = pair_counts[(i / 9) % 3];
    seen_dims.insert(dim);
    seen_pools.insert(pool_n);
    seen_pairs.insert(n);
    const auto images = gaussian_store(Modality::kImage, dim, n, "i", i);
    const auto texts = gaussian_store(Modality::kText, dim, n, "c", i);
    const auto pool = CaptionPool::from_store(gaussian_store(Modality::kText, dim, pool_n, "p", i));
    const auto pairs = identity_pairs(n);
    const auto fast = misalign(pairs, images, texts, pool, {.seed = i, .threshold = 0.5, .workers = 1});
    const auto slow = misalign_bruteforce(pairs, images, texts, pool, i, 0.5);
    bool same = fast.size() == slow.size();
    for (std::size_t k = 0; same && k < fast.size(); ++k) same = same_assignment(fast[k], slow[k]);
    mismatched += !same;

    write_assignments_csv(fast, scratch.path() / "w1.csv");
    const auto ref = slurp(scratch.path() / "w1.csv");
    for (unsigned w : {2u, 8u}) {
      const auto par = misalign(pairs, images, texts, pool, {.seed = i, .threshold = 0.5, .workers = w});
      write_assignments_csv(par, scratch.path() / "wn.csv");
      nondeterministic += slurp(scratch.path() / "wn.csv") != ref;
    }
    ++instances;
  }
  const double secs = seconds_since(t0);
  const bool coverage = seen_dims.size() == 3 && seen_pools.size() == 3 && seen_pairs.size() == 3;
  const bool pass = instances >= 20 && coverage && mismatched == 0 && nondeterministic == 0 &&
                    secs < kOracleBudget;
  return {pass, std::to_string(instances) + " instances, " + std::to_string(mismatched) +
                    " differ from brute force, " + std::to_string(nondeterministic) +
                    " worker runs not byte-identical (workers 1/2/8); " + fmt(secs, 1) + " s (budget " +
                    fmt(kOracleBudget, 0) + " s)"};
}

// ---- 3: modality-balance bound ----

// Exact optimum over deterministic one-modality labelings: records sharing
// the modality item must share the prediction, so the best labeling takes
// the majority label within each item independently.
double exact_unimodal_optimum(const Dataset& ds, bool by_image, Label positive) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& r : ds.records) {
    auto& c = counts[by_image ? r.image_id : r.caption_id];
    (r.label == positive ? c.first : c.second) += 1;
  }
  std::size_t best = 0;
  for (const auto& [id, c] : counts) best += std::max(c.first, c.second);
  return double(best) / double(ds.size());
}

Dataset only(const Dataset& ds, Label a, Label b) {
  Dataset out;
  out.split = ds.split;
  for (const auto& r : ds.records) {
    if (r.label == a || r.label == b) out.records.push_back(r);
  }
  return out;
}

double train_and_score(const Dataset& ds, const SynthBenchmark& b, DetectorMode mode) {
  const EmbeddingStore* im[] = {&b.images};
  const EmbeddingStore* tx[] = {&b.texts};
  const auto f = encode_features(ds, im, tx, mode, 1);
  DetectorConfig d;
  d.mode = mode;
  d.dim = static_cast<int>(b.images.dim());
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.batch_size = 64;
  const auto r = train(f, f, d, t);
  return accuracy(r.params, d, f);
}

Outcome balance_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;
  double worst_exact_img = 0.0, worst_exact_cap = 0.0;
  std::size_t trios = 0;
  for (auto mode : {SignalMode::kCrossmodalOnly, SignalMode::kTextBias, SignalMode::kImageBias,
                    SignalMode::kNoise}) {
    SynthConfig c;
    c.dim = 32;
    c.n_pairs = 338;
    c.signal_mode = mode;
    c.sample_stream = "bench";
    const auto b = generate_balanced_benchmark(c);
    trios = b.trios.size();
    const auto ds = expand_trios(b.trios);
    worst_exact_img = std::max(worst_exact_img, exact_unimodal_optimum(only(ds, Label::kTrue, Label::kMC), true, Label::kTrue));
    worst_exact_cap = std::max(worst_exact_cap, exact_unimodal_optimum(only(ds, Label::kTrue, Label::kOOC), false, Label::kTrue));
  }
  pass = pass && trios >= 300 && worst_exact_img <= kImageOnlyOptimum && worst_exact_cap <= kImageOnlyOptimum;

  // Trained detectors on the set whose bias favours them most.
  SynthConfig ci;
  ci.dim = 32;
  ci.n_pairs = 338;
  ci.signal_mode = SignalMode::kImageBias;
  ci.sample_stream = "bench";
  const auto bi = generate_balanced_benchmark(ci);
  const double img_acc = train_and_score(only(expand_trios(bi.trios), Label::kTrue, Label::kMC), bi,
                                         DetectorMode::kImageOnly);
  SynthConfig ct = ci;
  ct.signal_mode = SignalMode::kTextBias;
  const auto bt = generate_balanced_benchmark(ct);
  const double txt_acc = train_and_score(only(expand_trios(bt.trios), Label::kTrue, Label::kOOC), bt,
                                         DetectorMode::kTextOnly);
  pass = pass && img_acc <= kTrainedSlack && txt_acc <= kTrainedSlack;
  detail = std::to_string(trios) + " trios x 4 signal modes; exact image-only optimum on True+MC " +
           fmt(worst_exact_img) + ", exact caption-only optimum on True+OOC " + fmt(worst_exact_cap) +
           " (bound " + fmt(kImageOnlyOptimum, 2) + "); trained image_only " + fmt(img_acc) +
           ", trained text_only " + fmt(txt_acc) + " (bound " + fmt(kTrainedSlack, 2) + "); " +
           fmt(seconds_since(t0), 1) + " s";
  return {pass, detail};
}

// ---- 4: gradient correctness ----

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kDim = 8;
  constexpr std::size_t kBatch = 1;  // batch-mixing paths are covered by the unit suite at batch 3
  std::size_t configs = 0, scalars = 0;
  double worst = 0.0;
  std::string worst_where;
  Rng rng(0, "gradcheck");
  for (auto mode : {DetectorMode::kMultimodalToken, DetectorMode::kMultimodalDim, DetectorMode::kTextOnly,
                    DetectorMode::kImageOnly}) {
    for (int classes : {1, 3}) {
      for (int layers : {1, 4}) {
        for (int ff : {128, 1024}) {
          for (int heads : {2, 8}) {
            DetectorConfig c;
            c.mode = mode;
            c.classes = classes;
            c.layers = layers;
            c.ff = ff;
            c.heads = heads;
            c.dim = kDim;
            const auto params = init_params(c, configs);
            Batch b;
            if (uses_images(mode)) b.images = Matrix(kBatch, kDim);
            if (uses_texts(mode)) b.texts = Matrix(kBatch, kDim);
            for (auto* m : {&b.images, &b.texts}) {
              for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
            }
            for (std::size_t i = 0; i < kBatch; ++i) b.labels.push_back(static_cast<int>(rng.below(classes == 1 ? 2 : 3)));
            const auto g = oracle::SuffixChecker(params, c, b, 100 + configs).run(kGradStep, kGradFloor);
            scalars += g.checked;
            ++configs;
            if (g.worst > worst) {
              worst = g.worst;
              worst_where = std::string(to_string(mode)) + " n=" + std::to_string(classes) + " L=" +
                            std::to_string(layers) + " f=" + std::to_string(ff) + " h=" +
                            std::to_string(heads) + " " + g.worst_name;
            }
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= kGradRelTol && secs < kGradBudget;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", worst);
  return {pass, std::to_string(configs) + " configs, " + std::to_string(scalars) +
                    " scalars, worst relative error " + buf + " at " + worst_where + " (tol 1e-4); " +
                    fmt(secs, 1) + " s (budget " + fmt(kGradBudget, 0) + " s)"};
}

// ---- 5: bias phenomenon ----

std::map<DetectorMode, double> held_out_accuracy(SignalMode signal, std::vector<DetectorMode> modes) {
  SynthConfig c;
  c.dim = 32;
  c.n_pairs = 20000;
  c.signal_mode = signal;
  c.signal_strength = 1.0;
  const auto corpus = generate_corpus(c);
  const auto pool = CaptionPool::from_store(corpus.pool);
  const auto as = misalign(corpus.pairs, corpus.images, corpus.texts, pool, {});
  const auto ds = build_mc_dataset(corpus.pairs, as);
  const auto [tr, va] = split_train_val(ds, 0.10, 0);
  SynthConfig h = c;
  h.sample_stream = "heldout";
  h.n_pairs = 2000;
  const auto held = generate_corpus(h);
  std::map<DetectorMode, double> out;
  for (auto mode : modes) {
    const EmbeddingStore* is[] = {&corpus.images};
    const EmbeddingStore* ts[] = {&corpus.texts, &corpus.pool};
    const EmbeddingStore* his[] = {&held.images};
    const EmbeddingStore* hts[] = {&held.texts, &held.pool};
    DetectorConfig d;
    d.mode = mode;
    d.dim = 32;
    const auto r = train(encode_features(tr, is, ts, mode, 1), encode_features(va, is, ts, mode, 1), d,
                         TrainConfig{});
    out[mode] = 100.0 * accuracy(r.params, d, encode_features(held.labeled, his, hts, mode, 1));
  }
  return out;
}

Outcome bias_phenomenon() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto tb = held_out_accuracy(SignalMode::kTextBias,
                                    {DetectorMode::kMultimodalToken, DetectorMode::kTextOnly});
  const auto cm = held_out_accuracy(SignalMode::kCrossmodalOnly,
                                    {DetectorMode::kMultimodalToken, DetectorMode::kTextOnly,
                                     DetectorMode::kImageOnly});
  const double gap = std::abs(tb.at(DetectorMode::kTextOnly) - tb.at(DetectorMode::kMultimodalToken));
  const double margin = cm.at(DetectorMode::kMultimodalToken) -
                        std::max(cm.at(DetectorMode::kTextOnly), cm.at(DetectorMode::kImageOnly));
  const double secs = seconds_since(t0);
  const bool pass = gap <= kTextBiasGap && margin >= kCrossmodalMargin && secs < kBiasBudget;
  return {pass, "text_bias: token " + fmt(tb.at(DetectorMode::kMultimodalToken), 2) + " text_only " +
                    fmt(tb.at(DetectorMode::kTextOnly), 2) + " (gap " + fmt(gap, 2) + " <= " +
                    fmt(kTextBiasGap, 1) + "); crossmodal_only: token " +
                    fmt(cm.at(DetectorMode::kMultimodalToken), 2) + " text_only " +
                    fmt(cm.at(DetectorMode::kTextOnly), 2) + " image_only " +
                    fmt(cm.at(DetectorMode::kImageOnly), 2) + " (margin " + fmt(margin, 2) + " >= " +
                    fmt(kCrossmodalMargin, 1) + "); " + fmt(secs, 1) + " s"};
}

// ---- 6: pipeline balance properties ----

Outcome pipeline_balance() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kCases = 100;
  std::size_t mc_ok = 0, dedup_ok = 0, agg_ok = 0;
  for (std::size_t k = 0; k < kCases; ++k) {
    Rng rng(k, "pipeline");
    const std::size_t n = 1 + rng.below(150);
    const std::size_t pool_n = 1 + rng.below(40);  // small pools force repeated false captions
    const std::uint32_t dim = static_cast<std::uint32_t>(2 + rng.below(12));
    const auto images = gaussian_store(Modality::kImage, dim, n, "i", k);
    const auto texts = gaussian_store(Modality::kText, dim, n, "c", k);
    const auto pool = CaptionPool::from_store(gaussian_store(Modality::kText, dim, pool_n, "p", k));
    const auto pairs = identity_pairs(n);
    const auto as = misalign(pairs, images, texts, pool, {.seed = k});
    auto mc = build_mc_dataset(pairs, as);
    auto cc = mc.class_counts();
    mc_ok += cc[Label::kTrue] == n && cc[Label::kMC] == n && cc[Label::kOOC] == 0;

    const auto balanced = downsample_balance(deduplicate_false_captions(mc), k);
    cc = balanced.class_counts();
    dedup_ok += cc[Label::kTrue] == cc[Label::kMC] && cc[Label::kMC] > 0 && cc[Label::kOOC] == 0;

    // OOC-only source: truthful pairs plus shuffled-image pairs.
    Dataset ooc;
    const std::size_t m = 2 + rng.below(100);
    for (std::size_t i = 0; i < m; ++i) {
      const auto s = std::to_string(i);
      ooc.records.push_back({"oi" + s, "oc" + s, Label::kTrue, "ooc-source", std::nullopt});
      if (rng.below(4) != 0) {
        ooc.records.push_back({"oi" + std::to_string((i + 1) % m), "oc" + s, Label::kOOC, "ooc-source", std::nullopt});
      }
    }
    const Dataset parts[] = {ooc, mc};
    const auto agg = aggregate(parts, k, AggregateKind::kMulticlass);
    cc = agg.class_counts();
    agg_ok += cc[Label::kTrue] == cc[Label::kMC] && cc[Label::kMC] == cc[Label::kOOC] && cc[Label::kOOC] > 0;
  }
  const bool pass = mc_ok == kCases && dedup_ok == kCases && agg_ok == kCases;
  return {pass, std::to_string(kCases) + " random pipelines: |True| = |MC| " + std::to_string(mc_ok) + "/" +
                    std::to_string(kCases) + ", dedup+downsample equal " + std::to_string(dedup_ok) + "/" +
                    std::to_string(kCases) + ", {OOC, MC} aggregate three-way equal " +
                    std::to_string(agg_ok) + "/" + std::to_string(kCases) + "; " +
                    fmt(seconds_since(t0), 2) + " s"};
}

// ---- 7: CLI determinism ----

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(MMDET_CLI_PATH) + "' " + args +
                          " >> '" + dir.string() + ".log' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool is_manifest(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "manifest.json" || name.ends_with(".manifest.json");
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && !is_manifest(e.path())) {
      out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
  }
  return out;
}

Outcome cli_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  ScratchDir scratch("cli");
  const std::vector<std::string> pipeline = {
      "synth corpus --out-dir corpus --dim 16 --pairs 400 --signal crossmodal_only",
      "chasma generate --pairs corpus/pairs.csv --images corpus/images.embs --texts corpus/texts.embs "
      "--pool corpus/pool.embs --out assignments.csv --dataset-out mc.csv",
      "chasma dedup --dataset mc.csv --assignments assignments.csv --out dedup.csv",
      "chasma balance --dataset dedup.csv --out balanced.csv",
      "synth bench --out-dir bench --dim 16 --trios 60 --signal crossmodal_only --ooc-fraction 0.9",
      "bench expand --trios bench/trios.csv --out expanded.csv",
      "bench validate --dataset expanded.csv --out balance.json",
      "bench binarize --dataset expanded.csv --mode true_vs_mc --out binary.csv",
      "train --train balanced.csv --images corpus/images.embs --texts corpus/texts.embs --texts corpus/pool.embs "
      "--epochs 4 --patience 2 --batch-size 64 --lr 1e-3 --out-dir run-token",
      "train --train balanced.csv --images corpus/images.embs --texts corpus/texts.embs --texts corpus/pool.embs "
      "--mode text_only --epochs 4 --patience 2 --batch-size 64 --lr 1e-3 --out-dir run-text",
      "grid --train balanced.csv --images corpus/images.embs --texts corpus/texts.embs --texts corpus/pool.embs "
      "--epochs 2 --patience 2 --batch-size 64 --grid-layers 1,2 --grid-ff 16 --grid-heads 2 --grid-lr 1e-3,5e-4 "
      "--out-dir grid",
      "evaluate --checkpoint run-token/best.dpar --dataset binary.csv --images bench/images.embs "
      "--texts bench/texts.embs --out eval-token.json --append-table table.csv --training-dataset synth "
      "--eval-set bench",
      "evaluate --checkpoint run-text/best.dpar --dataset binary.csv --images bench/images.embs "
      "--texts bench/texts.embs --out eval-text.json --append-table table.csv --training-dataset synth "
      "--eval-set bench",
      "audit --table table.csv --out audit.json --csv audit.csv",
  };
  std::vector<std::map<std::string, std::string>> trees;
  std::string failure;
  const std::pair<std::string, unsigned> runs[] = {{"a", 1}, {"b", 1}, {"c", 4}};
  for (const auto& [name, workers] : runs) {
    const auto dir = scratch.path() / name;
    fs::create_directories(dir);
    for (const auto& step : pipeline) {
      const int rc = run_cli(dir, "--seed 7 --workers " + std::to_string(workers) + " " + step);
      if (rc != 0 && failure.empty()) failure = "run " + name + " exit " + std::to_string(rc) + ": " + step;
    }
    trees.push_back(tree(dir));
  }
  std::size_t differing = 0;
  std::string first_diff;
  for (std::size_t k = 1; k < trees.size(); ++k) {
    std::set<std::string> names;
    for (const auto* t : {&trees[0], &trees[k]}) {
      for (const auto& [n, _] : *t) names.insert(n);
    }
    for (const auto& n : names) {
      const auto a = trees[0].find(n), b = trees[k].find(n);
      if (a == trees[0].end() || b == trees[k].end() || a->second != b->second) {
        ++differing;
        if (first_diff.empty()) first_diff = n;
      }
    }
  }
  const bool pass = failure.empty() && differing == 0 && trees[0].size() >= 20;
  std::string detail = std::to_string(pipeline.size()) + "-step pipeline, 3 runs (workers 1, 1, 4): " +
                       std::to_string(trees[0].size()) + " output files, " + std::to_string(differing) +
                       " differ; " + fmt(seconds_since(t0), 1) + " s";
  if (!failure.empty()) detail += "\n      " + failure;
  if (!first_diff.empty()) detail += "\n      first difference: " + first_diff;
  return {pass, detail};
}

// ---- 8: format roundtrip ----

float random_float_bits(Rng& rng) {
  const auto bits = static_cast<std::uint32_t>(rng.next());
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

float random_finite_float(Rng& rng) {
  for (;;) {
    const float f = random_float_bits(rng);
    if (std::isfinite(f)) return f;
  }
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

Outcome format_roundtrip() {
  const auto t0 = std::chrono::steady_clock::now();
  ScratchDir scratch("format");
  std::size_t store_ok = 0, ckpt_ok = 0;
  for (std::size_t k = 0; k < kFuzzCases; ++k) {
    Rng rng(k, "fuzz-store");
    const auto modality = rng.below(2) == 0 ? Modality::kImage : Modality::kText;
    const auto dim = static_cast<std::uint32_t>(1 + rng.below(48));
    const std::size_t n = rng.below(17);
    std::vector<StoreRecord> recs;
    std::set<std::string> ids;
    while (recs.size() < n) {
      std::string id;
      const std::size_t len = 1 + rng.below(64);
      for (std::size_t i = 0; i < len; ++i) id.push_back(static_cast<char>(1 + rng.below(255)));
      if (!ids.insert(id).second) continue;
      StoreRecord r{id, std::vector<float>(dim)};
      for (auto& x : r.vector) x = random_float_bits(rng);  // NaN payloads, infinities, subnormals
      recs.push_back(std::move(r));
    }
    const auto store = EmbeddingStore::from_records(recs, dim, modality);
    const auto bytes = encode_store(store);
    const auto back = decode_store(bytes);
    const auto file = scratch.path() / "s.embs";
    save_store(store, file);
    const auto from_file = open_store(file);
    bool ok = back.ids() == store.ids() && back.modality() == modality && back.dim() == dim &&
              bit_equal(back.data(), store.data()) && encode_store(back) == bytes &&
              slurp(file) == bytes && bit_equal(from_file.data(), store.data()) &&
              from_file.ids() == store.ids();
    for (std::size_t i = 0; ok && i < n; ++i) {
      ok = bit_equal(std::span<const float>(recs[i].vector),
                     back.data().subspan(i * dim, dim));
    }
    store_ok += ok;
  }
  for (std::size_t k = 0; k < kFuzzCases; ++k) {
    Rng rng(k, "fuzz-checkpoint");
    DetectorConfig c;
    c.mode = static_cast<DetectorMode>(rng.below(4));
    c.classes = rng.below(2) == 0 ? 1 : 3;
    c.layers = static_cast<int>(1 + rng.below(3));
    const int dims[] = {2, 4, 6, 8, 12};
    c.dim = dims[rng.below(5)];
    std::vector<int> divisors;
    for (int h = 1; h <= c.dim; ++h) {
      if (c.dim % h == 0) divisors.push_back(h);
    }
    c.heads = divisors[rng.below(divisors.size())];
    c.ff = static_cast<int>(1 + rng.below(16));
    c.dropout = static_cast<float>(rng.uniform() * 0.5);
    auto params = init_params(c, k);
    // Stored values are f32; start from f32-representable parameters.
    params.for_each([&](const std::string&, Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(random_finite_float(rng));
    });
    const auto bytes = encode_checkpoint(c, params);
    const auto back = decode_checkpoint(bytes);
    const auto file = scratch.path() / "c.dpar";
    save_checkpoint(c, params, file);
    const auto from_file = load_checkpoint(file);
    ckpt_ok += back.config == c && back.params == params && encode_checkpoint(back.config, back.params) == bytes &&
               from_file.params == params && from_file.config == c;
  }
  const bool pass = store_ok == kFuzzCases && ckpt_ok == kFuzzCases;
  return {pass, "stores " + std::to_string(store_ok) + "/" + std::to_string(kFuzzCases) + ", checkpoints " +
                    std::to_string(ckpt_ok) + "/" + std::to_string(kFuzzCases) +
                    " bit-exact (memory and file); " + fmt(seconds_since(t0), 1) + " s"};
}

// ---- 9: throughput ----

Outcome throughput() {
  constexpr std::size_t kPairs = 10000, kPool = 100000;
  constexpr std::uint32_t kDim = 768;
  const auto images = gaussian_store(Modality::kImage, kDim, kPairs, "i", 9);
  const auto texts = gaussian_store(Modality::kText, kDim, kPairs, "c", 9);
  const auto pool = CaptionPool::from_store(gaussian_store(Modality::kText, kDim, kPool, "p", 9));
  const auto pairs = identity_pairs(kPairs);
  auto t0 = std::chrono::steady_clock::now();
  const auto one = misalign(pairs, images, texts, pool, {.seed = 0, .workers = 1});
  const double t1 = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto four = misalign(pairs, images, texts, pool, {.seed = 0, .workers = 4});
  const double t4 = seconds_since(t0);
  bool same = one.size() == four.size();
  for (std::size_t i = 0; same && i < one.size(); ++i) same = same_assignment(one[i], four[i]);
  const double speedup = t1 / t4;
  const bool pass = t1 < kThroughputBudget && speedup >= kSpeedupTarget && same;
  return {pass, "10000 pairs x 100000 pool x 768: 1 worker " + fmt(t1, 1) + " s (budget " +
                    fmt(kThroughputBudget, 0) + " s), 4 workers " + fmt(t4, 1) + " s, speedup " +
                    fmt(speedup, 2) + "x (target " + fmt(kSpeedupTarget, 1) + "x), hardware threads " +
                    std::to_string(std::thread::hardware_concurrency()) + ", outputs " +
                    (same ? "identical" : "DIFFER")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "metric reproduction", metric_reproduction},
      {2, "exact misalignment matches brute force", oracle_equivalence},
      {3, "modality-balance bound", balance_bound},
      {4, "gradient correctness", gradient_correctness},
      {5, "bias phenomenon on synthetic corpora", bias_phenomenon},
      {6, "pipeline balance properties", pipeline_balance},
      {7, "CLI determinism", cli_determinism},
      {8, "format roundtrip", format_roundtrip},
      {9, "throughput", throughput},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
