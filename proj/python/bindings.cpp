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

// Python bindings for the main operations. Datasets cross the boundary as
// lists of (image_id, caption_id, label) tuples; reports as JSON text that
// the package wrapper decodes.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mmdet/benchmark.hpp"
#include "mmdet/chasma.hpp"
#include "mmdet/checkpoint.hpp"
#include "mmdet/embstore.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/features.hpp"
#include "mmdet/metrics.hpp"
#include "mmdet/synthkit.hpp"
#include "mmdet/trainer.hpp"

namespace py = pybind11;
using namespace mmdet;

namespace {

using RecordTuple = std::tuple<std::string, std::string, std::string>;

Dataset to_dataset(const std::vector<RecordTuple>& rows, Split split) {
  Dataset ds;
  ds.split = split;
  for (const auto& [image, caption, label] : rows) {
    const auto l = parse_label(label);
    if (!l) throw ArgumentError("unknown label '" + label + "'");
    ds.records.push_back({image, caption, *l, "python", std::nullopt});
  }
  return ds;
}

std::vector<RecordTuple> from_dataset(const Dataset& ds) {
  std::vector<RecordTuple> out;
  for (const auto& r : ds.records) out.emplace_back(r.image_id, r.caption_id, std::string(to_string(r.label)));
  return out;
}

std::vector<TruthfulPair> to_pairs(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::vector<TruthfulPair> out;
  for (const auto& [i, c] : rows) out.push_back({i, c});
  return out;
}

std::vector<std::pair<std::string, std::string>> from_pairs(const std::vector<TruthfulPair>& pairs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) out.emplace_back(p.image_id, p.caption_id);
  return out;
}

std::vector<const EmbeddingStore*> pointers(const std::vector<const EmbeddingStore*>& v) { return v; }

EmbeddingStore store_from_array(const std::string& modality, std::vector<std::string> ids,
                                py::array_t<float, py::array::c_style | py::array::forcecast> data) {
  if (data.ndim() != 2) throw ArgumentError("embeddings must be a 2-D array");
  if (static_cast<std::size_t>(data.shape(0)) != ids.size()) {
    throw ArgumentError("row count does not match the number of ids");
  }
  const auto dim = static_cast<std::uint32_t>(data.shape(1));
  std::vector<StoreRecord> recs(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    recs[i].id = ids[i];
    recs[i].vector.assign(data.data(static_cast<py::ssize_t>(i), 0),
                          data.data(static_cast<py::ssize_t>(i), 0) + dim);
  }
  return EmbeddingStore::from_records(recs, dim, parse_modality(modality));
}

py::array_t<float> store_array(const EmbeddingStore& s) {
  py::array_t<float> out({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(s.dim())});
  std::copy(s.data().begin(), s.data().end(), out.mutable_data());
  return out;
}

py::dict validation_dict(const StoreValidationReport& r) {
  py::dict d;
  d["clean"] = r.clean();
  d["nan_count"] = r.nan_count;
  d["duplicate_ids"] = r.duplicate_ids;
  d["dim_mismatch"] = r.dim_mismatch;
  d["zero_vector_ids"] = r.zero_vector_ids;
  return d;
}

py::list assignments_list(const std::vector<MisalignmentAssignment>& as) {
  py::list out;
  for (const auto& a : as) {
    py::dict d;
    d["image_id"] = a.image_id;
    d["true_caption_id"] = a.true_caption_id;
    d["false_caption_id"] = a.false_caption_id;
    d["branch"] = std::string(to_string(a.branch));
    d["p"] = a.p;
    d["similarity"] = a.similarity;
    out.append(d);
  }
  return out;
}

SynthConfig synth_config(int dim, std::size_t n, const std::string& signal, double strength,
                         std::uint64_t seed, const std::string& stream, double ooc_fraction) {
  SynthConfig c;
  c.dim = dim;
  c.n_pairs = n;
  c.signal_mode = parse_signal_mode(signal);
  c.signal_strength = strength;
  c.seed = seed;
  c.sample_stream = stream;
  c.ooc_fraction = ooc_fraction;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mmdet native core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CorruptionError>(m, "CorruptionError", PyExc_ValueError);
  py::register_exception<CoverageError>(m, "CoverageError", PyExc_ValueError);
  py::register_exception<BalanceError>(m, "BalanceError", PyExc_ValueError);
  py::register_exception<UndefinedError>(m, "UndefinedError", PyExc_ValueError);

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def_property_readonly("modality", [](const EmbeddingStore& s) { return std::string(to_string(s.modality())); })
      .def_property_readonly("dim", &EmbeddingStore::dim)
      .def_property_readonly("ids", &EmbeddingStore::ids)
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__", &EmbeddingStore::contains)
      .def("vector", [](const EmbeddingStore& s, const std::string& id) {
        const auto v = s.vector(id);
        return std::vector<float>(v.begin(), v.end());
      })
      .def("array", &store_array, "All vectors as an (n, dim) float32 array")
      .def("__eq__", [](const EmbeddingStore& a, const EmbeddingStore& b) { return a == b; });

  m.def("store_from_array", &store_from_array, py::arg("modality"), py::arg("ids"), py::arg("data"));
  m.def("open_store", &open_store, py::arg("path"));
  m.def("save_store", &save_store, py::arg("store"), py::arg("path"));
  m.def("encode_store", [](const EmbeddingStore& s) { return py::bytes(encode_store(s)); });
  m.def("decode_store", [](const py::bytes& b) { return decode_store(std::string(b)); });
  m.def("validate_store",
        [](const EmbeddingStore& s, std::optional<std::uint32_t> dim) { return validation_dict(validate_store(s, dim)); },
        py::arg("store"), py::arg("expected_dim") = py::none());

  m.def("misalign",
        [](const std::vector<std::pair<std::string, std::string>>& pairs, const EmbeddingStore& images,
           const EmbeddingStore& texts, const EmbeddingStore& pool, std::uint64_t seed, double threshold,
           unsigned workers) {
          const auto p = to_pairs(pairs);
          const auto cp = CaptionPool::from_store(pool);
          std::vector<MisalignmentAssignment> out;
          {
            py::gil_scoped_release release;
            out = misalign(p, images, texts, cp, {.seed = seed, .threshold = threshold, .workers = workers});
          }
          return assignments_list(out);
        },
        py::arg("pairs"), py::arg("images"), py::arg("texts"), py::arg("pool"), py::arg("seed") = 0,
        py::arg("threshold") = 0.5, py::arg("workers") = 1);
  m.def("misalign_bruteforce",
        [](const std::vector<std::pair<std::string, std::string>>& pairs, const EmbeddingStore& images,
           const EmbeddingStore& texts, const EmbeddingStore& pool, std::uint64_t seed, double threshold) {
          return assignments_list(misalign_bruteforce(to_pairs(pairs), images, texts,
                                                      CaptionPool::from_store(pool), seed, threshold));
        },
        py::arg("pairs"), py::arg("images"), py::arg("texts"), py::arg("pool"), py::arg("seed") = 0,
        py::arg("threshold") = 0.5);

  m.def("read_dataset_csv",
        [](const std::filesystem::path& p) { return from_dataset(read_dataset_csv(p, Split::kTrain)); });
  m.def("write_dataset_csv", [](const std::vector<RecordTuple>& rows, const std::filesystem::path& p) {
    write_dataset_csv(to_dataset(rows, Split::kTrain), p);
  });
  m.def("downsample_balance", [](const std::vector<RecordTuple>& rows, std::uint64_t seed) {
    return from_dataset(downsample_balance(to_dataset(rows, Split::kTrain), seed));
  }, py::arg("records"), py::arg("seed") = 0);
  m.def("validate_modality_balance", [](const std::vector<RecordTuple>& rows) {
    return balance_report_json(validate_modality_balance(to_dataset(rows, Split::kTest)));
  });

  m.def("generate_corpus",
        [](int dim, std::size_t n, const std::string& signal, double strength, std::uint64_t seed,
           const std::string& stream) {
          const auto c = generate_corpus(synth_config(dim, n, signal, strength, seed, stream, 1.0));
          py::dict d;
          d["images"] = c.images;
          d["texts"] = c.texts;
          d["pool"] = c.pool;
          d["pairs"] = from_pairs(c.pairs);
          d["labeled"] = from_dataset(c.labeled);
          return d;
        },
        py::arg("dim") = 32, py::arg("n_pairs") = 1000, py::arg("signal") = "crossmodal_only",
        py::arg("strength") = 1.0, py::arg("seed") = 0, py::arg("stream") = "corpus");
  m.def("generate_balanced_benchmark",
        [](int dim, std::size_t n, const std::string& signal, double strength, std::uint64_t seed,
           const std::string& stream, double ooc_fraction) {
          const auto b = generate_balanced_benchmark(synth_config(dim, n, signal, strength, seed, stream, ooc_fraction));
          py::dict d;
          d["images"] = b.images;
          d["texts"] = b.texts;
          d["records"] = from_dataset(expand_trios(b.trios));
          return d;
        },
        py::arg("dim") = 32, py::arg("n_trios") = 338, py::arg("signal") = "crossmodal_only",
        py::arg("strength") = 1.0, py::arg("seed") = 0, py::arg("stream") = "bench",
        py::arg("ooc_fraction") = 1.0);

  m.def("train",
        [](const std::vector<RecordTuple>& train_rows, const std::vector<RecordTuple>& val_rows,
           const std::vector<const EmbeddingStore*>& images, const std::vector<const EmbeddingStore*>& texts,
           const std::string& mode, int classes, int layers, int heads, int ff, double dropout, double lr,
           std::size_t batch_size, int epochs, int patience, std::uint64_t seed) {
          DetectorConfig d;
          d.mode = parse_detector_mode(canonical_variant(mode));
          d.classes = classes;
          d.layers = layers;
          d.heads = heads;
          d.ff = ff;
          d.dropout = dropout;
          const EmbeddingStore* first = !images.empty() ? images.front() : (!texts.empty() ? texts.front() : nullptr);
          if (first == nullptr) throw ArgumentError("no embedding stores given");
          d.dim = static_cast<int>(first->dim());
          TrainConfig t;
          t.learning_rate = lr;
          t.batch_size = batch_size;
          t.max_epochs = epochs;
          t.patience = patience;
          t.seed = seed;
          const auto ip = pointers(images), tp = pointers(texts);
          const auto tr = encode_features(to_dataset(train_rows, Split::kTrain), ip, tp, d.mode, classes);
          const auto va = encode_features(to_dataset(val_rows, Split::kValidation), ip, tp, d.mode, classes);
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train(tr, va, d, t);
          }
          return std::make_pair(py::bytes(encode_checkpoint(d, r.params)), train_report_json(r.report, false));
        },
        py::arg("train"), py::arg("val"), py::arg("images"), py::arg("texts"),
        py::arg("mode") = "multimodal_token", py::arg("classes") = 1, py::arg("layers") = 1,
        py::arg("heads") = 2, py::arg("ff") = 128, py::arg("dropout") = 0.1, py::arg("lr") = 5e-5,
        py::arg("batch_size") = 512, py::arg("epochs") = 30, py::arg("patience") = 10, py::arg("seed") = 0);
  m.def("evaluate",
        [](const py::bytes& checkpoint, const std::vector<RecordTuple>& rows,
           const std::vector<const EmbeddingStore*>& images, const std::vector<const EmbeddingStore*>& texts) {
          const auto ck = decode_checkpoint(std::string(checkpoint));
          const auto f = encode_features(to_dataset(rows, Split::kTest), pointers(images), pointers(texts),
                                         ck.config.mode, ck.config.classes);
          return eval_report_json(evaluate(ck.params, ck.config, f));
        },
        py::arg("checkpoint"), py::arg("records"), py::arg("images"), py::arg("texts"));

  m.def("delta_pct", &delta_pct, py::arg("multimodal_acc"), py::arg("unimodal_acc"));
  m.def("cohens_d",
        [](const std::vector<double>& uni, const std::vector<double>& multi) { return cohens_d(uni, multi); },
        py::arg("unimodal_accs"), py::arg("multimodal_accs"));
  m.def("audit",
        [](const std::vector<std::tuple<std::string, std::string, std::string, double>>& rows) {
          std::vector<AccuracyRow> table;
          for (const auto& [t, v, e, a] : rows) table.push_back({t, v, e, a});
          return audit_json(audit(table));
        },
        py::arg("rows"), "Rows are (training_dataset, variant, eval_set, accuracy)");
}
