# Copyright 2026 The mmdet Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import mmdet

VERITE_TOKEN = [47.7, 47.7, 48.7, 49.0, 49.6, 50.0, 50.8, 52.1]
VERITE_TEXT = [33.1, 33.6, 37.3, 40.6, 39.5, 41.7, 41.8, 43.7]


def test_delta_pct_and_cohens_d():
    assert mmdet.delta_pct(72.4, 46.5) == pytest.approx(55.70, abs=0.005)
    d = mmdet.cohens_d(VERITE_TEXT, VERITE_TOKEN)
    assert d == pytest.approx(-3.56, abs=0.01)


def test_audit_reproduces_verite_row():
    rows = [(f"train{i}", "D(I,C)", "VERITE", a) for i, a in enumerate(VERITE_TOKEN)]
    rows += [(f"train{i}", "D-(C)", "VERITE", a) for i, a in enumerate(VERITE_TEXT)]
    report = mmdet.audit(rows)
    (row,) = report["rows"]
    assert row["mean_delta_pct"] == pytest.approx(27.94, abs=0.02)
    assert row["cohens_d"] == pytest.approx(-3.56, abs=0.01)


def test_audit_missing_cell_is_coverage_error():
    rows = [("a", "D(I,C)", "E", 50.0), ("b", "D(I,C)", "E", 51.0), ("a", "D-(C)", "E", 40.0)]
    with pytest.raises(mmdet.CoverageError):
        mmdet.audit(rows)


def test_store_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((5, 7)).astype(np.float32)
    store = mmdet.store_from_array("image", [f"x{i}" for i in range(5)], data)
    assert len(store) == 5 and store.dim == 7 and store.modality == "image"
    path = tmp_path / "s.embs"
    mmdet.save_store(store, path)
    back = mmdet.open_store(path)
    assert back == store
    np.testing.assert_array_equal(back.array(), data)
    assert mmdet.decode_store(mmdet.encode_store(store)) == store
    assert mmdet.validate_store(back, 7)["clean"]
    assert not mmdet.validate_store(back, 8)["clean"]


def test_corrupt_store_rejected():
    with pytest.raises(mmdet.FormatError):
        mmdet.decode_store(b"NOPE" + bytes(32))


def test_misalign_matches_bruteforce_and_is_worker_independent():
    c = mmdet.generate_corpus(dim=8, n_pairs=120, seed=3)
    args = (c["pairs"], c["images"], c["texts"], c["pool"])
    fast = mmdet.misalign(*args, seed=1)
    assert fast == mmdet.misalign_bruteforce(*args, seed=1)
    assert fast == mmdet.misalign(*args, seed=1, workers=3)
    assert {a["branch"] for a in fast} <= {"text_text", "image_text"}


def test_balanced_benchmark_passes_validation():
    b = mmdet.generate_balanced_benchmark(dim=8, n_trios=30)
    report = mmdet.validate_modality_balance(b["records"])
    assert report["ok"]
    assert report["class_counts"] == {"True": 30, "MC": 30, "OOC": 30}


def test_train_and_evaluate_text_bias():
    c = mmdet.generate_corpus(dim=8, n_pairs=400, signal="text_bias", seed=0)
    records = c["labeled"]
    ckpt, report = mmdet.train(records, records, [c["images"]], [c["texts"], c["pool"]],
                               mode="text_only", lr=1e-3, batch_size=64, epochs=5, patience=5)
    assert isinstance(ckpt, bytes) and ckpt[:4] == b"DPAR"
    assert 1 <= report["best_epoch"] <= 5
    ev = mmdet.evaluate(ckpt, records, [c["images"]], [c["texts"], c["pool"]])
    assert ev["records"] == len(records)
    assert math.isclose(ev["overall_accuracy"], report["best_val_accuracy"], abs_tol=1e-12)
