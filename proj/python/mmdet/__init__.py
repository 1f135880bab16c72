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
"""Synthetic misalignment, modality-balanced benchmarks, detector training
and unimodal-bias audits, backed by a C++ core."""

import json

from . import _core
from ._core import (
    ArgumentError,
    BalanceError,
    CorruptionError,
    CoverageError,
    EmbeddingStore,
    Error,
    FormatError,
    LookupError,
    UndefinedError,
    cohens_d,
    decode_store,
    delta_pct,
    downsample_balance,
    encode_store,
    generate_balanced_benchmark,
    generate_corpus,
    misalign,
    misalign_bruteforce,
    open_store,
    read_dataset_csv,
    save_store,
    store_from_array,
    validate_store,
    write_dataset_csv,
)

__version__ = "0.3.0"


def audit(rows):
    """Bias audit over (training_dataset, variant, eval_set, accuracy) rows."""
    return json.loads(_core.audit(list(rows)))


def validate_modality_balance(records):
    return json.loads(_core.validate_modality_balance(list(records)))


def train(train, val, images, texts, **options):
    """Train a detector. Returns (checkpoint_bytes, report_dict)."""
    checkpoint, report = _core.train(train, val, list(images), list(texts), **options)
    return checkpoint, json.loads(report)


def evaluate(checkpoint, records, images, texts):
    return json.loads(_core.evaluate(checkpoint, records, list(images), list(texts)))
