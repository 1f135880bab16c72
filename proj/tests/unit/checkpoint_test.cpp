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

#include <cstring>

#include "doctest.h"
#include "mmdet/checkpoint.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/rng.hpp"
#include "support.hpp"

using namespace mmdet;

namespace {

DetectorParams float_valued(const DetectorConfig& c, std::uint64_t seed) {
  auto p = init_params(c, seed);
  Rng rng(seed, "values");
  p.for_each([&](const std::string&, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  });
  return p;
}

}  // namespace

TEST_CASE("float-valued params roundtrip bit-exactly") {
  for (auto mode : {DetectorMode::kMultimodalToken, DetectorMode::kMultimodalDim,
                    DetectorMode::kTextOnly, DetectorMode::kImageOnly}) {
    DetectorConfig c;
    c.mode = mode;
    c.dim = 16;
    c.heads = 4;
    c.ff = 32;
    c.layers = 2;
    c.classes = 3;
    c.dropout = 0.25;
    const auto p = float_valued(c, 3);
    testing::TempDir dir;
    save_checkpoint(c, p, dir / "best.dpar");
    const auto back = load_checkpoint(dir / "best.dpar");
    CHECK(back.config == c);
    CHECK(back.params == p);
    CHECK(encode_checkpoint(back.config, back.params) == testing::slurp(dir / "best.dpar"));
  }
}

TEST_CASE("double weights round to float once") {
  DetectorConfig c;
  c.dim = 8;
  c.ff = 16;
  const auto p = init_params(c, 1);
  const auto once = decode_checkpoint(encode_checkpoint(c, p));
  const auto twice = decode_checkpoint(encode_checkpoint(once.config, once.params));
  CHECK(once.params == twice.params);
  once.params.for_each([](const std::string&, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(m.data()[i] == static_cast<float>(m.data()[i]));
  });
}

TEST_CASE("header layout") {
  DetectorConfig c;
  c.mode = DetectorMode::kTextOnly;
  c.dim = 8;
  c.ff = 16;
  c.classes = 1;
  const auto bytes = encode_checkpoint(c, init_params(c, 0));
  CHECK(bytes.substr(0, 4) == "DPAR");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 2);  // text_only
  CHECK(bytes[7] == 1);  // classes
  std::uint32_t dim = 0;
  std::memcpy(&dim, bytes.data() + 10 + 12, 4);
  CHECK(dim == 8);
}

TEST_CASE("corrupt checkpoints") {
  DetectorConfig c;
  c.dim = 8;
  c.ff = 16;
  const auto bytes = encode_checkpoint(c, init_params(c, 0));
  CHECK_THROWS_AS(decode_checkpoint("XPAR" + bytes.substr(4)), FormatError);
  auto v2 = bytes;
  v2[4] = 2;
  CHECK_THROWS_AS(decode_checkpoint(v2), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CorruptionError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CorruptionError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 20)), CorruptionError);
  testing::TempDir dir;
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.dpar"), Error);
}
