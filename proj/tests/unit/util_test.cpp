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

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mmdet/csv.hpp"
#include "mmdet/errors.hpp"
#include "mmdet/features.hpp"
#include "mmdet/hashing.hpp"
#include "mmdet/rng.hpp"
#include "support.hpp"

using namespace mmdet;

TEST_CASE("csv reader handles quotes, commas and newlines") {
  std::istringstream in("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n");
  csv::Reader r(in);
  std::vector<std::string> f;
  REQUIRE(r.next(f));
  CHECK(f == std::vector<std::string>{"a", "b"});
  REQUIRE(r.next(f));
  CHECK(f == std::vector<std::string>{"x,1", "he said \"hi\""});
  CHECK(r.line() == 2);
  REQUIRE(r.next(f));
  CHECK(f[0] == "multi\nline");
  CHECK(r.line() == 3);
  CHECK_FALSE(r.next(f));

  std::ostringstream out;
  csv::write_row(out, {"plain", "x,1", "q\"q", ""});
  CHECK(out.str() == "plain,\"x,1\",\"q\"\"q\",\n");
}

TEST_CASE("read_file checks header and field counts") {
  testing::TempDir dir;
  testing::spit(dir / "h.csv", "a,c\n1,2\n");
  CHECK_THROWS_AS(csv::read_file(dir / "h.csv", {"a", "b"}), ParseError);
  testing::spit(dir / "n.csv", "a,b\n1,2\n\n3\n");
  try {
    csv::read_file(dir / "n.csv", {"a", "b"});
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  CHECK_THROWS_AS(csv::read_file(dir / "missing.csv", {"a"}), Error);
}

TEST_CASE("doubles print shortest and parse back exactly") {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(20)) - 10.0);
    CHECK(csv::parse_double(csv::format_double(x), 1) == x);
  }
  CHECK(csv::format_double(0.5) == "0.5");
  CHECK_THROWS_AS(csv::parse_double("0.5x", 7), ParseError);
  CHECK_THROWS_AS(csv::parse_double("", 7), ParseError);
}

TEST_CASE("rng streams") {
  CHECK(derive_seed(0, "misalign") == derive_seed(0, "misalign"));
  CHECK(derive_seed(0, "misalign") != derive_seed(0, "split"));
  CHECK(derive_seed(0, "misalign") != derive_seed(1, "misalign"));
  Rng a(0, "x"), b(0, "x");
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng u(3);
  double mean = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
    mean += x;
  }
  CHECK(std::abs(mean / n - 0.5) <= 0.005);
  mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = u.normal();
    mean += z;
    sq += z * z;
  }
  CHECK(std::abs(mean / n) <= 0.01);
  CHECK(std::abs(sq / n - 1.0) <= 0.02);
  std::size_t counts[7] = {};
  for (int i = 0; i < 70000; ++i) ++counts[u.below(7)];
  for (auto c : counts) CHECK(std::abs(double(c) - 10000.0) <= 500.0);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  testing::TempDir dir;
  testing::spit(dir / "f", "abc");
  CHECK(sha256_file(dir / "f") == sha256_hex("abc"));
}

TEST_CASE("encode_features") {
  std::vector<StoreRecord> img = {{"i0", {1, 2}}, {"i1", {3, 4}}};
  std::vector<StoreRecord> cap = {{"c0", {5, 6}}};
  std::vector<StoreRecord> lure = {{"f0", {7, 8}}, {"c0", {9, 9}}};
  const auto images = EmbeddingStore::from_records(img, 2, Modality::kImage);
  const auto caps = EmbeddingStore::from_records(cap, 2, Modality::kText);
  const auto lures = EmbeddingStore::from_records(lure, 2, Modality::kText);
  Dataset ds;
  ds.records = {{"i0", "c0", Label::kTrue, "s", {}}, {"i1", "f0", Label::kMC, "s", {}},
                {"i1", "c0", Label::kOOC, "s", {}}};
  const EmbeddingStore* im[] = {&images};
  const EmbeddingStore* tx[] = {&caps, &lures};
  const auto f = encode_features(ds, im, tx, DetectorMode::kMultimodalToken, 3);
  CHECK(f.labels == std::vector<int>{0, 1, 2});
  CHECK(f.texts(0, 0) == 5.0);  // first store wins
  CHECK(f.texts(1, 1) == 8.0);
  CHECK(f.images(2, 0) == 3.0);
  const auto b = encode_features(ds, im, tx, DetectorMode::kTextOnly, 1);
  CHECK(b.labels == std::vector<int>{0, 1, 1});
  CHECK(b.images.size() == 0);
  const auto batch = f.batch(std::vector<std::size_t>{2, 0});
  CHECK(batch.labels == std::vector<int>{2, 0});
  CHECK(batch.images(0, 1) == 4.0);
  Dataset bad;
  bad.records = {{"nope", "c0", Label::kTrue, "s", {}}};
  CHECK_THROWS_AS(encode_features(bad, im, tx, DetectorMode::kImageOnly, 1), LookupError);
}
