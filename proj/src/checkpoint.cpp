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

#include "mmdet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "mmdet/errors.hpp"

namespace mmdet {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'A', 'R'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take_bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw CorruptionError(std::string("truncated checkpoint while reading ") + what +
                            ": expected " + std::to_string(n) + " bytes, got " +
                            std::to_string(bytes_.size() - pos_));
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const DetectorConfig& config,
                              const DetectorParams& params) {
  check_shapes(params, config);
  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(config.mode));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(config.classes));
  put<std::uint16_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.heads));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.ff));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.dim));
  put<double>(out, config.dropout);
  std::uint32_t count = 0;
  params.for_each([&](const std::string&, const Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  params.for_each([&](const std::string& name, const Matrix& m) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    // Biases and gains are (1 x d); store them as rank-1.
    const bool vec = m.rows() == 1 && !name.ends_with(".weight");
    put<std::uint8_t>(out, vec ? 1 : 2);
    if (!vec) put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put<float>(out, static_cast<float>(m.data()[i]));
  });
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Cursor cur(bytes);
  const auto magic = cur.take_bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic: not a DPAR checkpoint");
  }
  const auto version = cur.take<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto mode = cur.take<std::uint8_t>("mode");
  if (mode > 3) throw FormatError("unknown detector mode code " + std::to_string(mode));
  ck.config.mode = static_cast<DetectorMode>(mode);
  ck.config.classes = cur.take<std::uint8_t>("classes");
  cur.take<std::uint16_t>("reserved");
  ck.config.layers = static_cast<int>(cur.take<std::uint32_t>("layers"));
  ck.config.heads = static_cast<int>(cur.take<std::uint32_t>("heads"));
  ck.config.ff = static_cast<int>(cur.take<std::uint32_t>("ff"));
  ck.config.dim = static_cast<int>(cur.take<std::uint32_t>("dim"));
  ck.config.dropout = cur.take<double>("dropout");
  try {
    ck.config.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid config block: ") + e.what());
  }
  // Allocate from the config, then fill by name in canonical order.
  ck.params = init_params(ck.config, 0).zeros_like();
  const auto count = cur.take<std::uint32_t>("tensor count");
  std::uint32_t expected = 0;
  ck.params.for_each([&](const std::string&, const Matrix&) { ++expected; });
  if (count != expected) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(expected));
  }
  ck.params.for_each([&](const std::string& name, Matrix& m) {
    const auto len = cur.take<std::uint16_t>("tensor name length");
    const auto got = cur.take_bytes(len, "tensor name");
    if (got != name) {
      throw FormatError("expected tensor '" + name + "', found '" + std::string(got) + "'");
    }
    const auto rank = cur.take<std::uint8_t>("rank");
    if (rank != 1 && rank != 2) throw FormatError("bad rank for tensor " + name);
    const std::uint32_t rows = rank == 2 ? cur.take<std::uint32_t>("dims") : 1;
    const std::uint32_t cols = cur.take<std::uint32_t>("dims");
    if (rows != m.rows() || cols != m.cols()) {
      throw FormatError("shape mismatch for tensor " + name);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cur.take<float>("payload");
  });
  if (!cur.done()) {
    throw CorruptionError("checkpoint has " + std::to_string(cur.remaining()) +
                          " trailing bytes");
  }
  return ck;
}

void save_checkpoint(const DetectorConfig& config, const DetectorParams& params,
                     const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(config, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mmdet
