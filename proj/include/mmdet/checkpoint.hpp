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

#pragma once

// Detector checkpoints ("DPAR"), little-endian, no padding:
//   magic "DPAR", u16 version (1)
//   config block: u8 mode, u8 classes, u16 reserved (0), u32 layers,
//                 u32 heads, u32 ff, u32 dim, f64 dropout
//   u32 tensor count, then per tensor: u16 name length, name bytes,
//   u8 rank, rank x u32 dims, f32 payload (row-major)
//
// Payloads are f32, so a save/load cycle rounds double weights to float;
// a second cycle is bit-exact.

#include <filesystem>
#include <string>
#include <string_view>

#include "mmdet/detector.hpp"

namespace mmdet {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  DetectorConfig config;
  DetectorParams params;
};

std::string encode_checkpoint(const DetectorConfig& config,
                              const DetectorParams& params);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const DetectorConfig& config, const DetectorParams& params,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmdet
