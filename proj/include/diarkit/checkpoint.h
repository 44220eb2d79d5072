// Copyright (c) 2026 The diarkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DIARKIT_CHECKPOINT_H_
#define DIARKIT_CHECKPOINT_H_

// DKC1 checkpoint. Layout, little-endian:
//
//   char[4]  magic "DKC1"
//   uint64   FNV-1a digest of the config JSON text
//   string   config JSON (uint32 length + bytes)
//   uint32   number of tensors
//   per tensor, in key order:
//     string key, uint32 rows, uint32 cols, rows*cols float32 (row-major)

#include <cstdint>
#include <filesystem>
#include <string>

#include "diarkit/parameters.h"

namespace diarkit {

struct Checkpoint {
  std::string config_json;
  ParameterSet params;
};

std::uint64_t ConfigDigest(const std::string& config_json);

// Values are rounded to float32 on write.
void WriteCheckpoint(const std::filesystem::path& path,
                     const std::string& config_json,
                     const ParameterSet& params);
// Throws Error on a bad magic, digest mismatch or truncated file.
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

// Rounds every tensor to float32, i.e. what a checkpoint round trip yields.
ParameterSet RoundToFloat(const ParameterSet& params);

}  // namespace diarkit

#endif  // DIARKIT_CHECKPOINT_H_
