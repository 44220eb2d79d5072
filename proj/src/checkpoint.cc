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

#include "diarkit/checkpoint.h"

#include <fstream>

#include "binary_io.h"
#include "diarkit/feature_io.h"

namespace diarkit {

std::uint64_t ConfigDigest(const std::string& config_json) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : config_json) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void WriteCheckpoint(const std::filesystem::path& path,
                     const std::string& config_json,
                     const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write("DKC1", 4);
  binary::WriteU64(os, ConfigDigest(config_json));
  binary::WriteString(os, config_json);
  binary::WriteU32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [key, m] : params.tensors()) {
    binary::WriteString(os, key);
    binary::WriteU32(os, static_cast<std::uint32_t>(m.rows()));
    binary::WriteU32(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      binary::WriteF32(os, static_cast<float>(m.data()[i]));
    }
  }
  if (!os) throw Error("failed writing " + path.string());
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  binary::ExpectMagic(is, "DKC1");
  const std::uint64_t digest = binary::ReadU64(is);
  Checkpoint ckpt;
  ckpt.config_json = binary::ReadString(is);
  if (ConfigDigest(ckpt.config_json) != digest) {
    throw Error(path.string() + ": config digest mismatch");
  }
  const std::uint32_t count = binary::ReadU32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = binary::ReadString(is, 4096);
    const std::uint32_t rows = binary::ReadU32(is);
    const std::uint32_t cols = binary::ReadU32(is);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      m.data()[j] = binary::ReadF32(is);
    }
    ckpt.params.Add(key, std::move(m));
  }
  return ckpt;
}

ParameterSet RoundToFloat(const ParameterSet& params) {
  ParameterSet out;
  for (const auto& [key, m] : params.tensors()) {
    out.Add(key, RoundToFloat(m));
  }
  return out;
}

}  // namespace diarkit
