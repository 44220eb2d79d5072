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

#include "diarkit/feature_io.h"

#include <fstream>
#include <string>

#include "binary_io.h"

namespace diarkit {
namespace {

constexpr std::uint32_t kLabelsKind = 0;
constexpr std::uint32_t kMatrixKind = 1;

}  // namespace

Matrix RoundToFloat(const Matrix& m) {
  return m.cast<float>().cast<double>();
}

void WriteFeatureDump(const std::filesystem::path& path,
                      const FeatureDump& dump) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write("DKF1", 4);
  if (const auto* labels = std::get_if<CategoricalFrameSequence>(&dump)) {
    for (int v : labels->labels) {
      if (v < 0 || v >= labels->num_classes) {
        throw Error("label " + std::to_string(v) + " outside [0, " +
                    std::to_string(labels->num_classes) + ")");
      }
    }
    binary::WriteU32(os, kLabelsKind);
    binary::WriteU32(os, labels->frame_rate_ms);
    binary::WriteU32(os, labels->num_frames());
    binary::WriteU32(os, labels->num_classes);
    for (int v : labels->labels) binary::WriteI32(os, v);
  } else {
    const auto& m = std::get<RealFrameMatrix>(dump);
    binary::WriteU32(os, kMatrixKind);
    binary::WriteU32(os, m.frame_rate_ms);
    binary::WriteU32(os, static_cast<std::uint32_t>(m.values.rows()));
    binary::WriteU32(os, static_cast<std::uint32_t>(m.values.cols()));
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
        binary::WriteF32(os, static_cast<float>(m.values(r, c)));
      }
    }
  }
  if (!os) throw Error("failed writing " + path.string());
}

FeatureDump ReadFeatureDump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  binary::ExpectMagic(is, "DKF1");
  const auto kind = binary::ReadU32(is);
  const auto rate = static_cast<int>(binary::ReadU32(is));
  const auto frames = static_cast<int>(binary::ReadU32(is));
  const auto width = static_cast<int>(binary::ReadU32(is));
  if (kind == kLabelsKind) {
    CategoricalFrameSequence seq{"", width, rate, std::vector<int>(frames)};
    for (auto& v : seq.labels) {
      v = binary::ReadI32(is);
      if (v < 0 || v >= width) {
        throw Error(path.string() + ": label out of range");
      }
    }
    return seq;
  }
  if (kind != kMatrixKind) {
    throw Error(path.string() + ": unknown payload kind " +
                std::to_string(kind));
  }
  RealFrameMatrix m{rate, Matrix(frames, width)};
  for (int r = 0; r < frames; ++r) {
    for (int c = 0; c < width; ++c) m.values(r, c) = binary::ReadF32(is);
  }
  return m;
}

void WriteFrameMatrix(const std::filesystem::path& path, const Matrix& values,
                      int frame_rate_ms) {
  WriteFeatureDump(path, RealFrameMatrix{frame_rate_ms, values});
}

RealFrameMatrix ReadFrameMatrix(const std::filesystem::path& path) {
  auto dump = ReadFeatureDump(path);
  if (auto* m = std::get_if<RealFrameMatrix>(&dump)) return std::move(*m);
  throw Error(path.string() + " holds class labels, expected a matrix");
}

}  // namespace diarkit
