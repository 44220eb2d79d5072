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

#ifndef DIARKIT_FEATURE_IO_H_
#define DIARKIT_FEATURE_IO_H_

// DKF1 feature container. Layout, all fields little-endian:
//
//   char[4]  magic "DKF1"
//   uint32   payload kind (0 = int32 class labels, 1 = float32 matrix)
//   uint32   frame_rate_ms
//   uint32   num_frames
//   uint32   num_classes (labels) or dim (matrix)
//   payload  row-major, num_frames x {1 | dim}

#include <filesystem>
#include <variant>

#include "diarkit/features.h"
#include "diarkit/types.h"

namespace diarkit {

struct RealFrameMatrix {
  int frame_rate_ms = kFrameShiftMs;
  Matrix values;
};

using FeatureDump = std::variant<CategoricalFrameSequence, RealFrameMatrix>;

// Matrix values are stored as float32; doubles that are not exactly
// representable are rounded.
void WriteFeatureDump(const std::filesystem::path& path,
                      const FeatureDump& dump);
FeatureDump ReadFeatureDump(const std::filesystem::path& path);

// Convenience wrappers that check the payload kind.
void WriteFrameMatrix(const std::filesystem::path& path, const Matrix& values,
                      int frame_rate_ms = kFrameShiftMs);
RealFrameMatrix ReadFrameMatrix(const std::filesystem::path& path);

// Rounds every entry to the nearest float32, so that a DKF1 round trip is
// lossless.
Matrix RoundToFloat(const Matrix& m);

}  // namespace diarkit

#endif  // DIARKIT_FEATURE_IO_H_
