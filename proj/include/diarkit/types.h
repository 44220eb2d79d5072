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

#ifndef DIARKIT_TYPES_H_
#define DIARKIT_TYPES_H_

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace diarkit {

// Row-major so that a row is one frame.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// T x 80 log filter-bank energies at 10 ms.
using FrameFeatureMatrix = Matrix;

// T x S binary speaker activity, stored as 0.0 / 1.0.
using SpeakerActivity = Matrix;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kFrameShiftMs = 10;
inline constexpr int kSubsamplingFactor = 4;
inline constexpr int kAcousticDim = 80;

// A half-open frame interval [start, end).
struct FrameSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool operator==(const FrameSpan&) const = default;
};

}  // namespace diarkit

#endif  // DIARKIT_TYPES_H_
