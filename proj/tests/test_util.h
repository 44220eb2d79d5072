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

#ifndef DIARKIT_TESTS_TEST_UTIL_H_
#define DIARKIT_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "diarkit/features.h"

namespace diarkit::testing {

struct WordSpec {
  int start;
  int end;
  int phones;  // split evenly, remainder to the front
};

// Tiles [0, T) with the given words (sorted, non-overlapping) and silence.
inline TimeAlignment MakeAlignment(int T, const std::vector<WordSpec>& words,
                                   const std::string& base = "ah") {
  TimeAlignment al;
  al.frames_total = T;
  int cursor = 0;
  int w_index = 0;
  for (const auto& w : words) {
    if (w.start > cursor) {
      al.phones.push_back({cursor, w.start, "sil", PositionTag::kSilence});
    }
    al.words.push_back({w.start, w.end, "w" + std::to_string(w_index++), "A"});
    const int len = w.end - w.start;
    int p0 = w.start;
    for (int i = 0; i < w.phones; ++i) {
      const int d = len / w.phones + (i < len % w.phones ? 1 : 0);
      PositionTag tag = w.phones == 1        ? PositionTag::kSingleton
                        : i == 0             ? PositionTag::kBegin
                        : i == w.phones - 1  ? PositionTag::kEnd
                                             : PositionTag::kInternal;
      static const char* kSuffix[] = {"", "_S", "_B", "_I", "_E"};
      al.phones.push_back(
          {p0, p0 + d, base + kSuffix[static_cast<int>(tag)], tag});
      p0 += d;
    }
    cursor = w.end;
  }
  if (cursor < T) al.phones.push_back({cursor, T, "sil", PositionTag::kSilence});
  return al;
}

// Random valid alignment: words of 1..max_len frames separated by gaps of
// 0..max_gap frames; each word has 1..min(len, 4) phones.
inline TimeAlignment RandomAlignment(std::mt19937_64& rng, int T,
                                     int max_len = 12, int max_gap = 6) {
  std::uniform_int_distribution<int> gap(0, max_gap), len(1, max_len);
  std::vector<WordSpec> words;
  int t = gap(rng);
  while (t < T) {
    const int end = std::min(T, t + len(rng));
    const int n = std::uniform_int_distribution<int>(1, std::min(end - t, 4))(rng);
    words.push_back({t, end, n});
    t = end + gap(rng);
  }
  return MakeAlignment(T, words);
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path ScratchDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("diarkit_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace diarkit::testing

#endif  // DIARKIT_TESTS_TEST_UTIL_H_
