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

#ifndef DIARKIT_ALIGNMENT_IO_H_
#define DIARKIT_ALIGNMENT_IO_H_

// CTM-style alignment files.
//
//   words:  <recording-id> <channel> <start-s> <duration-s> <word> <speaker>
//   phones: <recording-id> <channel> <start-s> <duration-s> <phone>
//
// Phone symbols carry a position suffix (_B/_I/_E/_S); a bare symbol is
// silence. Seconds map to 10 ms frames by flooring the start and ceiling
// the end.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "diarkit/features.h"

namespace diarkit {

struct CtmRecord {
  std::string recording_id;
  std::string channel;
  double start_seconds = 0.0;
  double duration_seconds = 0.0;
  std::string label;
  std::string speaker;  // empty for phone lines
};

std::vector<CtmRecord> ReadCtm(std::istream& is);
std::vector<CtmRecord> ReadCtmFile(const std::filesystem::path& path);

FrameSpan SecondsToFrames(double start_seconds, double duration_seconds);

void WriteWordCtm(std::ostream& os, const std::string& recording_id,
                  const TimeAlignment& alignment);
void WritePhoneCtm(std::ostream& os, const std::string& recording_id,
                   const TimeAlignment& alignment);

// Rebuilds an alignment from its two CTM files. When frames_total is 0 it is
// taken from the end of the last phone. The result is validated.
TimeAlignment ReadAlignment(const std::filesystem::path& word_ctm,
                            const std::filesystem::path& phone_ctm,
                            int frames_total = 0);

}  // namespace diarkit

#endif  // DIARKIT_ALIGNMENT_IO_H_
