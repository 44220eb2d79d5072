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

#include "diarkit/alignment_io.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace diarkit {
namespace {

// Absorbs decimal round-off such as 0.1 * 100 = 10.000000000000002.
constexpr double kFrameSlack = 1e-6;

std::string FormatSeconds(int frames) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << frames * kFrameShiftMs / 1000.0;
  return os.str();
}

}  // namespace

std::vector<CtmRecord> ReadCtm(std::istream& is) {
  std::vector<CtmRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream fields(line);
    CtmRecord r;
    if (!(fields >> r.recording_id)) continue;  // blank line
    if (r.recording_id.starts_with(';') || r.recording_id.starts_with('#')) {
      continue;
    }
    if (!(fields >> r.channel >> r.start_seconds >> r.duration_seconds >>
          r.label)) {
      throw Error("malformed CTM line " + std::to_string(line_no) + ": " +
                  line);
    }
    fields >> r.speaker;
    if (r.duration_seconds <= 0.0) {
      throw Error("non-positive duration on CTM line " +
                  std::to_string(line_no));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CtmRecord> ReadCtmFile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  return ReadCtm(is);
}

FrameSpan SecondsToFrames(double start_seconds, double duration_seconds) {
  const double frames_per_second = 1000.0 / kFrameShiftMs;
  const double begin = start_seconds * frames_per_second;
  const double end = (start_seconds + duration_seconds) * frames_per_second;
  return {static_cast<int>(std::floor(begin + kFrameSlack)),
          static_cast<int>(std::ceil(end - kFrameSlack))};
}

void WriteWordCtm(std::ostream& os, const std::string& recording_id,
                  const TimeAlignment& alignment) {
  for (const auto& w : alignment.words) {
    os << recording_id << " 1 " << FormatSeconds(w.start) << ' '
       << FormatSeconds(w.end - w.start) << ' ' << w.word << ' ' << w.speaker
       << '\n';
  }
}

void WritePhoneCtm(std::ostream& os, const std::string& recording_id,
                   const TimeAlignment& alignment) {
  for (const auto& p : alignment.phones) {
    os << recording_id << " 1 " << FormatSeconds(p.start) << ' '
       << FormatSeconds(p.end - p.start) << ' ' << p.phone << '\n';
  }
}

TimeAlignment ReadAlignment(const std::filesystem::path& word_ctm,
                            const std::filesystem::path& phone_ctm,
                            int frames_total) {
  TimeAlignment a;
  for (const auto& r : ReadCtmFile(word_ctm)) {
    const auto span = SecondsToFrames(r.start_seconds, r.duration_seconds);
    a.words.push_back({span.start, span.end, r.label, r.speaker});
  }
  for (const auto& r : ReadCtmFile(phone_ctm)) {
    const auto span = SecondsToFrames(r.start_seconds, r.duration_seconds);
    a.phones.push_back(
        {span.start, span.end, r.label, TagFromPhoneSymbol(r.label)});
  }
  a.frames_total = frames_total > 0 ? frames_total
                   : a.phones.empty() ? 0
                                      : a.phones.back().end;
  a.Validate();
  return a;
}

}  // namespace diarkit
