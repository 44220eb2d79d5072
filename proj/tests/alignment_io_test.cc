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

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_util.h"

namespace diarkit {
namespace {

TEST_CASE("seconds to frames floors the start and ceils the end") {
  CHECK(SecondsToFrames(0.10, 0.20) == FrameSpan{10, 30});
  CHECK(SecondsToFrames(0.105, 0.1) == FrameSpan{10, 21});
  CHECK(SecondsToFrames(0.0, 0.01) == FrameSpan{0, 1});
}

TEST_CASE("CTM parsing") {
  std::istringstream is(
      "rec1 1 0.00 0.50 hello A\n\n;; comment\nrec1  1 0.50 0.20 there B\n");
  const auto recs = ReadCtm(is);
  REQUIRE(recs.size() == 2);
  CHECK(recs[1].label == "there");
  CHECK(recs[1].speaker == "B");
  CHECK(recs[1].start_seconds == 0.5);
  std::istringstream bad("rec1 1 zero 0.5 x\n");
  CHECK_THROWS_AS(ReadCtm(bad), Error);
}

TEST_CASE("alignments round-trip through CTM files") {
  std::mt19937_64 rng(4);
  const auto dir = testing::ScratchDir("ctm");
  for (int i = 0; i < 50; ++i) {
    const int T = 1 + static_cast<int>(rng() % 300);
    TimeAlignment al = testing::RandomAlignment(rng, T);
    for (auto& w : al.words) w.speaker = rng() % 2 ? "s001" : "s002";
    {
      std::ofstream w(dir / "w.ctm"), p(dir / "p.ctm");
      WriteWordCtm(w, "r", al);
      WritePhoneCtm(p, "r", al);
    }
    const TimeAlignment back = ReadAlignment(dir / "w.ctm", dir / "p.ctm", T);
    REQUIRE(back.words.size() == al.words.size());
    REQUIRE(back.phones.size() == al.phones.size());
    for (std::size_t k = 0; k < al.words.size(); ++k) {
      CHECK(back.words[k].start == al.words[k].start);
      CHECK(back.words[k].end == al.words[k].end);
      CHECK(back.words[k].word == al.words[k].word);
      CHECK(back.words[k].speaker == al.words[k].speaker);
    }
    for (std::size_t k = 0; k < al.phones.size(); ++k) {
      CHECK(back.phones[k].start == al.phones[k].start);
      CHECK(back.phones[k].end == al.phones[k].end);
      CHECK(back.phones[k].phone == al.phones[k].phone);
      CHECK(back.phones[k].tag == al.phones[k].tag);
    }
    if (al.phones.back().end == T) {
      CHECK(ReadAlignment(dir / "w.ctm", dir / "p.ctm").frames_total == T);
    }
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace diarkit
