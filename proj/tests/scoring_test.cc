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

#include "diarkit/scoring.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"

namespace diarkit {
namespace {

// Millisecond-grid oracle: each 1 ms cell is scored unless it lies within the
// collar of a reference boundary; errors are counted per cell.
DerResult GridDer(const SegmentSet& hyp, const SegmentSet& ref, double collar,
                  const std::vector<std::string>& ref_spk,
                  const std::vector<std::string>& hyp_spk) {
  double end = 0;
  for (const auto& s : ref) end = std::max(end, s.offset);
  for (const auto& s : hyp) end = std::max(end, s.offset);
  const int n = static_cast<int>(std::lround(end * 1000)) + 1;
  auto raster = [&](const SegmentSet& segs, const std::string& spk) {
    std::vector<char> a(n, 0);
    for (const auto& s : segs) {
      if (s.speaker != spk) continue;
      const int b = static_cast<int>(std::lround(s.onset * 1000));
      const int e = static_cast<int>(std::lround(s.offset * 1000));
      for (int i = b; i < e; ++i) a[i] = 1;
    }
    return a;
  };
  std::vector<char> scored(n, 1);
  const int c = static_cast<int>(std::lround(collar * 1000));
  for (const auto& s : ref) {
    for (double x : {s.onset, s.offset}) {
      const int m = static_cast<int>(std::lround(x * 1000));
      for (int i = std::max(0, m - c); i < std::min(n, m + c); ++i) scored[i] = 0;
    }
  }
  std::vector<std::vector<char>> R, H;
  for (const auto& s : ref_spk) R.push_back(raster(ref, s));
  for (const auto& s : hyp_spk) H.push_back(raster(hyp, s));
  while (H.size() < R.size()) H.push_back(std::vector<char>(n, 0));
  while (R.size() < H.size()) R.push_back(std::vector<char>(n, 0));
  std::vector<int> perm(H.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  DerResult best;
  best.der = 1e300;
  do {
    double speech = 0, miss = 0, fa = 0, conf = 0;
    for (int i = 0; i < n; ++i) {
      if (!scored[i]) continue;
      int nr = 0, nh = 0, correct = 0;
      for (std::size_t k = 0; k < R.size(); ++k) {
        nr += R[k][i];
        nh += H[perm[k]][i];
        correct += R[k][i] && H[perm[k]][i];
      }
      speech += nr;
      miss += std::max(0, nr - nh);
      fa += std::max(0, nh - nr);
      conf += std::min(nr, nh) - correct;
    }
    if (speech == 0) continue;
    DerResult r;
    r.scored_seconds = speech / 1000;
    r.missed = miss / speech;
    r.false_alarm = fa / speech;
    r.confusion = conf / speech;
    r.der = r.missed + r.false_alarm + r.confusion;
    if (r.der < best.der) best = r;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST_CASE("binarize uses >= threshold") {
  CHECK(Binarize(Matrix::Constant(3, 2, 0.9)).isOnes());
  CHECK(Binarize(Matrix::Constant(3, 2, 0.1)).isZero());
  CHECK(Binarize(Matrix::Constant(3, 2, 0.5)).isOnes());
  Matrix z(5, 1);
  z << 0.9, 0.1, 0.9, 0.9, 0.1;
  Matrix want(5, 1);
  want << 1, 1, 1, 1, 0;
  CHECK(Binarize(z, 0.5, 3).col(0).tail(4) == want.col(0).tail(4));
  CHECK_THROWS_AS(Binarize(z, 0.5, 2), Error);
}

TEST_CASE("activity to segments") {
  Matrix a = Matrix::Zero(12, 2);
  a.col(0).head(10).setOnes();
  const auto segs = ActivityToSegments(a);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].speaker == "spk0");
  CHECK(segs[0].onset == 0.0);
  CHECK(segs[0].offset == doctest::Approx(0.4));
  CHECK(ActivityToSegments(Matrix::Zero(5, 2)).empty());
  Matrix alt(4, 1);
  alt << 1, 0, 1, 0;
  CHECK(ActivityToSegments(alt, 0.04, {"A"}).size() == 2);
  CHECK(ActivityToSegments(alt, 0.04, {"A"})[1].speaker == "A");
}

TEST_CASE("segments re-rasterise to the same activity") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const int T = 1 + static_cast<int>(rng() % 100);
    Matrix a(T, 2);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = rng() % 3 == 0;
    const auto segs = ActivityToSegments(a, 0.04, {"x", "y"});
    CHECK(SegmentsToActivity(segs, T, 0.04, {"x", "y"}) == a);
  }
}

TEST_CASE("DER: identity and swapped labels") {
  const SegmentSet ref = {{"a", 0, 3}, {"b", 2, 5}, {"a", 6, 7.5}};
  for (double collar : {0.0, 0.25}) {
    CHECK(ComputeDer(ref, ref, {collar}).der == 0.0);
    SegmentSet swapped = ref;
    for (auto& s : swapped) s.speaker = s.speaker == "a" ? "q" : "r";
    CHECK(ComputeDer(swapped, ref, {collar}).der == 0.0);
  }
  // Durations that are not exact in binary still give exactly zero.
  const SegmentSet odd = {{"a", 0.07, 1.13}, {"b", 0.91, 2.37}, {"a", 2.21, 3.33},
                          {"b", 3.01, 4.79}, {"a", 4.7, 6.1}};
  CHECK(ComputeDer(odd, odd, {0.1}).der == 0.0);
  CHECK(ComputeDer(odd, odd, {0.0}).confusion_seconds == 0.0);
}

TEST_CASE("DER: the onset-shift example") {
  const SegmentSet ref = {{"spk0", 0, 10}};
  CHECK(ComputeDer({{"x", 0.2, 10}}, ref).der == doctest::Approx(0.0));
  const DerResult r = ComputeDer({{"x", 0.5, 10}}, ref);
  CHECK(r.scored_seconds == doctest::Approx(9.5).epsilon(1e-12));
  CHECK(r.missed_seconds == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(r.der - 0.25 / 9.5) < 1e-9);
  CHECK(r.false_alarm == 0.0);
  CHECK(r.confusion == 0.0);
}

TEST_CASE("DER components") {
  const SegmentSet ref = {{"a", 0, 4}, {"b", 4, 8}};
  const SegmentSet hyp = {{"x", 0, 6}, {"y", 6, 9}};
  const DerResult r = ComputeDer(hyp, ref, {0.0});
  CHECK(r.scored_seconds == doctest::Approx(8.0));
  CHECK(r.confusion_seconds == doctest::Approx(2.0));
  CHECK(r.false_alarm_seconds == doctest::Approx(1.0));
  CHECK(r.missed_seconds == doctest::Approx(0.0));
  CHECK(r.der == doctest::Approx(3.0 / 8.0));
  CHECK_THROWS_AS(ComputeDer(hyp, {}, {0.0}), Error);
}

TEST_CASE("overlap scoring flag") {
  const SegmentSet ref = {{"a", 0, 4}, {"b", 2, 6}};
  const SegmentSet hyp = {{"a", 0, 4}};
  const DerResult with = ComputeDer(hyp, ref, {0.0, true});
  CHECK(with.missed_seconds == doctest::Approx(4.0));
  const DerResult without = ComputeDer(hyp, ref, {0.0, false});
  CHECK(without.scored_seconds == doctest::Approx(4.0));
  CHECK(without.missed_seconds == doctest::Approx(2.0));
}

SegmentSet RandomSegments(std::mt19937_64& rng, const std::vector<std::string>& spk) {
  SegmentSet out;
  for (const auto& s : spk) {
    double t = (rng() % 200) / 100.0;
    while (t < 20) {
      const double len = 0.01 * (1 + rng() % 300);
      out.push_back({s, t, t + len});
      t += len + 0.01 * (1 + rng() % 200);
    }
  }
  return out;
}

TEST_CASE("DER matches a millisecond-grid oracle") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 60; ++i) {
    const SegmentSet ref = RandomSegments(rng, {"a", "b"});
    const SegmentSet hyp = RandomSegments(rng, {"x", "y"});
    for (double collar : {0.0, 0.25}) {
      const DerResult got = ComputeDer(hyp, ref, {collar});
      const DerResult want = GridDer(hyp, ref, collar, {"a", "b"}, {"x", "y"});
      CHECK(got.der == doctest::Approx(want.der).epsilon(1e-9));
      CHECK(got.scored_seconds ==
            doctest::Approx(want.scored_seconds).epsilon(1e-9));
      CHECK(got.der == doctest::Approx(got.missed + got.false_alarm +
                                       got.confusion).epsilon(1e-12));
    }
  }
}

TEST_CASE("missed plus confused time never grows with the collar") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const SegmentSet ref = RandomSegments(rng, {"a", "b"});
    const SegmentSet hyp = RandomSegments(rng, {"x", "y"});
    double prev = 1e300;
    for (double c : {0.0, 0.1, 0.25, 0.5}) {
      const DerResult r = ComputeDer(hyp, ref, {c});
      const double err =
          r.missed_seconds + r.false_alarm_seconds + r.confusion_seconds;
      CHECK(err <= prev + 1e-9);
      prev = err;
    }
  }
}

TEST_CASE("aggregate weighs by scored time") {
  DerResult a, b;
  a.scored_seconds = 10;
  a.missed_seconds = 1;
  b.scored_seconds = 30;
  b.false_alarm_seconds = 3;
  b.confusion_seconds = 2;
  const DerResult r = AggregateDer({a, b});
  CHECK(r.scored_seconds == 40);
  CHECK(r.der == doctest::Approx(6.0 / 40));
  CHECK(r.missed == doctest::Approx(1.0 / 40));
}

TEST_CASE("RTTM round trip") {
  const SegmentSet segs = {{"A", 0.04, 1.2}, {"B", 1.0, 3.48}};
  std::ostringstream os;
  WriteRttm(os, "rec1", segs);
  CHECK(os.str().find("SPEAKER rec1 1 0.040 1.160 <NA> <NA> A <NA> <NA>") !=
        std::string::npos);
  std::istringstream is(os.str() + ";; comment\nSPEAKER  rec2 1  0.5 0.25 <NA> <NA> C <NA> <NA>\n");
  const auto all = ReadRttm(is);
  REQUIRE(all.size() == 2);
  const auto& r1 = all.at("rec1");
  REQUIRE(r1.size() == 2);
  CHECK(r1[1].speaker == "B");
  CHECK(r1[1].offset == doctest::Approx(3.48));
  CHECK(all.at("rec2")[0].offset == doctest::Approx(0.75));
}

}  // namespace
}  // namespace diarkit
