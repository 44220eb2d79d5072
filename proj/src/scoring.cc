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
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace diarkit {
namespace {

// All interval arithmetic runs on integer microsecond ticks.
using Tick = std::int64_t;
constexpr double kTicksPerSecond = 1e6;

Tick ToTick(double seconds) {
  return static_cast<Tick>(std::llround(seconds * kTicksPerSecond));
}

struct Interval {
  Tick begin;
  Tick end;
};

// Sorted, merged intervals per speaker.
struct SpeakerTrack {
  std::string name;
  std::vector<Interval> intervals;

  bool ActiveAt(Tick t) const {
    auto it = std::upper_bound(
        intervals.begin(), intervals.end(), t,
        [](Tick v, const Interval& iv) { return v < iv.begin; });
    if (it == intervals.begin()) return false;
    --it;
    return t >= it->begin && t < it->end;
  }
};

std::vector<Interval> Merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.end <= iv.begin) continue;
    if (!out.empty() && iv.begin <= out.back().end) {
      out.back().end = std::max(out.back().end, iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

std::vector<SpeakerTrack> Tracks(const SegmentSet& segments) {
  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const auto& s : segments) {
    if (!(s.offset > s.onset)) {
      throw Error("segment for '" + s.speaker + "' has offset <= onset");
    }
    by_speaker[s.speaker].push_back({ToTick(s.onset), ToTick(s.offset)});
  }
  std::vector<SpeakerTrack> tracks;
  for (auto& [name, ivs] : by_speaker) {
    tracks.push_back({name, Merge(std::move(ivs))});
  }
  return tracks;
}

// Best total overlap over injective maps hyp -> ref (or unmapped).
Tick BestMapping(const std::vector<std::vector<Tick>>& overlap,
                 std::size_t h, std::uint32_t used_refs) {
  if (h == overlap.size()) return 0;
  Tick best = BestMapping(overlap, h + 1, used_refs);
  for (std::size_t r = 0; r < overlap[h].size(); ++r) {
    if (used_refs & (1u << r)) continue;
    best = std::max(best, overlap[h][r] +
                              BestMapping(overlap, h + 1, used_refs | (1u << r)));
  }
  return best;
}

}  // namespace

SpeakerActivity Binarize(const Matrix& posteriors, double threshold,
                         int median_window) {
  if (median_window < 1 || median_window % 2 == 0) {
    throw Error("median window must be a positive odd number");
  }
  SpeakerActivity a =
      (posteriors.array() >= threshold).cast<double>().matrix();
  if (median_window == 1) return a;
  const Eigen::Index T = a.rows();
  const int half = median_window / 2;
  SpeakerActivity filtered(T, a.cols());
  for (Eigen::Index s = 0; s < a.cols(); ++s) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - half);
      const Eigen::Index hi = std::min<Eigen::Index>(T, t + half + 1);
      const double ones = a.col(s).segment(lo, hi - lo).sum();
      filtered(t, s) = 2.0 * ones > static_cast<double>(hi - lo) ? 1.0 : 0.0;
    }
  }
  return filtered;
}

SegmentSet ActivityToSegments(const SpeakerActivity& activity,
                              double frame_seconds,
                              const std::vector<std::string>& speaker_names) {
  if (!speaker_names.empty() &&
      static_cast<Eigen::Index>(speaker_names.size()) != activity.cols()) {
    throw Error("speaker name count does not match activity columns");
  }
  SegmentSet out;
  for (Eigen::Index s = 0; s < activity.cols(); ++s) {
    const std::string name = speaker_names.empty()
                                 ? "spk" + std::to_string(s)
                                 : speaker_names[s];
    Eigen::Index t = 0;
    while (t < activity.rows()) {
      if (activity(t, s) < 0.5) {
        ++t;
        continue;
      }
      const Eigen::Index start = t;
      while (t < activity.rows() && activity(t, s) >= 0.5) ++t;
      out.push_back({name, start * frame_seconds, t * frame_seconds});
    }
  }
  return out;
}

SpeakerActivity SegmentsToActivity(const SegmentSet& segments, int num_frames,
                                   double frame_seconds,
                                   const std::vector<std::string>& speakers) {
  SpeakerActivity a = SpeakerActivity::Zero(num_frames, speakers.size());
  for (const auto& seg : segments) {
    auto it = std::find(speakers.begin(), speakers.end(), seg.speaker);
    if (it == speakers.end()) {
      throw Error("segment speaker '" + seg.speaker + "' not in speaker list");
    }
    const auto col = it - speakers.begin();
    const int first = static_cast<int>(std::lround(seg.onset / frame_seconds));
    const int last = static_cast<int>(std::lround(seg.offset / frame_seconds));
    for (int t = std::max(0, first); t < std::min(num_frames, last); ++t) {
      a(t, col) = 1.0;
    }
  }
  return a;
}

DerResult ComputeDer(const SegmentSet& hyp, const SegmentSet& ref,
                     const DerOptions& options) {
  if (options.collar < 0.0) throw Error("collar must be non-negative");
  const auto ref_tracks = Tracks(ref);
  const auto hyp_tracks = Tracks(hyp);
  if (ref_tracks.size() > 16) throw Error("too many reference speakers");

  const Tick collar = ToTick(options.collar);
  std::vector<Interval> no_score;
  std::vector<Tick> points;
  for (const auto& tr : ref_tracks) {
    for (const auto& iv : tr.intervals) {
      points.push_back(iv.begin);
      points.push_back(iv.end);
      if (collar > 0) {
        no_score.push_back({iv.begin - collar, iv.begin + collar});
        no_score.push_back({iv.end - collar, iv.end + collar});
      }
    }
  }
  no_score = Merge(std::move(no_score));
  for (const auto& iv : no_score) {
    points.push_back(iv.begin);
    points.push_back(iv.end);
  }
  for (const auto& tr : hyp_tracks) {
    for (const auto& iv : tr.intervals) {
      points.push_back(iv.begin);
      points.push_back(iv.end);
    }
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const SpeakerTrack excluded{"", no_score};

  // Integer sums keep identical inputs at exactly zero error.
  std::vector<std::vector<Tick>> overlap(
      hyp_tracks.size(), std::vector<Tick>(ref_tracks.size(), 0));
  Tick scored = 0, missed = 0, false_alarm = 0, matched = 0;
  std::vector<int> ref_on(ref_tracks.size()), hyp_on(hyp_tracks.size());
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const Tick a = points[i];
    const Tick b = points[i + 1];
    if (excluded.ActiveAt(a)) continue;
    int n_ref = 0, n_hyp = 0;
    for (std::size_t r = 0; r < ref_tracks.size(); ++r) {
      ref_on[r] = ref_tracks[r].ActiveAt(a);
      n_ref += ref_on[r];
    }
    if (!options.score_overlap && n_ref >= 2) continue;
    for (std::size_t h = 0; h < hyp_tracks.size(); ++h) {
      hyp_on[h] = hyp_tracks[h].ActiveAt(a);
      n_hyp += hyp_on[h];
    }
    const Tick d = b - a;
    scored += n_ref * d;
    missed += std::max(0, n_ref - n_hyp) * d;
    false_alarm += std::max(0, n_hyp - n_ref) * d;
    matched += std::min(n_ref, n_hyp) * d;
    for (std::size_t h = 0; h < hyp_tracks.size(); ++h) {
      if (!hyp_on[h]) continue;
      for (std::size_t r = 0; r < ref_tracks.size(); ++r) {
        if (ref_on[r]) overlap[h][r] += d;
      }
    }
  }
  if (scored <= 0) throw Error("no scored reference speech");
  const Tick correct = BestMapping(overlap, 0, 0);
  const auto sec = [](Tick t) { return static_cast<double>(t) / kTicksPerSecond; };
  DerResult res;
  res.scored_seconds = sec(scored);
  res.missed_seconds = sec(missed);
  res.false_alarm_seconds = sec(false_alarm);
  res.confusion_seconds = sec(matched - correct);
  res.missed = res.missed_seconds / res.scored_seconds;
  res.false_alarm = res.false_alarm_seconds / res.scored_seconds;
  res.confusion = res.confusion_seconds / res.scored_seconds;
  res.der = res.missed + res.false_alarm + res.confusion;
  return res;
}

DerResult AggregateDer(const std::vector<DerResult>& results) {
  DerResult total;
  for (const auto& r : results) {
    total.scored_seconds += r.scored_seconds;
    total.missed_seconds += r.missed_seconds;
    total.false_alarm_seconds += r.false_alarm_seconds;
    total.confusion_seconds += r.confusion_seconds;
  }
  if (total.scored_seconds <= 0.0) throw Error("no scored reference speech");
  total.missed = total.missed_seconds / total.scored_seconds;
  total.false_alarm = total.false_alarm_seconds / total.scored_seconds;
  total.confusion = total.confusion_seconds / total.scored_seconds;
  total.der = total.missed + total.false_alarm + total.confusion;
  return total;
}

void WriteRttm(std::ostream& os, const std::string& recording_id,
               const SegmentSet& segments) {
  os << std::fixed << std::setprecision(3);
  for (const auto& s : segments) {
    os << "SPEAKER " << recording_id << " 1 " << s.onset << ' '
       << (s.offset - s.onset) << " <NA> <NA> " << s.speaker
       << " <NA> <NA>\n";
  }
}

std::map<std::string, SegmentSet> ReadRttm(std::istream& is) {
  std::map<std::string, SegmentSet> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty() || f[0] != "SPEAKER") continue;
    if (f.size() < 8) {
      throw Error("malformed RTTM line " + std::to_string(line_no));
    }
    double onset = 0.0, duration = 0.0;
    try {
      onset = std::stod(f[3]);
      duration = std::stod(f[4]);
    } catch (const std::exception&) {
      throw Error("bad number on RTTM line " + std::to_string(line_no));
    }
    if (duration <= 0.0) continue;
    out[f[1]].push_back({f[7], onset, onset + duration});
  }
  return out;
}

}  // namespace diarkit
