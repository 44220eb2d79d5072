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

#ifndef DIARKIT_SCORING_H_
#define DIARKIT_SCORING_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "diarkit/types.h"

namespace diarkit {

struct Segment {
  std::string speaker;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, > onset
};
using SegmentSet = std::vector<Segment>;

// activity = (z >= threshold), then an optional per-speaker median filter of
// odd width `median_window` (1 disables it).
SpeakerActivity Binarize(const Matrix& posteriors, double threshold = 0.5,
                         int median_window = 1);

// Maximal runs of active frames; frame t spans [t * fs, (t + 1) * fs).
// Speaker s is named speaker_names[s], or "spk<s>" when names are omitted.
SegmentSet ActivityToSegments(const SpeakerActivity& activity,
                              double frame_seconds = 0.04,
                              const std::vector<std::string>& speaker_names = {});

// Inverse of ActivityToSegments for the given speaker order; boundaries are
// rounded to the nearest frame.
SpeakerActivity SegmentsToActivity(const SegmentSet& segments, int num_frames,
                                   double frame_seconds,
                                   const std::vector<std::string>& speakers);

struct DerOptions {
  double collar = 0.25;        // seconds on each side of reference boundaries
  bool score_overlap = true;   // false drops regions with >= 2 ref speakers
};

struct DerResult {
  double der = 0.0;  // fractions of scored reference speech
  double missed = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double scored_seconds = 0.0;  // reference speaker-time that was scored
  double missed_seconds = 0.0;
  double false_alarm_seconds = 0.0;
  double confusion_seconds = 0.0;
};

// Diarization error rate under the optimal one-to-one mapping of hypothesis
// to reference speakers. Throws Error when no reference speech is scored.
DerResult ComputeDer(const SegmentSet& hyp, const SegmentSet& ref,
                     const DerOptions& options = {});

// Time-weighted combination of per-recording results.
DerResult AggregateDer(const std::vector<DerResult>& results);

// RTTM: SPEAKER <rec> 1 <onset> <duration> <NA> <NA> <speaker> <NA> <NA>
void WriteRttm(std::ostream& os, const std::string& recording_id,
               const SegmentSet& segments);
// Segments grouped by recording id; non-SPEAKER lines are skipped.
std::map<std::string, SegmentSet> ReadRttm(std::istream& is);

}  // namespace diarkit

#endif  // DIARKIT_SCORING_H_
