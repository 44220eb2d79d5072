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

#ifndef DIARKIT_FEATURES_H_
#define DIARKIT_FEATURES_H_

// Frame-level ASR features derived from a time alignment: collapsed phones,
// position-in-word, word boundaries, speech activity, and the lexical
// speaker-change features (posteriors and embeddings) broadcast over
// sub-word time spans.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diarkit/types.h"

namespace diarkit {

enum class PositionTag : std::uint8_t {
  kSilence = 0,
  kSingleton = 1,
  kBegin = 2,
  kInternal = 3,
  kEnd = 4,
};
inline constexpr int kNumPositionTags = 5;

// Word-boundary classes. Label index = class number - 1.
enum class BoundaryClass : int {
  kSilence = 0,        // silence frame not at any boundary
  kSpeech = 1,         // speech frame not at a boundary
  kSilenceToSpeech = 2,
  kSpeechToSilence = 3,
  kWordToWord = 4,
};
inline constexpr int kNumBoundaryClasses = 5;

struct WordSpan {
  int start = 0;
  int end = 0;  // exclusive
  std::string word;
  std::string speaker;
};

// `phone` is the position-dependent symbol ("ih_B", "ax_S", "sil").
struct PhoneSpan {
  int start = 0;
  int end = 0;  // exclusive
  std::string phone;
  PositionTag tag = PositionTag::kSilence;
};

struct TimeAlignment {
  int frames_total = 0;
  std::vector<WordSpan> words;
  std::vector<PhoneSpan> phones;

  // Throws Error if phones do not tile [0, frames_total), words overlap or
  // are unsorted, or a non-silence phone is not inside exactly one word.
  void Validate() const;
};

// Splits a position-dependent phone symbol into its base phone and tag.
// "sil" (or any bare symbol) is silence.
PositionTag TagFromPhoneSymbol(std::string_view symbol);
std::string BasePhone(std::string_view symbol);

// Maps position-dependent phone symbols to base-phone class indices.
class PhoneTable {
 public:
  PhoneTable() = default;
  explicit PhoneTable(std::vector<std::string> base_phones);

  // 53 speech phones plus "sil": the 54-class inventory.
  static PhoneTable Default();

  int num_classes() const { return static_cast<int>(base_phones_.size()); }
  const std::vector<std::string>& base_phones() const { return base_phones_; }
  bool Contains(std::string_view symbol) const;
  // Throws Error naming the phone if unknown.
  int ClassOf(std::string_view symbol) const;
  int SilenceClass() const { return ClassOf("sil"); }

 private:
  std::vector<std::string> base_phones_;
  std::map<std::string, int, std::less<>> by_symbol_;
};

struct CategoricalFrameSequence {
  std::string feature_name;
  int num_classes = 0;
  int frame_rate_ms = kFrameShiftMs;
  std::vector<int> labels;

  int num_frames() const { return static_cast<int>(labels.size()); }
};

struct ScpFrame {
  double posterior = 0.0;
  int non_speech = 1;
  bool operator==(const ScpFrame&) const = default;
};

struct ScpFrameSequence {
  int frame_rate_ms = kFrameShiftMs;
  std::vector<ScpFrame> frames;

  int num_frames() const { return static_cast<int>(frames.size()); }
};

struct SceFrameSequence {
  int frame_rate_ms = kFrameShiftMs;
  Matrix values;  // T x D_sce

  int num_frames() const { return static_cast<int>(values.rows()); }
};

CategoricalFrameSequence CollapsePhones(const TimeAlignment& alignment,
                                        const PhoneTable& table);
CategoricalFrameSequence ExtractPositionInWord(const TimeAlignment& alignment);
CategoricalFrameSequence EncodeWordBoundaries(const TimeAlignment& alignment);
CategoricalFrameSequence DeriveSpeechActivity(const TimeAlignment& alignment);

// Splits [span.start, span.end) into n contiguous spans whose lengths differ
// by at most one frame, longer spans first.
std::vector<FrameSpan> SubwordTimeSplit(FrameSpan word_span, int n_subwords);

// One sub-word token placed on the frame grid.
struct TokenPlacement {
  int word_index = 0;  // index into TimeAlignment::words
  int subword_index = 0;
  FrameSpan span;
};

// Places tokens on the frame grid by splitting each word's interval evenly
// among its sub-words. `word_index_per_token` must be non-decreasing and
// every word must own at least one token.
std::vector<TokenPlacement> PlaceTokens(
    const TimeAlignment& alignment, std::span<const int> word_index_per_token);

// `posteriors[i]` belongs to `tokens[i]`.
ScpFrameSequence BuildScpFrames(const TimeAlignment& alignment,
                                std::span<const TokenPlacement> tokens,
                                std::span<const double> posteriors);

// Row i of `embeddings` belongs to `tokens[i]`.
SceFrameSequence BuildSceFrames(const TimeAlignment& alignment,
                                std::span<const TokenPlacement> tokens,
                                const Matrix& embeddings);

// Keeps frames whose index is a multiple of `factor`.
CategoricalFrameSequence SimpleDownsample(const CategoricalFrameSequence& seq,
                                          int factor);
ScpFrameSequence SimpleDownsample(const ScpFrameSequence& seq, int factor);
SceFrameSequence SimpleDownsample(const SceFrameSequence& seq, int factor);

}  // namespace diarkit

#endif  // DIARKIT_FEATURES_H_
