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

#include "diarkit/features.h"

#include <algorithm>
#include <cmath>
#include <utility>

namespace diarkit {
namespace {

// Per-frame index of the covering word, -1 for frames outside all words.
std::vector<int> WordIndexPerFrame(const TimeAlignment& alignment) {
  std::vector<int> owner(alignment.frames_total, -1);
  for (int w = 0; w < static_cast<int>(alignment.words.size()); ++w) {
    const auto& word = alignment.words[w];
    for (int t = word.start; t < word.end; ++t) owner[t] = w;
  }
  return owner;
}

template <typename Seq>
void CheckFactor(const Seq&, int factor) {
  if (factor < 1) throw Error("downsampling factor must be >= 1");
}

}  // namespace

PositionTag TagFromPhoneSymbol(std::string_view symbol) {
  auto pos = symbol.rfind('_');
  if (pos == std::string_view::npos || pos + 2 != symbol.size()) {
    return PositionTag::kSilence;
  }
  switch (symbol[pos + 1]) {
    case 'B': return PositionTag::kBegin;
    case 'I': return PositionTag::kInternal;
    case 'E': return PositionTag::kEnd;
    case 'S': return PositionTag::kSingleton;
    default: return PositionTag::kSilence;
  }
}

std::string BasePhone(std::string_view symbol) {
  if (TagFromPhoneSymbol(symbol) == PositionTag::kSilence) {
    return std::string(symbol);
  }
  return std::string(symbol.substr(0, symbol.size() - 2));
}

void TimeAlignment::Validate() const {
  if (frames_total <= 0) throw Error("alignment has no frames");
  if (phones.empty()) throw Error("alignment has no phone spans");
  int cursor = 0;
  for (const auto& p : phones) {
    if (p.start != cursor || p.end <= p.start) {
      throw Error("phone spans do not tile the utterance at frame " +
                  std::to_string(cursor));
    }
    cursor = p.end;
  }
  if (cursor != frames_total) {
    throw Error("phone spans end at " + std::to_string(cursor) +
                " but utterance has " + std::to_string(frames_total) +
                " frames");
  }
  int prev_end = 0;
  for (const auto& w : words) {
    if (w.end <= w.start || w.start < prev_end || w.end > frames_total) {
      throw Error("word '" + w.word + "' span is empty, unsorted or overlaps");
    }
    prev_end = w.end;
  }
  const auto owner = WordIndexPerFrame(*this);
  for (const auto& p : phones) {
    const bool silence = p.tag == PositionTag::kSilence;
    const int first = owner[p.start];
    for (int t = p.start; t < p.end; ++t) {
      if (silence && owner[t] != -1) {
        throw Error("silence phone inside a word at frame " +
                    std::to_string(t));
      }
      if (!silence && (owner[t] == -1 || owner[t] != first)) {
        throw Error("phone '" + p.phone + "' at frame " + std::to_string(t) +
                    " is not inside exactly one word");
      }
    }
  }
  // Word frames must all be speech phones; follows from tiling plus the
  // silence check above.
}

PhoneTable::PhoneTable(std::vector<std::string> base_phones)
    : base_phones_(std::move(base_phones)) {
  for (int i = 0; i < static_cast<int>(base_phones_.size()); ++i) {
    by_symbol_.emplace(base_phones_[i], i);
  }
}

PhoneTable PhoneTable::Default() {
  return PhoneTable({
      "sil", "aa",  "ae",  "ah",  "ao",  "aw",  "ax",  "ay",  "b",
      "ch",  "d",   "dh",  "eh",  "er",  "ey",  "f",   "g",   "hh",
      "ih",  "iy",  "jh",  "k",   "l",   "m",   "n",   "ng",  "ow",
      "oy",  "p",   "r",   "s",   "sh",  "t",   "th",  "uh",  "uw",
      "v",   "w",   "y",   "z",   "zh",  "el",  "em",  "en",  "eng",
      "dx",  "nx",  "ix",  "ux",  "axr", "hv",  "q",   "tcl", "pcl",
  });
}

bool PhoneTable::Contains(std::string_view symbol) const {
  return by_symbol_.find(BasePhone(symbol)) != by_symbol_.end();
}

int PhoneTable::ClassOf(std::string_view symbol) const {
  auto it = by_symbol_.find(BasePhone(symbol));
  if (it == by_symbol_.end()) {
    throw Error("unknown phone '" + std::string(symbol) + "'");
  }
  return it->second;
}

CategoricalFrameSequence CollapsePhones(const TimeAlignment& alignment,
                                        const PhoneTable& table) {
  CategoricalFrameSequence out{"phones", table.num_classes(), kFrameShiftMs,
                               std::vector<int>(alignment.frames_total, 0)};
  for (const auto& p : alignment.phones) {
    const int cls = table.ClassOf(p.phone);
    std::fill(out.labels.begin() + p.start, out.labels.begin() + p.end, cls);
  }
  return out;
}

CategoricalFrameSequence ExtractPositionInWord(const TimeAlignment& alignment) {
  CategoricalFrameSequence out{"position_in_word", kNumPositionTags,
                               kFrameShiftMs,
                               std::vector<int>(alignment.frames_total, 0)};
  for (const auto& p : alignment.phones) {
    std::fill(out.labels.begin() + p.start, out.labels.begin() + p.end,
              static_cast<int>(p.tag));
  }
  return out;
}

CategoricalFrameSequence EncodeWordBoundaries(const TimeAlignment& alignment) {
  const int T = alignment.frames_total;
  const auto owner = WordIndexPerFrame(alignment);
  CategoricalFrameSequence out{"word_boundaries", kNumBoundaryClasses,
                               kFrameShiftMs, std::vector<int>(T, 0)};
  for (int t = 0; t < T; ++t) {
    out.labels[t] = static_cast<int>(owner[t] == -1 ? BoundaryClass::kSilence
                                                    : BoundaryClass::kSpeech);
  }
  // Boundary between frame b-1 and b covers frames b-2 .. b+1. Boundaries
  // are visited in time order so a later one overwrites contested frames.
  for (int b = 1; b < T; ++b) {
    if (owner[b - 1] == owner[b]) continue;
    BoundaryClass cls = BoundaryClass::kWordToWord;
    if (owner[b - 1] == -1) {
      cls = BoundaryClass::kSilenceToSpeech;
    } else if (owner[b] == -1) {
      cls = BoundaryClass::kSpeechToSilence;
    }
    for (int t = std::max(0, b - 2); t < std::min(T, b + 2); ++t) {
      out.labels[t] = static_cast<int>(cls);
    }
  }
  return out;
}

CategoricalFrameSequence DeriveSpeechActivity(const TimeAlignment& alignment) {
  CategoricalFrameSequence out{"speech_activity", 2, kFrameShiftMs,
                               std::vector<int>(alignment.frames_total, 0)};
  for (const auto& p : alignment.phones) {
    const int v = p.tag == PositionTag::kSilence ? 0 : 1;
    std::fill(out.labels.begin() + p.start, out.labels.begin() + p.end, v);
  }
  return out;
}

std::vector<FrameSpan> SubwordTimeSplit(FrameSpan word_span, int n_subwords) {
  const int length = word_span.length();
  if (length <= 0) throw Error("sub-word split of an empty word span");
  if (n_subwords < 1) throw Error("sub-word count must be positive");
  if (n_subwords > length) {
    throw Error("cannot split " + std::to_string(length) + " frames into " +
                std::to_string(n_subwords) + " sub-words");
  }
  const int base = length / n_subwords;
  const int remainder = length % n_subwords;
  std::vector<FrameSpan> spans;
  spans.reserve(n_subwords);
  int cursor = word_span.start;
  for (int i = 0; i < n_subwords; ++i) {
    const int len = base + (i < remainder ? 1 : 0);
    spans.push_back({cursor, cursor + len});
    cursor += len;
  }
  return spans;
}

std::vector<TokenPlacement> PlaceTokens(
    const TimeAlignment& alignment, std::span<const int> word_index_per_token) {
  const int num_words = static_cast<int>(alignment.words.size());
  std::vector<int> count(num_words, 0);
  int prev = -1;
  for (int w : word_index_per_token) {
    if (w < 0 || w >= num_words) {
      throw Error("token refers to word " + std::to_string(w) +
                  " but alignment has " + std::to_string(num_words));
    }
    if (w < prev) throw Error("token word indices must be non-decreasing");
    prev = w;
    ++count[w];
  }
  std::vector<TokenPlacement> placements;
  placements.reserve(word_index_per_token.size());
  for (int w = 0; w < num_words; ++w) {
    if (count[w] == 0) {
      throw Error("word " + std::to_string(w) + " ('" +
                  alignment.words[w].word + "') has no tokens");
    }
    const auto& word = alignment.words[w];
    const auto spans = SubwordTimeSplit({word.start, word.end}, count[w]);
    for (int i = 0; i < count[w]; ++i) placements.push_back({w, i, spans[i]});
  }
  return placements;
}

ScpFrameSequence BuildScpFrames(const TimeAlignment& alignment,
                                std::span<const TokenPlacement> tokens,
                                std::span<const double> posteriors) {
  if (tokens.size() != posteriors.size()) {
    throw Error("token and posterior counts differ");
  }
  for (double p : posteriors) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error("speaker-change posterior " + std::to_string(p) +
                  " outside [0, 1]");
    }
  }
  const int num_words = static_cast<int>(alignment.words.size());
  std::vector<int> first_token(num_words, -1);
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const int w = tokens[i].word_index;
    if (w < 0 || w >= num_words) throw Error("token word index out of range");
    if (first_token[w] == -1 || tokens[i].subword_index <
                                    tokens[first_token[w]].subword_index) {
      first_token[w] = i;
    }
  }
  ScpFrameSequence out{kFrameShiftMs,
                       std::vector<ScpFrame>(alignment.frames_total)};
  for (int w = 0; w < num_words; ++w) {
    if (first_token[w] == -1) {
      throw Error("word " + std::to_string(w) + " has no sub-word tokens");
    }
    const ScpFrame value{posteriors[first_token[w]], 0};
    const auto& word = alignment.words[w];
    std::fill(out.frames.begin() + word.start, out.frames.begin() + word.end,
              value);
  }
  return out;
}

SceFrameSequence BuildSceFrames(const TimeAlignment& alignment,
                                std::span<const TokenPlacement> tokens,
                                const Matrix& embeddings) {
  if (static_cast<Eigen::Index>(tokens.size()) != embeddings.rows()) {
    throw Error("token and embedding counts differ");
  }
  SceFrameSequence out{kFrameShiftMs,
                       Matrix::Zero(alignment.frames_total, embeddings.cols())};
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const auto& span = tokens[i].span;
    if (span.start < 0 || span.end > alignment.frames_total) {
      throw Error("token span outside the utterance");
    }
    for (int t = span.start; t < span.end; ++t) {
      out.values.row(t) = embeddings.row(i);
    }
  }
  return out;
}

CategoricalFrameSequence SimpleDownsample(const CategoricalFrameSequence& seq,
                                          int factor) {
  CheckFactor(seq, factor);
  CategoricalFrameSequence out{seq.feature_name, seq.num_classes,
                               seq.frame_rate_ms * factor, {}};
  for (int t = 0; t < seq.num_frames(); t += factor) {
    out.labels.push_back(seq.labels[t]);
  }
  return out;
}

ScpFrameSequence SimpleDownsample(const ScpFrameSequence& seq, int factor) {
  CheckFactor(seq, factor);
  ScpFrameSequence out{seq.frame_rate_ms * factor, {}};
  for (int t = 0; t < seq.num_frames(); t += factor) {
    out.frames.push_back(seq.frames[t]);
  }
  return out;
}

SceFrameSequence SimpleDownsample(const SceFrameSequence& seq, int factor) {
  CheckFactor(seq, factor);
  const int T = seq.num_frames();
  const int kept = (T + factor - 1) / factor;
  SceFrameSequence out{seq.frame_rate_ms * factor,
                       Matrix(kept, seq.values.cols())};
  for (int i = 0; i < kept; ++i) out.values.row(i) = seq.values.row(i * factor);
  return out;
}

}  // namespace diarkit
