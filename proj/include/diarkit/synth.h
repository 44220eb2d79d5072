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

#ifndef DIARKIT_SYNTH_H_
#define DIARKIT_SYNTH_H_

// Synthetic two-speaker conversations with consistent features, alignment,
// transcript and reference labels.
//
// Each recording alternates speaker turns separated by pauses or short
// overlaps. Turns are strings of lexicon words, words are phone strings, and
// a frame's 80-dim feature vector is the sum over active speakers of the
// speaker prototype plus a phone pattern, plus white noise; frames with no
// speaker use a silence prototype. The "ASR" alignment is the ground truth
// merged into one stream: where two words overlap, the later word loses the
// overlapped frames.

#include <cstdint>
#include <string>
#include <vector>

#include "diarkit/features.h"
#include "diarkit/scd.h"
#include "diarkit/types.h"

namespace diarkit {

struct SynthConfig {
  int num_train = 200;
  int num_dev = 40;
  int num_test = 40;
  // Disjoint speaker pools per split.
  int train_speakers = 40;
  int dev_speakers = 10;
  int test_speakers = 10;
  int min_frames = 2800;
  int max_frames = 3200;

  double prototype_scale = 1.0;  // stddev of speaker means per bin
  double phone_scale = 0.5;      // stddev of phone patterns per bin
  double silence_level = -1.0;   // mean of the silence prototype
  double noise_scale = 1.0;      // per-frame white noise

  // Turn length = min_turn_frames + Geometric(mean_turn_frames).
  int min_turn_frames = 100;
  double mean_turn_frames = 250.0;
  double overlap_probability = 0.2;
  int max_overlap_frames = 40;
  double mean_pause_frames = 30.0;
  // Probability of a short pause between two words of one turn.
  double word_pause_probability = 0.1;

  int vocabulary_size = 200;
  double mean_word_phones = 3.0;  // geometric, at least 1
  int max_word_phones = 8;
  int min_phone_frames = 3;
  int max_phone_frames = 8;
  int phones_per_subword = 2;
  // Leading turn words drawn from a small opener set.
  int num_openers = 8;
  double opener_probability = 0.8;
  double noise_word_probability = 0.02;
  double laugh_word_probability = 0.02;

  // Probability of replacing a phone in the ASR alignment with a random
  // other phone (tags are kept).
  double label_noise = 0.0;

  std::uint64_t seed = 1;

  // Throws Error naming the first violated constraint.
  void Validate() const;
  int NumRecordings() const { return num_train + num_dev + num_test; }
};

// One entry of the pronunciation lexicon.
struct LexiconWord {
  std::string text;
  std::vector<int> phones;     // PhoneTable classes, never silence
  std::vector<int> token_ids;  // sub-word tokens
};

struct Lexicon {
  std::vector<LexiconWord> words;
  int num_openers = 0;  // words[0 .. num_openers) start turns
  int noise_word = -1;  // maps to kNoiseToken
  int laugh_word = -1;  // maps to kLaughToken
  int vocab_size = 0;   // token vocabulary including specials
};

Lexicon BuildLexicon(const SynthConfig& config);

enum class Split { kTrain, kDev, kTest };
std::string ToString(Split split);
Split ParseSplit(const std::string& s);

struct Recording {
  std::string id;
  Split split = Split::kTrain;
  std::vector<std::string> speakers;  // column order of `activity`
  Matrix features;                    // T x 80, float-representable
  TimeAlignment alignment;            // merged ASR stream
  TokenSequence tokens;
  SpeakerActivity activity;           // T x 2 reference
  // Generator truth for the merged stream's position tags; empty when the
  // recording was read back from disk.
  std::vector<int> frame_tags;

  int num_frames() const { return static_cast<int>(features.rows()); }
};

// Recording `index` of the corpus (train first, then dev, then test). Each
// recording draws from its own seed, so generation order does not matter.
Recording SynthConversation(const SynthConfig& config, const Lexicon& lexicon,
                            int index);

std::vector<Recording> SynthCorpus(const SynthConfig& config);

}  // namespace diarkit

#endif  // DIARKIT_SYNTH_H_
