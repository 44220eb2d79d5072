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

#include "diarkit/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "diarkit/feature_io.h"

namespace diarkit {
namespace {

// Independent streams derived from the corpus seed.
enum Stream : std::uint64_t {
  kLexiconStream = 1,
  kSpeakerStream = 2,
  kPhoneStream = 3,
  kRecordingStream = 4,
};

std::mt19937_64 MakeRng(std::uint64_t seed, Stream stream,
                        std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

bool Bernoulli(std::mt19937_64& rng, double p) {
  return std::bernoulli_distribution(p)(rng);
}

int UniformInt(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Geometric count with the given mean (0 allowed).
int Geometric(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::geometric_distribution<int>(1.0 / (mean + 1.0))(rng);
}

std::string PhoneSymbol(const PhoneTable& table, int cls, PositionTag tag) {
  static const char kSuffix[] = {' ', 'S', 'B', 'I', 'E'};
  return table.base_phones()[cls] + "_" + kSuffix[static_cast<int>(tag)];
}

PositionTag TagAt(int i, int n) {
  if (n == 1) return PositionTag::kSingleton;
  if (i == 0) return PositionTag::kBegin;
  if (i == n - 1) return PositionTag::kEnd;
  return PositionTag::kInternal;
}

struct TimedPhone {
  int start, end, cls;
  PositionTag tag;
};

struct TimedWord {
  int start, end;
  int lexicon_index;
  int speaker;  // column
  std::vector<TimedPhone> phones;
};

Matrix Prototype(std::uint64_t seed, Stream stream, int index, double mean,
                 double scale) {
  auto rng = MakeRng(seed, stream, index);
  std::normal_distribution<double> normal(mean, scale);
  Matrix p(1, kAcousticDim);
  for (int f = 0; f < kAcousticDim; ++f) p(0, f) = normal(rng);
  return p;
}

int SplitOffset(const SynthConfig& c, Split split) {
  switch (split) {
    case Split::kTrain: return 0;
    case Split::kDev: return c.train_speakers;
    case Split::kTest: return c.train_speakers + c.dev_speakers;
  }
  return 0;
}

int SplitPool(const SynthConfig& c, Split split) {
  switch (split) {
    case Split::kTrain: return c.train_speakers;
    case Split::kDev: return c.dev_speakers;
    case Split::kTest: return c.test_speakers;
  }
  return 0;
}

std::string SpeakerName(int global_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%03d", global_index);
  return buf;
}

}  // namespace

void SynthConfig::Validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(std::string(name) + " must be in [0, 1]");
    }
  };
  prob(overlap_probability, "overlap_probability");
  prob(word_pause_probability, "word_pause_probability");
  prob(opener_probability, "opener_probability");
  prob(noise_word_probability, "noise_word_probability");
  prob(laugh_word_probability, "laugh_word_probability");
  prob(label_noise, "label_noise");
  if (noise_word_probability + laugh_word_probability > 1.0) {
    throw Error("noise and laugh word probabilities exceed 1");
  }
  if (num_train < 0 || num_dev < 0 || num_test < 0 || NumRecordings() == 0) {
    throw Error("recording counts must be non-negative and not all zero");
  }
  auto pool = [](int recordings, int speakers, const char* split) {
    if (recordings > 0 && speakers < 2) {
      throw Error(std::string(split) + " split needs at least 2 speakers");
    }
  };
  pool(num_train, train_speakers, "train");
  pool(num_dev, dev_speakers, "dev");
  pool(num_test, test_speakers, "test");
  if (min_frames < 8 || max_frames < min_frames) {
    throw Error("duration range must satisfy 8 <= min_frames <= max_frames");
  }
  if (min_turn_frames < 1 || mean_turn_frames < 0.0 || mean_pause_frames < 0.0) {
    throw Error("turn and pause lengths must be positive");
  }
  if (max_overlap_frames < 0) throw Error("max_overlap_frames must be >= 0");
  if (max_overlap_frames >= min_turn_frames) {
    throw Error("max_overlap_frames (" + std::to_string(max_overlap_frames) +
                ") must be shorter than min_turn_frames (" +
                std::to_string(min_turn_frames) + ")");
  }
  if (vocabulary_size < num_openers + 1 || num_openers < 0) {
    throw Error("vocabulary_size must exceed num_openers");
  }
  if (mean_word_phones < 1.0 || max_word_phones < 1) {
    throw Error("words need at least one phone");
  }
  if (min_phone_frames < 1 || max_phone_frames < min_phone_frames) {
    throw Error("phone duration range is invalid");
  }
  if (phones_per_subword < 1) throw Error("phones_per_subword must be >= 1");
  if (prototype_scale < 0.0 || phone_scale < 0.0 || noise_scale < 0.0) {
    throw Error("scales must be non-negative");
  }
}

Lexicon BuildLexicon(const SynthConfig& config) {
  config.Validate();
  const PhoneTable table = PhoneTable::Default();
  const int speech_phones = table.num_classes() - 1;
  auto rng = MakeRng(config.seed, kLexiconStream);
  Lexicon lex;
  lex.num_openers = config.num_openers;
  int next_token = kFirstRegularToken;
  auto draw_phones = [&](int n) {
    std::vector<int> phones(n);
    for (int& p : phones) p = UniformInt(rng, 1, speech_phones);
    return phones;
  };
  for (int w = 0; w < config.vocabulary_size; ++w) {
    LexiconWord word;
    word.text = "w" + std::to_string(w);
    const int n = std::min(config.max_word_phones,
                           1 + Geometric(rng, config.mean_word_phones - 1.0));
    word.phones = draw_phones(n);
    const int n_sub =
        (n + config.phones_per_subword - 1) / config.phones_per_subword;
    for (int j = 0; j < n_sub; ++j) word.token_ids.push_back(next_token++);
    lex.words.push_back(std::move(word));
  }
  lex.noise_word = static_cast<int>(lex.words.size());
  lex.words.push_back({"<noise>", draw_phones(2), {kNoiseToken}});
  lex.laugh_word = static_cast<int>(lex.words.size());
  lex.words.push_back({"<laugh>", draw_phones(2), {kLaughToken}});
  lex.vocab_size = next_token;
  return lex;
}

std::string ToString(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + s + "'");
}

Recording SynthConversation(const SynthConfig& config, const Lexicon& lexicon,
                            int index) {
  config.Validate();
  if (index < 0 || index >= config.NumRecordings()) {
    throw Error("recording index out of range");
  }
  const PhoneTable table = PhoneTable::Default();
  Recording rec;
  int local = index;
  if (local < config.num_train) {
    rec.split = Split::kTrain;
  } else if ((local -= config.num_train) < config.num_dev) {
    rec.split = Split::kDev;
  } else {
    local -= config.num_dev;
    rec.split = Split::kTest;
  }
  char id[32];
  std::snprintf(id, sizeof(id), "%s%04d", ToString(rec.split).c_str(), local);
  rec.id = id;

  auto rng = MakeRng(config.seed, kRecordingStream, index);
  const int T = UniformInt(rng, config.min_frames, config.max_frames);
  const int pool = SplitPool(config, rec.split);
  const int offset = SplitOffset(config, rec.split);
  const int a = UniformInt(rng, 0, pool - 1);
  int b = UniformInt(rng, 0, pool - 2);
  if (b >= a) ++b;
  const int global[2] = {offset + a, offset + b};
  rec.speakers = {SpeakerName(global[0]), SpeakerName(global[1])};

  // Turn timeline.
  const int regular_words = config.vocabulary_size - config.num_openers;
  std::vector<TimedWord> words;
  int last_end[2] = {0, 0};
  int speaker = UniformInt(rng, 0, 1);
  int t = Geometric(rng, config.mean_pause_frames);
  while (t < T) {
    const int start = std::max(t, last_end[speaker]);
    const int target =
        config.min_turn_frames + Geometric(rng, config.mean_turn_frames);
    int pos = start;
    bool first = true;
    while (pos - start < target) {
      int w;
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (first && config.num_openers > 0 &&
          Bernoulli(rng, config.opener_probability)) {
        w = UniformInt(rng, 0, config.num_openers - 1);
      } else if (u < config.noise_word_probability) {
        w = lexicon.noise_word;
      } else if (u < config.noise_word_probability +
                         config.laugh_word_probability) {
        w = lexicon.laugh_word;
      } else {
        w = config.num_openers + UniformInt(rng, 0, regular_words - 1);
      }
      first = false;
      TimedWord word{pos, pos, w, speaker, {}};
      const auto& phones = lexicon.words[w].phones;
      for (int i = 0; i < static_cast<int>(phones.size()); ++i) {
        const int d =
            UniformInt(rng, config.min_phone_frames, config.max_phone_frames);
        word.phones.push_back(
            {pos, pos + d, phones[i],
             TagAt(i, static_cast<int>(phones.size()))});
        pos += d;
      }
      word.end = pos;
      words.push_back(std::move(word));
      if (Bernoulli(rng, config.word_pause_probability)) {
        pos += UniformInt(rng, 1, 10);
      }
    }
    const int turn_end = words.back().end;
    last_end[speaker] = turn_end;
    if (config.max_overlap_frames > 0 &&
        Bernoulli(rng, config.overlap_probability)) {
      t = turn_end - UniformInt(rng, 1, config.max_overlap_frames);
    } else {
      t = turn_end + Geometric(rng, config.mean_pause_frames);
    }
    speaker = 1 - speaker;
  }
  std::erase_if(words, [T](const TimedWord& w) { return w.end > T; });
  std::stable_sort(words.begin(), words.end(),
                   [](const TimedWord& x, const TimedWord& y) {
                     return x.start != y.start ? x.start < y.start
                                               : x.speaker < y.speaker;
                   });

  // Per-speaker frame truth.
  std::vector<int> phone_at[2], tag_at[2], word_start_at[2];
  for (int s = 0; s < 2; ++s) {
    phone_at[s].assign(T, -1);
    tag_at[s].assign(T, 0);
    word_start_at[s].assign(T, -1);
  }
  rec.activity = SpeakerActivity::Zero(T, 2);
  for (const auto& w : words) {
    for (const auto& p : w.phones) {
      for (int f = p.start; f < p.end; ++f) {
        phone_at[w.speaker][f] = p.cls;
        tag_at[w.speaker][f] = static_cast<int>(p.tag);
        word_start_at[w.speaker][f] = w.start;
      }
    }
    rec.activity.block(w.start, w.speaker, w.end - w.start, 1).setOnes();
  }

  // Acoustics.
  const Matrix silence =
      Prototype(config.seed, kSpeakerStream, -1, config.silence_level, 0.3);
  Matrix proto[2];
  for (int s = 0; s < 2; ++s) {
    proto[s] = Prototype(config.seed, kSpeakerStream, global[s], 0.0,
                         config.prototype_scale);
  }
  std::vector<Matrix> pattern(table.num_classes());
  for (int c = 0; c < table.num_classes(); ++c) {
    pattern[c] =
        Prototype(config.seed, kPhoneStream, c, 0.0, config.phone_scale);
  }
  std::normal_distribution<double> noise(0.0, config.noise_scale);
  Matrix x(T, kAcousticDim);
  for (int f = 0; f < T; ++f) {
    Matrix row = Matrix::Zero(1, kAcousticDim);
    bool any = false;
    for (int s = 0; s < 2; ++s) {
      if (phone_at[s][f] < 0) continue;
      row += proto[s] + pattern[phone_at[s][f]];
      any = true;
    }
    if (!any) row = silence;
    for (int d = 0; d < kAcousticDim; ++d) x(f, d) = row(0, d) + noise(rng);
  }
  rec.features = RoundToFloat(x);

  // Merged ASR stream: each word loses frames already claimed by an earlier
  // starting word.
  TimeAlignment& al = rec.alignment;
  al.frames_total = T;
  int claimed = 0;
  std::vector<const TimedWord*> kept_source;
  for (const auto& w : words) {
    const int begin = std::max(w.start, claimed);
    if (begin >= w.end) continue;
    for (const auto& p : w.phones) {
      if (p.end <= begin) continue;
      std::string sym = PhoneSymbol(table, p.cls, p.tag);
      if (config.label_noise > 0.0 && Bernoulli(rng, config.label_noise)) {
        int other = UniformInt(rng, 1, table.num_classes() - 2);
        if (other >= p.cls) ++other;
        sym = PhoneSymbol(table, other, p.tag);
      }
      al.phones.push_back({std::max(p.start, begin), p.end, sym, p.tag});
    }
    al.words.push_back({begin, w.end, lexicon.words[w.lexicon_index].text,
                        rec.speakers[w.speaker]});
    kept_source.push_back(&w);
    claimed = w.end;
  }
  // Fill the gaps with silence.
  std::vector<PhoneSpan> tiled;
  int cursor = 0;
  for (auto& p : al.phones) {
    if (p.start > cursor) tiled.push_back({cursor, p.start, "sil", PositionTag::kSilence});
    cursor = p.end;
    tiled.push_back(std::move(p));
  }
  if (cursor < T) tiled.push_back({cursor, T, "sil", PositionTag::kSilence});
  al.phones = std::move(tiled);
  al.Validate();

  // Position truth: the earliest-starting active word owns the frame.
  rec.frame_tags.assign(T, 0);
  for (int f = 0; f < T; ++f) {
    int owner = -1;
    for (int s = 0; s < 2; ++s) {
      if (phone_at[s][f] < 0) continue;
      if (owner < 0 || word_start_at[s][f] < word_start_at[owner][f]) {
        owner = s;
      }
    }
    if (owner >= 0) rec.frame_tags[f] = tag_at[owner][f];
  }

  // Transcript. A clipped word keeps at most one token per remaining frame.
  for (int wi = 0; wi < static_cast<int>(al.words.size()); ++wi) {
    const auto& src = *kept_source[wi];
    const auto& ids = lexicon.words[src.lexicon_index].token_ids;
    const int n = std::min<int>(ids.size(), al.words[wi].end - al.words[wi].start);
    for (int j = 0; j < n; ++j) {
      rec.tokens.tokens.push_back({ids[j], wi, j, rec.speakers[src.speaker]});
    }
  }
  return rec;
}

std::vector<Recording> SynthCorpus(const SynthConfig& config) {
  const Lexicon lexicon = BuildLexicon(config);
  std::vector<Recording> out;
  out.reserve(config.NumRecordings());
  for (int i = 0; i < config.NumRecordings(); ++i) {
    out.push_back(SynthConversation(config, lexicon, i));
  }
  return out;
}

}  // namespace diarkit
