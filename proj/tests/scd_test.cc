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

#include "diarkit/scd.h"

#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gradcheck.h"

namespace diarkit {
namespace {

TokenSequence FromSpeakers(const std::vector<std::string>& speakers) {
  TokenSequence seq;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    seq.tokens.push_back({static_cast<int>(kFirstRegularToken + i % 7),
                          static_cast<int>(i), 0, speakers[i]});
  }
  return seq;
}

TokenSequence RandomSequence(int T, std::mt19937_64& rng) {
  TokenSequence seq;
  int word = 0, sub = 0;
  std::string spk = "A";
  for (int i = 0; i < T; ++i) {
    if (sub > 0 && rng() % 2) {
      seq.tokens.push_back({3 + static_cast<int>(rng() % 20), word, sub++, spk});
      continue;
    }
    if (i > 0) ++word;
    if (rng() % 5 == 0) spk = spk == "A" ? "B" : "A";
    sub = 0;
    seq.tokens.push_back({3 + static_cast<int>(rng() % 20), word, sub++, spk});
  }
  return seq;
}

ScdConfig Small() {
  ScdConfig c;
  c.vocab_size = 30;
  c.model_dim = 8;
  c.heads = 2;
  c.ff_dim = 12;
  c.layers = 1;
  return c;
}

TEST_CASE("change targets") {
  CHECK(BuildScdTargets(FromSpeakers({"A", "A", "B"})) ==
        std::vector<int>{1, 0, 1});
  CHECK(BuildScdTargets(FromSpeakers({"A", "A", "A", "A"})) ==
        std::vector<int>{1, 0, 0, 0});
  CHECK(BuildScdTargets(FromSpeakers({"A", "B", "A", "B"})) ==
        std::vector<int>{1, 1, 1, 1});
  CHECK(BuildScdTargets(TokenSequence{}).empty());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto seq = RandomSequence(1 + static_cast<int>(rng() % 60), rng);
    int turns = 1;
    for (int t = 1; t < seq.size(); ++t) {
      turns += seq.tokens[t].speaker != seq.tokens[t - 1].speaker;
    }
    const auto y = BuildScdTargets(seq);
    CHECK(std::count(y.begin(), y.end(), 1) == turns);
  }
}

TEST_CASE("token sequence validation and I/O") {
  std::mt19937_64 rng(2);
  const auto seq = RandomSequence(40, rng);
  CHECK_NOTHROW(seq.Validate());
  std::stringstream ss;
  WriteTokens(ss, seq);
  const auto back = ReadTokens(ss);
  REQUIRE(back.size() == seq.size());
  for (int i = 0; i < seq.size(); ++i) {
    CHECK(back.tokens[i].id == seq.tokens[i].id);
    CHECK(back.tokens[i].word_index == seq.tokens[i].word_index);
    CHECK(back.tokens[i].subword_index == seq.tokens[i].subword_index);
    CHECK(back.tokens[i].speaker == seq.tokens[i].speaker);
  }
  TokenSequence bad = seq;
  bad.tokens[5].word_index = -1;
  CHECK_THROWS_AS(bad.Validate(), Error);
  TokenSequence gap;
  gap.tokens = {{3, 0, 0, "A"}, {4, 0, 2, "A"}};
  CHECK_THROWS_AS(gap.Validate(), Error);
  std::istringstream junk("3 0 x A\n");
  CHECK_THROWS_AS(ReadTokens(junk), Error);
  std::istringstream empty("");
  CHECK(ReadTokens(empty).size() == 0);
}

TEST_CASE("weighted cross-entropy") {
  const std::vector<double> defaults = {0.935, 0.065};
  const std::vector<double> ones = {1.0, 1.0};
  const std::vector<int> y = {1, 0};
  CHECK(WeightedCeLoss(Matrix::Zero(2, 2), y, defaults) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));
  Matrix l(3, 2);
  l << 0.3, -1.2, 2.0, 0.5, -0.7, 0.1;
  const std::vector<int> y3 = {0, 1, 1};
  double ce = 0;
  for (int i = 0; i < 3; ++i) {
    const double lse = std::log(std::exp(l(i, 0)) + std::exp(l(i, 1)));
    ce += lse - l(i, y3[i]);
  }
  CHECK(std::abs(WeightedCeLoss(l, y3, ones) - ce / 3) < 1e-12);
  Matrix perfect(2, 2);
  perfect << -40, 40, 40, -40;
  CHECK(WeightedCeLoss(perfect, y, defaults) < 1e-15);
  const std::vector<std::uint8_t> mask = {1, 0, 1};
  const double masked = WeightedCeLoss(l, y3, ones, mask);
  const double l0 = std::log(std::exp(l(0, 0)) + std::exp(l(0, 1))) - l(0, 0);
  const double l2 = std::log(std::exp(l(2, 0)) + std::exp(l(2, 1))) - l(2, 1);
  CHECK(std::abs(masked - (l0 + l2) / 2) < 1e-12);
  const std::vector<double> zero_w = {0.0, 1.0};
  CHECK_THROWS_AS(WeightedCeLoss(l, y3, zero_w), Error);
  std::mt19937_64 rng(3);
  Matrix x(4, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = std::normal_distribution<double>()(rng);
  }
  const std::vector<int> y4 = {1, 0, 0, 1};
  const std::vector<std::uint8_t> m4 = {1, 1, 0, 1};
  const auto g = testing::CheckLeafGradients(
      {x}, [&](ag::Tape&, std::vector<ag::Var>& v) {
        return WeightedCeLoss(v[0], y4, defaults, m4);
      });
  CHECK(g.max_rel < 1e-6);
}

TEST_CASE("training windows") {
  std::mt19937_64 rng(4);
  const auto seq20 = RandomSequence(20, rng);
  const auto y20 = BuildScdTargets(seq20);
  for (const auto& w : SampleTrainingWindows(seq20, 20, 5, rng)) {
    CHECK(w.start == 0);
    CHECK(w.ids.size() == 20);
  }
  const auto seq15 = RandomSequence(15, rng);
  const auto w15 = SampleTrainingWindows(seq15, 20, 3, rng);
  REQUIRE(w15.size() == 3);
  for (const auto& w : w15) {
    CHECK(w.start == 0);
    CHECK(w.ids.size() == 20);
    CHECK(std::count(w.mask.begin(), w.mask.end(), 0) == 5);
    for (int i = 15; i < 20; ++i) CHECK(w.ids[i] == kPadToken);
    CHECK(w.targets[0] == 1);
  }
  const auto seq100 = RandomSequence(100, rng);
  std::mt19937_64 a(9), b(9);
  const auto wa = SampleTrainingWindows(seq100, 20, 8, a);
  const auto wb = SampleTrainingWindows(seq100, 20, 8, b);
  const auto y100 = BuildScdTargets(seq100);
  for (std::size_t i = 0; i < wa.size(); ++i) {
    CHECK(wa[i].start == wb[i].start);
    CHECK(wa[i].start >= 0);
    CHECK(wa[i].start <= 80);
    for (int k = 0; k < 20; ++k) {
      CHECK(wa[i].ids[k] == seq100.tokens[wa[i].start + k].id);
      CHECK(wa[i].targets[k] == y100[wa[i].start + k]);
    }
  }
}

TEST_CASE("window plan: the 30-token example") {
  const auto plan = PlanWindows(30, 20, 10);
  REQUIRE(plan.size() == 2);
  CHECK(plan[0].start == 0);
  CHECK(plan[0].keep_begin == 0);
  CHECK(plan[0].keep_end == 15);
  CHECK(plan[1].start == 10);
  CHECK(plan[1].keep_begin == 15);
  CHECK(plan[1].keep_end == 30);
  const auto one = PlanWindows(20, 20, 10);
  REQUIRE(one.size() == 1);
  CHECK(one[0].keep_end == 20);
}

TEST_CASE("window plan covers every token exactly once") {
  for (int T = 1; T <= 200; ++T) {
    std::vector<int> hits(T, 0);
    for (const auto& w : PlanWindows(T, 20, 10)) {
      CHECK(w.keep_begin >= w.start);
      CHECK(w.keep_end <= std::min(T, w.start + 20));
      for (int t = w.keep_begin; t < w.keep_end; ++t) ++hits[t];
    }
    CAPTURE(T);
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
}

TEST_CASE("interior tokens get five tokens of context") {
  for (int T = 21; T <= 120; ++T) {
    for (const auto& w : PlanWindows(T, 20, 10)) {
      for (int t = w.keep_begin; t < w.keep_end; ++t) {
        if (t >= 5 && t < T - 5) {
          CHECK(t - w.start >= 5);
          CHECK(w.start + 20 - t > 5);
        }
      }
    }
  }
}

TEST_CASE("model outputs") {
  ScdModel model(Small());
  ParameterSet p = model.InitParameters(1);
  const std::vector<int> ids = {3, 4, 5, 0, 0};
  const std::vector<std::uint8_t> mask = {1, 1, 1, 0, 0};
  const ScdOutput out = model.Infer(p, ids, mask);
  CHECK(out.logits.rows() == 5);
  CHECK(out.logits.cols() == 2);
  CHECK(out.embeddings.rows() == 5);
  CHECK(out.embeddings.cols() == 8);
  p.at("scd.classifier.weight").setZero();
  p.at("scd.classifier.bias").setZero();
  CHECK(model.Infer(p, ids, mask).logits.isZero());
  const std::vector<int> too_long(25, 3);
  CHECK_THROWS_AS(model.Infer(p, too_long, {}), Error);
  const std::vector<int> oov = {3, 99};
  CHECK_THROWS_AS(model.Infer(p, oov, {}), Error);
}

TEST_CASE("model gradient") {
  ScdModel model(Small());
  const std::vector<int> ids = {3, 7, 5, 9, 0};
  const std::vector<std::uint8_t> mask = {1, 1, 1, 1, 0};
  const std::vector<int> y = {1, 0, 0, 1, 0};
  const std::vector<double> w = {0.935, 0.065};
  const auto g = testing::CheckParamGradients(
      model.InitParameters(2), [&](ParamBinder& b) {
        return WeightedCeLoss(model.Forward(b, ids, mask), y, w, mask);
      });
  INFO(g.worst);
  CHECK(g.max_rel < 1e-4);
}

TEST_CASE("sliding-window inference matches per-window inference") {
  ScdModel model(Small());
  const ParameterSet p = model.InitParameters(3);
  std::mt19937_64 rng(5);
  for (int T : {1, 7, 20, 30, 57}) {
    const auto seq = RandomSequence(T, rng);
    const ScdFeatures f = SlidingWindowInfer(model, p, seq);
    REQUIRE(static_cast<int>(f.posteriors.size()) == T);
    REQUIRE(f.embeddings.rows() == T);
    for (const auto& w : PlanWindows(T, 20, 10)) {
      const int len = std::min(20, T - w.start);
      std::vector<int> ids;
      for (int k = 0; k < len; ++k) ids.push_back(seq.tokens[w.start + k].id);
      std::vector<std::uint8_t> mask(ids.size(), 1);
      const ScdOutput o = model.Infer(p, ids, mask);
      for (int t = w.keep_begin; t < w.keep_end; ++t) {
        const int k = t - w.start;
        const double pc = 1.0 / (1.0 + std::exp(o.logits(k, 0) - o.logits(k, 1)));
        CHECK(f.posteriors[t] == doctest::Approx(pc).epsilon(1e-12));
        CHECK((f.embeddings.row(t) - o.embeddings.row(k)).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK(f.posteriors[t] > 0.0);
        CHECK(f.posteriors[t] < 1.0);
      }
    }
  }
  CHECK(SlidingWindowInfer(model, p, TokenSequence{}).posteriors.empty());
}

TEST_CASE("SCD training learns turn starts") {
  std::mt19937_64 rng(6);
  // Token 3 always opens a turn.
  std::vector<TokenSequence> data;
  for (int i = 0; i < 20; ++i) {
    TokenSequence seq;
    std::string spk = "A";
    for (int t = 0; t < 60; ++t) {
      const bool change = t == 0 || rng() % 6 == 0;
      if (change && t > 0) spk = spk == "A" ? "B" : "A";
      seq.tokens.push_back({change ? 3 : 4 + static_cast<int>(rng() % 10), t, 0, spk});
    }
    data.push_back(seq);
  }
  ScdConfig cfg = Small();
  ScdTrainConfig tc;
  tc.epochs = 8;
  tc.windows_per_sequence = 4;
  tc.batch_size = 8;
  tc.learning_rate = 1e-2;
  tc.rng_seed = 1;
  const auto r = TrainScd(cfg, data, tc);
  REQUIRE(r.metrics.size() == 8);
  CHECK(r.metrics.back().loss < r.metrics.front().loss);
  CHECK(r.metrics.back().accuracy > 0.95);
  const auto again = TrainScd(cfg, data, tc);
  CHECK(again.params == r.params);
}

TEST_CASE("config validation") {
  ScdConfig c;
  CHECK_NOTHROW(c.Validate());
  c.hop = 25;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = ScdConfig{};
  c.heads = 5;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = ScdConfig{};
  c.vocab_size = 2;
  CHECK_THROWS_AS(c.Validate(), Error);
}

}  // namespace
}  // namespace diarkit
