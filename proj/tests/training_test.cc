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

#include "diarkit/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.h"

namespace diarkit {
namespace {

Matrix RandomProbs(int T, int S, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  Matrix m(T, S);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix RandomActivity(int T, int S, std::mt19937_64& rng) {
  Matrix m(T, S);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng() % 2;
  return m;
}

// Brute force over all permutations, first minimum in lexicographic order.
PitResult PitOracle(const Matrix& z, const Matrix& y) {
  const int S = static_cast<int>(z.cols());
  std::vector<int> perm(S);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best{1e300, {}};
  do {
    double sum = 0;
    for (int t = 0; t < z.rows(); ++t) {
      for (int s = 0; s < S; ++s) {
        const double p = std::clamp(z(t, s), kBceEpsilon, 1 - kBceEpsilon);
        const double r = y(t, perm[s]);
        sum -= r * std::log(p) + (1 - r) * std::log(1 - p);
      }
    }
    const double loss = sum / static_cast<double>(z.size());
    if (loss < best.loss) best = {loss, perm};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST_CASE("PIT: the single-frame example") {
  Matrix y(1, 2), z(1, 2);
  y << 1, 0;
  z << 0.8, 0.4;
  const double identity = (-std::log(0.8) - std::log(0.6)) / 2;
  const double swap = (-std::log(0.4) - std::log(0.2)) / 2;
  CHECK(identity < swap);
  const PitResult r = PitBceLoss(z, y);
  CHECK(std::abs(r.loss - identity) < 1e-12);
  CHECK(r.permutation == std::vector<int>{0, 1});
  const std::vector<int> sw = {1, 0};
  CHECK(std::abs(MeanBce(z, y, sw) - swap) < 1e-12);
}

TEST_CASE("PIT: perfect and swapped predictions") {
  Matrix y(3, 2);
  y << 1, 0, 0, 1, 1, 1;
  const PitResult a = PitBceLoss(y, y);
  CHECK(a.loss == doctest::Approx(-std::log(1 - kBceEpsilon)).epsilon(1e-9));
  CHECK(a.permutation == std::vector<int>{0, 1});
  Matrix swapped = y;
  swapped.col(0).swap(swapped.col(1));
  const PitResult b = PitBceLoss(swapped, y);
  CHECK(b.loss == doctest::Approx(a.loss).epsilon(1e-12));
  CHECK(b.permutation == std::vector<int>{1, 0});
}

TEST_CASE("PIT: ties take the lexicographically first permutation") {
  Matrix z = Matrix::Constant(4, 3, 0.5);
  Matrix y(4, 3);
  y << 1, 0, 1, 0, 1, 0, 1, 1, 0, 0, 0, 1;
  CHECK(PitBceLoss(z, y).permutation == std::vector<int>{0, 1, 2});
}

TEST_CASE("PIT matches a brute-force oracle and is permutation invariant") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const int S = 2 + i % 2;
    const Matrix z = RandomProbs(5, S, rng), y = RandomActivity(5, S, rng);
    const PitResult got = PitBceLoss(z, y), want = PitOracle(z, y);
    CHECK(std::abs(got.loss - want.loss) < 1e-12);
    CHECK(got.permutation == want.permutation);
    Matrix yp = y;
    yp.col(0).swap(yp.col(1));
    CHECK(std::abs(PitBceLoss(z, yp).loss - got.loss) < 1e-12);
    std::vector<int> id(S);
    std::iota(id.begin(), id.end(), 0);
    CHECK(got.loss <= MeanBce(z, y, id));
  }
}

TEST_CASE("PIT clamps exact 0 and 1") {
  Matrix z(1, 2), y(1, 2);
  z << 0.0, 1.0;
  y << 1, 0;
  const double want = -std::log(kBceEpsilon);
  CHECK(PitBceLoss(z, y).loss ==
        doctest::Approx(-std::log(1 - kBceEpsilon)).epsilon(1e-9));
  const std::vector<int> id = {0, 1};
  CHECK(MeanBce(z, y, id) == doctest::Approx(want));
  CHECK_THROWS_AS(PitBceLoss(Matrix::Constant(2, 2, 0.5), Matrix::Zero(3, 2)),
                  Error);
}

TEST_CASE("PIT gradient") {
  std::mt19937_64 rng(2);
  const Matrix y = RandomActivity(4, 2, rng);
  const auto g = testing::CheckLeafGradients(
      {RandomProbs(4, 2, rng)}, [&](ag::Tape&, std::vector<ag::Var>& v) {
        return PitBceLoss(v[0], y);
      });
  CHECK(g.max_rel < 1e-6);
  ag::Tape tape;
  std::vector<int> perm;
  Matrix z = RandomProbs(4, 2, rng);
  ag::Var l = PitBceLoss(tape.Leaf(z), y, &perm);
  CHECK(l.value()(0, 0) == doctest::Approx(PitBceLoss(z, y).loss));
  CHECK(perm == PitBceLoss(z, y).permutation);
}

TEST_CASE("auxiliary cross-entropy") {
  const std::vector<int> labels = {0, 3, 4};
  CHECK(AuxCeLoss(Matrix::Zero(3, 5), labels) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
  Matrix big = Matrix::Zero(3, 5);
  for (int t = 0; t < 3; ++t) big(t, labels[t]) = 50.0;
  CHECK(AuxCeLoss(big, labels) < 1e-20);
  // Two frames, two classes: -log(e^1/(e^1+e^0)) and -log(e^0/(e^0+e^2)).
  Matrix l(2, 2);
  l << 1, 0, 0, 2;
  const std::vector<int> two = {0, 0};
  const double want =
      (std::log(1 + std::exp(-1.0)) + std::log(1 + std::exp(2.0))) / 2;
  CHECK(AuxCeLoss(l, two) == doctest::Approx(want).epsilon(1e-12));
  const std::vector<int> bad = {0, 2};
  CHECK_THROWS_AS(AuxCeLoss(l, bad), Error);
  std::mt19937_64 rng(3);
  const auto g = testing::CheckLeafGradients(
      {RandomProbs(3, 5, rng) * 4}, [&](ag::Tape&, std::vector<ag::Var>& v) {
        return AuxCeLoss(v[0], labels);
      });
  CHECK(g.max_rel < 1e-6);
}

TEST_CASE("combined loss") {
  CHECK(CombinedLoss(1.0, 0.5, 0.0) == 1.0);
  CHECK(CombinedLoss(1.0, 0.5, 0.2) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(CombinedLoss(1.0, 0.5, 0.6) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK_THROWS_AS(CombinedLoss(1.0, 0.5, -0.1), Error);
  CHECK(DefaultAlpha(AsrFeatureName::kPhones) == 0.6);
  CHECK(DefaultAlpha(AsrFeatureName::kWordBoundaries) == 0.6);
  CHECK(DefaultAlpha(AsrFeatureName::kPositionInWord) == 0.2);
}

TEST_CASE("SpecAugment") {
  std::mt19937_64 rng(4);
  Matrix x = Matrix::Constant(100, 80, 3.0);
  SpecAugmentConfig none{2, 0, 2, 0};
  CHECK(SpecAugment(x, none, rng) == x);
  SpecAugmentConfig freq_only{2, 2, 0, 0};
  for (int i = 0; i < 200; ++i) {
    const Matrix y = SpecAugment(x, freq_only, rng);
    int zero_cols = 0;
    for (int c = 0; c < 80; ++c) {
      if (y.col(c).isZero()) {
        ++zero_cols;
      } else {
        CHECK(y.col(c) == x.col(c));
      }
    }
    CHECK(zero_cols <= 4);
  }
  SpecAugmentConfig huge{1, 500, 1, 500};
  const Matrix y = SpecAugment(Matrix::Constant(5, 4, 1.0), huge, rng);
  CHECK(y.rows() == 5);
  std::mt19937_64 a(9), b(9);
  const SpecAugmentConfig def;
  CHECK(SpecAugment(x, def, a) == SpecAugment(x, def, b));
}

TEST_CASE("Noam schedule") {
  CHECK(NoamLearningRate(1, 4, 4) == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(NoamLearningRate(500, 256, 500) ==
        doctest::Approx(1 / std::sqrt(256.0 * 500)).epsilon(1e-12));
  for (int s = 1; s < 500; ++s) {
    CHECK(NoamLearningRate(s, 256, 500) < NoamLearningRate(s + 1, 256, 500));
  }
  CHECK(NoamLearningRate(2000, 256, 500) < NoamLearningRate(1000, 256, 500));
  CHECK_THROWS_AS(NoamLearningRate(0, 4, 4), Error);
}

ParameterSet One(double w) {
  ParameterSet p;
  p.Add("w", Matrix::Constant(1, 1, w));
  return p;
}

TEST_CASE("checkpoint averaging") {
  std::vector<ParameterSet> two = {One(0.0), One(2.0)};
  CHECK(AverageCheckpoints(two).at("w")(0, 0) == 1.0);
  std::vector<ParameterSet> same(5, One(0.3));
  CHECK(AverageCheckpoints(same) == same[0]);
  std::vector<ParameterSet> four = {One(1), One(2), One(3), One(6)};
  const double m1 = AverageCheckpoints(std::span(four).first(2)).at("w")(0, 0);
  const double m2 = AverageCheckpoints(std::span(four).last(2)).at("w")(0, 0);
  CHECK((m1 + m2) / 2 == AverageCheckpoints(four).at("w")(0, 0));
  ParameterSet other;
  other.Add("v", Matrix::Zero(1, 1));
  std::vector<ParameterSet> bad = {One(0), other};
  CHECK_THROWS_WITH_AS(AverageCheckpoints(bad), doctest::Contains("'v'"), Error);
  CHECK_THROWS_AS(AverageCheckpoints({}), Error);
}

TEST_CASE("Adam's first step moves each weight by lr against its gradient") {
  ParameterSet p = One(1.0);
  p.Add("u", Matrix::Constant(1, 2, -1.0));
  ParameterSet g = One(4.0);
  Matrix gu(1, 2);
  gu << -0.5, 0.0;
  g.Add("u", gu);
  Adam adam(0.9, 0.98, 1e-9);
  adam.Step(p, g, 0.1);
  CHECK(adam.steps() == 1);
  CHECK(p.at("w")(0, 0) == doctest::Approx(0.9).epsilon(1e-8));
  CHECK(p.at("u")(0, 0) == doctest::Approx(-0.9).epsilon(1e-8));
  CHECK(p.at("u")(0, 1) == -1.0);
  // Minimising w^2 converges.
  ParameterSet q = One(3.0);
  Adam opt(0.9, 0.98, 1e-9);
  for (int i = 0; i < 2000; ++i) {
    opt.Step(q, One(2 * q.at("w")(0, 0)), 0.01);
  }
  CHECK(std::abs(q.at("w")(0, 0)) < 0.05);
}

TEST_CASE("crop keeps matching slices") {
  TrainingExample ex;
  ex.id = "r";
  ex.features = Matrix::Random(40, 3);
  ex.activity = Matrix::Zero(40, 2);
  ex.activity(10, 1) = 1;
  CategoricalFrameSequence labels{"x", 5, 10, std::vector<int>(40)};
  for (int t = 0; t < 40; ++t) labels.labels[t] = t % 5;
  ex.asr = labels;
  ex.aux_labels = labels;
  const TrainingExample c = CropExample(ex, 8, 16);
  CHECK(c.features == ex.features.middleRows(8, 16));
  CHECK(c.activity(2, 1) == 1);
  CHECK(std::get<CategoricalFrameSequence>(*c.asr).labels[0] == 3);
  CHECK(c.aux_labels->labels.size() == 16);
  CHECK_THROWS_AS(CropExample(ex, 30, 16), Error);
}

ModelConfig TinyModel(Mode mode) {
  ModelConfig c;
  c.input_dim = 80;
  c.encoder_layers = 1;
  c.model_dim = 8;
  c.attention_heads = 2;
  c.ff_dim = 8;
  c.conv_kernel = 3;
  c.subsampling_channels = 2;
  c.embedding_dim = 4;
  c.aux_hidden_dim = 4;
  c.mode = mode;
  if (mode != Mode::kBaseline) {
    c.asr_feature = AsrFeatureSpec::For(AsrFeatureName::kPositionInWord);
  }
  return c;
}

std::vector<TrainingExample> ToyExamples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.id = "toy" + std::to_string(i);
    const int T = 64;
    ex.features = Matrix::Zero(T, 80);
    ex.activity = Matrix::Zero(T, 2);
    CategoricalFrameSequence lab{"position_in_word", 5, 10, std::vector<int>(T)};
    for (int t = 0; t < T; ++t) {
      const int s = (t / 16 + i) % 3;  // 0: A, 1: B, 2: silence
      if (s < 2) ex.activity(t, s) = 1;
      lab.labels[t] = s < 2 ? 1 : 0;
      for (int f = 0; f < 80; ++f) {
        ex.features(t, f) = (s == 0 && f < 40 ? 1.0 : 0.0) +
                            (s == 1 && f >= 40 ? 1.0 : 0.0) + noise(rng);
      }
    }
    ex.aux_labels = lab;
    out.push_back(std::move(ex));
  }
  return out;
}

TEST_CASE("example loss combines PIT and auxiliary terms") {
  EendModel model(TinyModel(Mode::kMultitask));
  const ParameterSet p = model.InitParameters(1);
  const auto ex = ToyExamples(1, 3)[0];
  ag::Tape tape;
  ParamBinder b(tape, p);
  LossBreakdown lb;
  Matrix post;
  ag::Var l = ExampleLoss(model, b, ex, 0.6, &lb, &post);
  CHECK(lb.total == doctest::Approx(lb.der + 0.6 * lb.aux).epsilon(1e-12));
  CHECK(l.value()(0, 0) == lb.total);
  CHECK(post.rows() == 16);
  Matrix y(16, 2);
  for (int t = 0; t < 16; ++t) y.row(t) = ex.activity.row(4 * t);
  CHECK(lb.der == doctest::Approx(PitBceLoss(post, y).loss).epsilon(1e-12));
}

TEST_CASE("training reduces the loss and is deterministic") {
  const auto train = ToyExamples(6, 5);
  const auto dev = ToyExamples(2, 6);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 2;
  cfg.warmup_steps = 10;
  cfg.lr_scale = 0.5;
  cfg.average_last_k = 2;
  cfg.specaugment = {0, 0, 0, 0};
  cfg.chunk_frames = 32;
  cfg.rng_seed = 3;
  cfg.collar = 0.0;  // 16-frame runs vanish under a 0.25 s collar
  int calls = 0;
  const TrainResult a = Train(TinyModel(Mode::kMultitask), train, dev, cfg,
                              [&](const EpochMetrics&) { ++calls; });
  CHECK(calls == 12);
  REQUIRE(a.metrics.size() == 12);
  CHECK(a.metrics.back().loss_der < a.metrics.front().loss_der);
  CHECK(a.metrics.back().step == 12 * 3);
  const TrainResult b = Train(TinyModel(Mode::kMultitask), train, dev, cfg);
  CHECK(a.params == b.params);
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].dev_der == b.metrics[i].dev_der);
  }
  cfg.rng_seed = 4;
  const TrainResult c = Train(TinyModel(Mode::kMultitask), train, dev, cfg);
  CHECK(!(a.params == c.params));
}

TEST_CASE("evaluation scores every example") {
  EendModel model(TinyModel(Mode::kBaseline));
  const auto dev = ToyExamples(3, 8);
  const EvalResult r =
      Evaluate(model, model.InitParameters(2), dev, 0.0, 0.0, 0.5);
  CHECK(r.der.scored_seconds > 0);
  CHECK(r.der.der == doctest::Approx(r.der.missed + r.der.false_alarm +
                                     r.der.confusion));
  CHECK(std::isfinite(r.loss));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.Validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = TrainConfig{};
  c.average_last_k = c.epochs + 1;
  CHECK_THROWS_AS(c.Validate(), Error);
  c = TrainConfig{};
  c.chunk_frames = 6;
  CHECK_THROWS_AS(c.Validate(), Error);
}

}  // namespace
}  // namespace diarkit
