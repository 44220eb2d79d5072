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
#include <deque>
#include <numeric>

#include <spdlog/spdlog.h>

namespace diarkit {
namespace {

Matrix Clamp(const Matrix& z, bool* clamped) {
  Matrix c = z.cwiseMax(kBceEpsilon).cwiseMin(1.0 - kBceEpsilon);
  if (clamped) *clamped = (c.array() != z.array()).any();
  return c;
}

void CheckShapes(const Matrix& z, const SpeakerActivity& y) {
  if (z.rows() != y.rows() || z.cols() != y.cols()) {
    throw Error("posteriors are " + std::to_string(z.rows()) + "x" +
                std::to_string(z.cols()) + " but reference is " +
                std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  }
  if (z.cols() > 8) throw Error("too many speakers for permutation search");
}

SpeakerActivity PermuteColumns(const SpeakerActivity& y,
                               std::span<const int> perm) {
  SpeakerActivity out(y.rows(), y.cols());
  for (Eigen::Index s = 0; s < y.cols(); ++s) out.col(s) = y.col(perm[s]);
  return out;
}

void CheckLabels(Eigen::Index rows, Eigen::Index cols,
                 std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw Error("aux labels have " + std::to_string(labels.size()) +
                " frames, logits have " + std::to_string(rows));
  }
  for (int l : labels) {
    if (l < 0 || l >= cols) {
      throw Error("aux label " + std::to_string(l) + " out of range for " +
                  std::to_string(cols) + " classes");
    }
  }
}

// Row-wise log-softmax.
Matrix LogSoftmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    const double lse =
        m + std::log((logits.row(t).array() - m).exp().sum());
    out.row(t) = logits.row(t).array() - lse;
  }
  return out;
}

CategoricalFrameSequence CropLabels(const CategoricalFrameSequence& seq,
                                    int start, int length) {
  CategoricalFrameSequence out = seq;
  out.labels.assign(seq.labels.begin() + start,
                    seq.labels.begin() + start + length);
  return out;
}

AsrInput CropAsr(const AsrInput& in, int start, int length) {
  return std::visit(
      [&](const auto& seq) -> AsrInput {
        using T = std::decay_t<decltype(seq)>;
        T out = seq;
        if constexpr (std::is_same_v<T, CategoricalFrameSequence>) {
          return CropLabels(seq, start, length);
        } else if constexpr (std::is_same_v<T, ScpFrameSequence>) {
          out.frames.assign(seq.frames.begin() + start,
                            seq.frames.begin() + start + length);
        } else {
          out.values = seq.values.middleRows(start, length);
        }
        return out;
      },
      in);
}

SpeakerActivity DownsampleRows(const SpeakerActivity& y, int factor) {
  const int n = (static_cast<int>(y.rows()) + factor - 1) / factor;
  SpeakerActivity out(n, y.cols());
  for (int i = 0; i < n; ++i) out.row(i) = y.row(i * factor);
  return out;
}

double SegmentSeconds(const SegmentSet& segs) {
  double total = 0.0;
  for (const auto& s : segs) total += s.offset - s.onset;
  return total;
}

}  // namespace

void TrainConfig::Validate() const {
  if (alpha < 0.0) throw Error("alpha must be non-negative");
  if (epochs < 1) throw Error("epochs must be positive");
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (warmup_steps < 1) throw Error("warmup_steps must be positive");
  if (average_last_k < 1 || average_last_k > epochs) {
    throw Error("average_last_k must be in [1, epochs]");
  }
  const auto& a = specaugment;
  if (a.freq_masks < 0 || a.freq_mask_max < 0 || a.time_masks < 0 ||
      a.time_mask_max < 0) {
    throw Error("SpecAugment mask counts and sizes must be non-negative");
  }
  if (chunk_frames < 0) throw Error("chunk_frames must be non-negative");
  if (chunk_frames > 0 && chunk_frames < 8) {
    throw Error("chunk_frames must be at least 8");
  }
  if (!(lr_scale > 0.0)) throw Error("lr_scale must be positive");
  if (collar < 0.0) throw Error("collar must be non-negative");
}

double DefaultAlpha(AsrFeatureName feature) {
  return feature == AsrFeatureName::kPositionInWord ? 0.2 : 0.6;
}

double MeanBce(const Matrix& posteriors, const SpeakerActivity& reference,
               std::span<const int> permutation) {
  CheckShapes(posteriors, reference);
  const Matrix z = Clamp(posteriors, nullptr);
  const SpeakerActivity y = PermuteColumns(reference, permutation);
  const auto bce = -(y.array() * z.array().log() +
                     (1.0 - y.array()) * (1.0 - z.array()).log());
  return bce.mean();
}

PitResult PitBceLoss(const Matrix& posteriors,
                     const SpeakerActivity& reference) {
  CheckShapes(posteriors, reference);
  bool clamped = false;
  const Matrix z = Clamp(posteriors, &clamped);
  if (clamped) spdlog::debug("posteriors clamped to [eps, 1 - eps]");
  std::vector<int> perm(reference.cols());
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  // next_permutation visits in lexicographic order, so strict < keeps the
  // smallest on ties.
  do {
    const double l = MeanBce(z, reference, perm);
    if (l < best.loss) {
      best.loss = l;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ag::Var PitBceLoss(ag::Var posteriors, const SpeakerActivity& reference,
                   std::vector<int>* permutation) {
  const PitResult pit = PitBceLoss(posteriors.value(), reference);
  if (permutation) *permutation = pit.permutation;
  ag::Tape& tape = *posteriors.tape();
  Matrix value(1, 1);
  value(0, 0) = pit.loss;
  if (!tape.recording()) return tape.Constant(std::move(value));
  const SpeakerActivity y = PermuteColumns(reference, pit.permutation);
  return tape.Record(
      std::move(value), {posteriors},
      [posteriors, y](ag::Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& z = t.Value(posteriors);
        const double n = static_cast<double>(z.size());
        Matrix dz(z.rows(), z.cols());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
          for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double v = z(i, j);
            // Flat outside the clamp range.
            if (v < kBceEpsilon || v > 1.0 - kBceEpsilon) {
              dz(i, j) = 0.0;
            } else {
              dz(i, j) = (v - y(i, j)) / (v * (1.0 - v)) / n;
            }
          }
        }
        t.Accumulate(posteriors, dz * g(0, 0));
      });
}

double AuxCeLoss(const Matrix& logits, std::span<const int> labels) {
  CheckLabels(logits.rows(), logits.cols(), labels);
  if (labels.empty()) throw Error("aux loss over zero frames");
  const Matrix ls = LogSoftmax(logits);
  double total = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) total -= ls(t, labels[t]);
  return total / static_cast<double>(labels.size());
}

ag::Var AuxCeLoss(ag::Var logits, std::span<const int> labels) {
  Matrix value(1, 1);
  value(0, 0) = AuxCeLoss(logits.value(), labels);
  ag::Tape& tape = *logits.tape();
  if (!tape.recording()) return tape.Constant(std::move(value));
  std::vector<int> y(labels.begin(), labels.end());
  return tape.Record(
      std::move(value), {logits},
      [logits, y](ag::Tape& t, const Matrix&, const Matrix& g) {
        Matrix p = LogSoftmax(t.Value(logits)).array().exp();
        for (std::size_t i = 0; i < y.size(); ++i) p(i, y[i]) -= 1.0;
        t.Accumulate(logits, p * (g(0, 0) / static_cast<double>(y.size())));
      });
}

double CombinedLoss(double der_loss, double aux_loss, double alpha) {
  if (alpha < 0.0) throw Error("alpha must be non-negative");
  return der_loss + alpha * aux_loss;
}

ag::Var CombinedLoss(ag::Var der_loss, ag::Var aux_loss, double alpha) {
  if (alpha < 0.0) throw Error("alpha must be non-negative");
  return ag::Add(der_loss, ag::Scale(aux_loss, alpha));
}

Matrix SpecAugment(const Matrix& frames, const SpecAugmentConfig& cfg,
                   std::mt19937_64& rng) {
  Matrix out = frames;
  auto mask = [&rng](int count, int max_width, Eigen::Index axis,
                     const auto& zero) {
    for (int m = 0; m < count; ++m) {
      const int cap = static_cast<int>(std::min<Eigen::Index>(max_width, axis));
      const int w = std::uniform_int_distribution<int>(0, cap)(rng);
      const int start = std::uniform_int_distribution<int>(
          0, static_cast<int>(axis) - w)(rng);
      if (w > 0) zero(start, w);
    }
  };
  mask(cfg.freq_masks, cfg.freq_mask_max, out.cols(),
       [&out](int s, int w) { out.middleCols(s, w).setZero(); });
  mask(cfg.time_masks, cfg.time_mask_max, out.rows(),
       [&out](int s, int w) { out.middleRows(s, w).setZero(); });
  return out;
}

double NoamLearningRate(int step, int model_dim, int warmup_steps) {
  if (step < 1) throw Error("step must be positive");
  if (model_dim < 1 || warmup_steps < 1) {
    throw Error("model_dim and warmup_steps must be positive");
  }
  const double s = step;
  return std::pow(model_dim, -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(warmup_steps, -1.5));
}

ParameterSet AverageCheckpoints(std::span<const ParameterSet> sets) {
  if (sets.empty()) throw Error("no checkpoints to average");
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const std::string diff = sets[0].FirstLayoutDifference(sets[i]);
    if (!diff.empty()) {
      throw Error("checkpoint " + std::to_string(i) +
                  " differs at key '" + diff + "'");
    }
  }
  // Running mean: identical inputs come back bit for bit.
  ParameterSet out = sets[0];
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    for (auto& [key, value] : out.tensors()) {
      value += (sets[i].at(key) - value) / n;
    }
  }
  return out;
}

void Adam::Step(ParameterSet& params, const ParameterSet& grads, double lr) {
  if (m_.size() == 0) {
    m_ = params.ZerosLike();
    v_ = params.ZerosLike();
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, steps_);
  const double c2 = 1.0 - std::pow(beta2_, steps_);
  for (auto& [key, w] : params.tensors()) {
    const Matrix& g = grads.at(key);
    Matrix& m = m_.at(key);
    Matrix& v = v_.at(key);
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + epsilon_);
  }
}

TrainingExample CropExample(const TrainingExample& ex, int start, int length) {
  const int T = static_cast<int>(ex.features.rows());
  if (start < 0 || length < 1 || start + length > T) {
    throw Error("crop [" + std::to_string(start) + ", " +
                std::to_string(start + length) + ") outside " +
                std::to_string(T) + " frames");
  }
  TrainingExample out;
  out.id = ex.id;
  out.features = ex.features.middleRows(start, length);
  out.activity = ex.activity.middleRows(start, length);
  if (ex.asr) out.asr = CropAsr(*ex.asr, start, length);
  if (ex.aux_labels) out.aux_labels = CropLabels(*ex.aux_labels, start, length);
  return out;
}

ag::Var ExampleLoss(const EendModel& model, ParamBinder& binder,
                    const TrainingExample& ex, double alpha,
                    LossBreakdown* breakdown, Matrix* posteriors) {
  const ModelConfig& cfg = model.config();
  if (ex.activity.rows() != ex.features.rows()) {
    throw Error("example '" + ex.id + "' has mismatched label length");
  }
  ForwardGraph g = model.Forward(binder, ex.features,
                                 ex.asr ? &*ex.asr : nullptr);
  const SpeakerActivity y = DownsampleRows(ex.activity, kSubsamplingFactor);
  ag::Var der = PitBceLoss(g.posteriors, y);
  LossBreakdown parts;
  parts.der = der.value()(0, 0);
  if (posteriors) *posteriors = g.posteriors.value();
  ag::Var total = der;
  if (cfg.HasAuxHead()) {
    if (!ex.aux_labels) {
      throw Error("example '" + ex.id + "' lacks auxiliary labels");
    }
    const CategoricalFrameSequence labels =
        SimpleDownsample(*ex.aux_labels, kSubsamplingFactor);
    ag::Var aux = AuxCeLoss(g.aux_logits, labels.labels);
    parts.aux = aux.value()(0, 0);
    total = CombinedLoss(der, aux, alpha);
  }
  parts.total = total.value()(0, 0);
  if (breakdown) *breakdown = parts;
  return total;
}

EvalResult Evaluate(const EendModel& model, const ParameterSet& params,
                    std::span<const TrainingExample> examples, double alpha,
                    double collar, double threshold) {
  if (examples.empty()) throw Error("nothing to evaluate");
  EvalResult res;
  std::vector<DerResult> per_recording;
  for (const auto& ex : examples) {
    ag::Tape tape(/*record_gradients=*/false);
    ParamBinder binder(tape, params);
    LossBreakdown parts;
    Matrix posteriors;
    ExampleLoss(model, binder, ex, alpha, &parts, &posteriors);
    res.loss += parts.total;

    const SegmentSet hyp = ActivityToSegments(
        Binarize(posteriors, threshold),
        kSubsamplingFactor * kFrameShiftMs / 1000.0);
    std::vector<std::string> ref_names;
    for (Eigen::Index s = 0; s < ex.activity.cols(); ++s) {
      ref_names.push_back("ref" + std::to_string(s));
    }
    const SegmentSet ref =
        ActivityToSegments(ex.activity, kFrameShiftMs / 1000.0, ref_names);
    if (ref.empty()) {
      DerResult r;
      r.false_alarm_seconds = SegmentSeconds(hyp);
      per_recording.push_back(r);
      continue;
    }
    per_recording.push_back(ComputeDer(hyp, ref, {collar, true}));
  }
  res.loss /= static_cast<double>(examples.size());
  res.der = AggregateDer(per_recording);
  return res;
}

TrainResult Train(const ModelConfig& model_config,
                  std::span<const TrainingExample> train,
                  std::span<const TrainingExample> dev,
                  const TrainConfig& config, const MetricsSink& sink) {
  config.Validate();
  if (train.empty()) throw Error("empty training set");
  const EendModel model(model_config);
  ParameterSet params = model.InitParameters(config.rng_seed);
  Adam adam(config.adam_beta1, config.adam_beta2, config.adam_epsilon);
  std::mt19937_64 rng(config.rng_seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::deque<ParameterSet> snapshots;
  TrainResult result;
  int step = 0;
  double lr = 0.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_der = 0.0, sum_aux = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      ParameterSet grads = params.ZerosLike();
      double batch_loss = 0.0;
      for (std::size_t i = b; i < end; ++i) {
        const TrainingExample& full = train[order[i]];
        const int T = static_cast<int>(full.features.rows());
        TrainingExample ex;
        if (config.chunk_frames > 0 && T > config.chunk_frames) {
          // Chunk starts stay on the subsampling grid.
          const int slots = (T - config.chunk_frames) / kSubsamplingFactor;
          const int start = kSubsamplingFactor *
                            std::uniform_int_distribution<int>(0, slots)(rng);
          ex = CropExample(full, start, config.chunk_frames);
        } else {
          ex = full;
        }
        ex.features = SpecAugment(ex.features, config.specaugment, rng);

        ag::Tape tape;
        ParamBinder binder(tape, params);
        LossBreakdown parts;
        ag::Var loss = ExampleLoss(model, binder, ex, config.alpha, &parts);
        if (!std::isfinite(parts.total)) {
          throw Error("loss is not finite at step " + std::to_string(step + 1) +
                      " (epoch " + std::to_string(epoch) + ", example '" +
                      ex.id + "')");
        }
        tape.Backward(loss);
        const ParameterSet g = binder.Gradients();
        for (auto& [key, value] : grads.tensors()) value += g.at(key);
        batch_loss += parts.total;
        sum_der += parts.der;
        sum_aux += parts.aux;
      }
      const double n = static_cast<double>(end - b);
      for (auto& [key, value] : grads.tensors()) value /= n;
      ++step;
      lr = config.lr_scale *
           NoamLearningRate(step, model_config.model_dim, config.warmup_steps);
      adam.Step(params, grads, lr);
      spdlog::debug("step {} lr {:.3e} loss {:.5f}", step, lr, batch_loss / n);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    m.lr = lr;
    m.loss_der = sum_der / static_cast<double>(train.size());
    m.loss_aux = sum_aux / static_cast<double>(train.size());
    if (!dev.empty()) {
      const EvalResult ev = Evaluate(model, params, dev, config.alpha,
                                     config.collar, config.threshold);
      m.dev_loss = ev.loss;
      m.dev_der = ev.der.der;
    }
    spdlog::info("epoch {} step {} loss_der {:.4f} loss_aux {:.4f} dev_der {:.4f}",
                 epoch, step, m.loss_der, m.loss_aux, m.dev_der);
    result.metrics.push_back(m);
    if (sink) sink(m);

    if (epoch > config.epochs - config.average_last_k) {
      snapshots.push_back(params);
    }
  }
  std::vector<ParameterSet> last(snapshots.begin(), snapshots.end());
  result.params = AverageCheckpoints(last);
  return result;
}

}  // namespace diarkit
