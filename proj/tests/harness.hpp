#pragma once

// Scripted experiments shared by the unit tests and the acceptance binary.

#include <cmath>
#include <vector>

#include "encoder.hpp"
#include "gating.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "training.hpp"

namespace xltk::harness {

struct ConcentrationResult {
  double gated_minority = 0, gated_majority = 0;
  double plain_minority = 0, plain_majority = 0;
  double min_minority_sim = 1, max_majority_abs_sim = 0;
  // (minority/majority mean gradient norm, gated) ÷ (same, ungated)
  double ratio = 0;
};

// Minority tokens lie within a narrow cone around v; majority tokens are
// nearly orthogonal to it. Each sample is mean-pooled and scored by a fixed
// logistic probe under BCE. Gradients are taken with respect to the token
// embeddings that feed the gate; without gating those are the encoder input.
inline ConcentrationResult gradient_concentration(std::uint64_t seed, double beta,
                                                  std::size_t minority = 8,
                                                  std::size_t majority = 120,
                                                  std::size_t dim = 32, std::size_t steps = 6) {
  Rng rng(seed);
  std::vector<double> v(dim);
  double vn = 0;
  for (double& x : v) {
    x = rng.normal();
    vn += x * x;
  }
  vn = std::sqrt(vn);
  for (double& x : v) x /= vn;

  auto orthogonal = [&] {
    std::vector<double> u(dim);
    double dot = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      u[i] = rng.normal();
      dot += u[i] * v[i];
    }
    double n = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      u[i] -= dot * v[i];
      n += u[i] * u[i];
    }
    n = std::sqrt(n);
    for (double& x : u) x /= n;
    return u;
  };

  const std::size_t total = minority + majority;
  std::vector<Tensor> tokens;
  std::vector<double> label;
  ConcentrationResult out;
  for (std::size_t s = 0; s < total; ++s) {
    const bool pos = s < minority;
    Tensor e({steps, dim});
    for (std::size_t t = 0; t < steps; ++t) {
      const auto u = orthogonal();
      // cos = along / sqrt(along² + across²)
      const double c = pos ? rng.uniform(0.82, 0.98) : rng.uniform(-0.08, 0.08);
      const double scale = rng.uniform(0.5, 2.0);
      const double across = std::sqrt(1 - c * c);
      for (std::size_t i = 0; i < dim; ++i)
        e.data()[t * dim + i] = scale * (c * v[i] + across * u[i]);
      if (pos) out.min_minority_sim = std::min(out.min_minority_sim, c);
      else out.max_majority_abs_sim = std::max(out.max_majority_abs_sim, std::abs(c));
    }
    tokens.push_back(e);
    label.push_back(pos ? 1.0 : 0.0);
  }

  Tensor w({dim});
  for (double& x : w.data()) x = rng.uniform(-0.5, 0.5);

  GateParams gate = GateParams::create(dim, beta);
  for (std::size_t i = 0; i < dim; ++i) gate.reference.data()[i] = v[i];

  auto run = [&](bool gated, double& min_mean, double& maj_mean) {
    min_mean = maj_mean = 0;
    const std::vector<std::uint8_t> mask(steps, 1);
    for (std::size_t s = 0; s < total; ++s) {
      Tensor e = tokens[s].clone();
      e.set_requires_grad(true);
      Tape tape;
      Tensor m = gated ? gate_sequence(tape, e, gate, mask).gated : e;
      Tensor pooled = scale(tape, matmul(tape, Tensor({1, steps}, std::vector<double>(steps, 1.0)), m),
                            1.0 / static_cast<double>(steps));
      Tensor logit = sum(tape, mul(tape, pooled, Tensor({1, dim}, {w.data().begin(), w.data().end()})));
      Tensor p = sigmoid(tape, logit);
      // BCE on a single prediction.
      Tensor one = Tensor::scalar(1.0);
      Tensor loss = label[s] > 0.5 ? scale(tape, log(tape, p), -1.0)
                                   : scale(tape, log(tape, sub(tape, one, p)), -1.0);
      tape.backward(loss);
      double n = 0;
      for (double g : e.grad()) n += g * g;
      n = std::sqrt(n);
      (s < minority ? min_mean : maj_mean) += n;
    }
    min_mean /= static_cast<double>(minority);
    maj_mean /= static_cast<double>(majority);
  };
  run(true, out.gated_minority, out.gated_majority);
  run(false, out.plain_minority, out.plain_majority);
  out.ratio = (out.gated_minority / out.gated_majority) / (out.plain_minority / out.plain_majority);
  return out;
}

// A small model used by the training harnesses.
inline ModelConfig toy_model_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.char_vocab_size = 8;
  c.dim_a = c.dim_b = c.dim_c = 4;
  c.proj_dim = 8;
  c.word_hidden = 4;
  c.attn_heads = 2;
  c.char_dim = 4;
  c.char_hidden = 2;
  c.dense_dim = 8;
  c.dropout = 0.0;
  c.recurrent_dropout = 0.0;
  return c;
}

// Category k is positive exactly when word 3 + k occurs; words 9..19 are
// filler. Samples are linearly separable by construction.
inline std::vector<TokenizedSample> separable_samples(std::size_t n, std::uint64_t seed,
                                                      double positive_rate = 0.3) {
  Rng rng(seed);
  std::vector<TokenizedSample> out(n);
  for (auto& s : out) {
    std::vector<std::uint32_t> words;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      s.labels[k] = rng.bernoulli(positive_rate);
      if (s.labels[k]) words.push_back(static_cast<std::uint32_t>(3 + k));
    }
    while (words.size() < 5) words.push_back(static_cast<std::uint32_t>(9 + rng.below(11)));
    rng.shuffle(words);
    s.word_ids.assign(8, 0);
    std::copy(words.begin(), words.end(), s.word_ids.begin());
    s.word_len = words.size();
    s.char_ids.assign(6, 0);
    s.char_len = 1 + rng.below(6);
    for (std::size_t t = 0; t < s.char_len; ++t) s.char_ids[t] = static_cast<std::uint32_t>(2 + rng.below(6));
  }
  return out;
}

struct InjectedF1Result {
  TrainReport report;
  bool restored_best = false;
};

// Scripted validation scores: improvement stops after epoch 3 (ties and
// sub-threshold gains do not count), so training must halt at epoch 10
// and come back to the epoch-3 parameters.
inline InjectedF1Result injected_f1_run() {
  const std::vector<double> script = {0.2, 0.4, 0.6, 0.6, 0.55, 0.6 + 5e-6, 0.3,
                                      0.5, 0.59, 0.6, 0.95, 0.97, 0.99};
  Rng rng(5);
  XlstmModel model = XlstmModel::create(toy_model_config(), rng);
  const auto data = separable_samples(24, 6);
  TrainConfig cfg;
  cfg.epochs = 13;
  cfg.batch_size = 8;
  cfg.patience = 7;
  cfg.schedule.lr = 1e-2;
  cfg.seed = 3;
  std::vector<XlstmModel> snapshots;
  InjectedF1Result out;
  out.report = train(model, data, {}, cfg, [&](const XlstmModel& m, std::size_t epoch) {
    snapshots.push_back(m.clone());
    return script[epoch - 1];
  });
  if (out.report.best_epoch >= 1 && out.report.best_epoch <= snapshots.size()) {
    const auto want = snapshots[out.report.best_epoch - 1].named_parameters();
    const auto have = model.named_parameters();
    out.restored_best = true;
    for (std::size_t i = 0; i < want.size(); ++i) {
      auto a = want[i].second.data();
      auto b = have[i].second.data();
      out.restored_best = out.restored_best && std::equal(a.begin(), a.end(), b.begin(), b.end());
    }
  }
  return out;
}

struct OverfitResult {
  TrainReport report;
  std::vector<double> step_losses;
  double final_loss = 0;
  std::size_t first_five_nonincreases = 0;  // steps 2..5 that did not decrease
};

// 32 separable samples, one batch per epoch, dropout off, no resampling.
inline OverfitResult tiny_overfit_run(std::size_t epochs = 200) {
  Rng rng(11);
  ModelConfig mc = toy_model_config();
  mc.proj_dim = 16;
  mc.word_hidden = 8;
  mc.dense_dim = 16;
  XlstmModel model = XlstmModel::create(mc, rng);
  const auto data = separable_samples(32, 12);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.patience = epochs + 1;
  cfg.use_smote = false;
  cfg.schedule.lr = 1e-2;
  cfg.seed = 13;
  OverfitResult out;
  out.report = train(
      model, data, {}, cfg, [](const XlstmModel&, std::size_t epoch) { return static_cast<double>(epoch); },
      [&](const StepRecord& r) { out.step_losses.push_back(r.loss); });
  out.final_loss = out.report.epochs.empty() ? NAN : out.report.epochs.back().loss;
  for (std::size_t i = 1; i < 5 && i < out.step_losses.size(); ++i)
    out.first_five_nonincreases += !(out.step_losses[i] < out.step_losses[i - 1]);
  return out;
}

struct ClippingResult {
  std::size_t steps = 0;
  std::size_t clipped = 0;  // steps whose raw norm exceeded the threshold
  double max_raw = 0;
  double max_after = 0;
};

// Aggressive settings so that raw gradient norms regularly exceed 1.
inline ClippingResult clipping_run() {
  Rng rng(17);
  ModelConfig mc = toy_model_config();
  mc.dropout = 0.3;
  mc.recurrent_dropout = 0.2;
  XlstmModel model = XlstmModel::create(mc, rng);
  for (auto& [name, t] : model.named_parameters())
    if (name == "head.w2" || name == "head.w1")
      for (double& x : t.data()) x *= 6.0;
  const auto data = separable_samples(64, 18, 0.5);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.patience = 100;
  cfg.gamma = 0.0;
  cfg.weight_mode = WeightMode::uniform;
  cfg.schedule.lr = 5e-2;
  cfg.seed = 19;
  ClippingResult out;
  train(model, data, {}, cfg, [](const XlstmModel&, std::size_t) { return 0.0; },
        [&](const StepRecord& r) {
          if (!r.applied) return;
          ++out.steps;
          out.clipped += r.grad_norm > cfg.clip_norm;
          out.max_raw = std::max(out.max_raw, r.grad_norm);
          out.max_after = std::max(out.max_after, r.clipped_norm);
        });
  return out;
}

}  // namespace xltk::harness
