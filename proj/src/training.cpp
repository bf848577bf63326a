#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include "errors.hpp"
#include "metrics.hpp"

namespace xltk {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

bool Adam::step(double lr) {
  for (const auto& p : params_) {
    if (!p.has_grad()) continue;
    for (double g : p.grad())
      if (!std::isfinite(g)) return false;
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  double c1 = 1.0, c2 = 1.0;
  if (cfg_.bias_correction) {
    c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
  return true;
}

double global_grad_norm(std::span<const Tensor> params) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  return std::sqrt(sq);
}

double clip_gradients(std::span<const Tensor> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (std::isfinite(norm) && norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& p : params)
      if (p.has_grad())
        for (double& g : p.grad()) g *= s;
  }
  return norm;
}

double lr_at(double t, const ScheduleConfig& cfg) {
  if (cfg.kind == Schedule::fixed) return cfg.lr;
  const double tc = std::fmod(std::max(t, 0.0), cfg.period);
  return cfg.lr_min +
         0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * tc / cfg.period));
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (patience == 0) throw ConfigError("patience must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (!(adam.lr > 0.0) || !(schedule.lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(schedule.lr_min > 0.0 && schedule.lr_max >= schedule.lr_min)) {
    throw ConfigError("need 0 < lr_min <= lr_max");
  }
  if (!(schedule.period > 0.0)) throw ConfigError("restart_period must be positive");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (smote.k_neighbors == 0) throw ConfigError("smote_k must be at least 1");
}

std::size_t worker_count() {
  if (const char* env = std::getenv("XLTK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> predict(const XlstmModel& model, std::span<const TokenizedSample> samples,
                            std::size_t batch_size) {
  std::vector<double> out(samples.size() * kNumLabels);
  if (samples.empty()) return out;
  const std::size_t batches = (samples.size() + batch_size - 1) / batch_size;
  auto run = [&](std::size_t b) {
    const std::size_t lo = b * batch_size, hi = std::min(samples.size(), lo + batch_size);
    std::vector<const TokenizedSample*> ptrs;
    for (std::size_t i = lo; i < hi; ++i) ptrs.push_back(&samples[i]);
    Tape quiet(false);
    const auto res = model.forward(quiet, ptrs);
    auto p = res.probs.data();
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(lo * kNumLabels));
  };
  const std::size_t workers = std::min(worker_count(), batches);
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches; ++b) run(b);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < batches; b += workers) run(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double validation_macro_f1(const XlstmModel& model, std::span<const TokenizedSample> samples,
                           std::size_t batch_size) {
  const auto probs = predict(model, samples, batch_size);
  std::vector<LabelVector> gold;
  gold.reserve(samples.size());
  for (const auto& s : samples) gold.push_back(s.labels);
  return macro_f1(decide(probs), gold);
}

ClassWeights weights_for(const TrainConfig& cfg, std::span<const TokenizedSample> train) {
  if (cfg.weight_mode == WeightMode::uniform) return uniform_class_weights();
  std::vector<LabelVector> labels;
  labels.reserve(train.size());
  for (const auto& s : train) labels.push_back(s.labels);
  return compute_class_weights(labels, cfg.weight_basis);
}

TrainReport train(XlstmModel& model, std::span<const TokenizedSample> train_split,
                  std::span<const TokenizedSample> valid_split, const TrainConfig& cfg,
                  const Validator& validator, const StepObserver& observer) {
  cfg.validate();
  if (train_split.empty()) throw ConfigError("training split is empty");
  if (!validator && valid_split.empty()) throw ConfigError("validation split is empty");

  TrainReport report;
  report.weights = weights_for(cfg, train_split);

  // Alg. 2 line 1: v from the minority centroid.
  {
    std::vector<const TokenizedSample*> minority;
    for (const auto& s : train_split)
      if (any_positive(s.labels)) minority.push_back(&s);
    Rng init_rng(Rng::derive(cfg.seed, 0));
    model.init_reference(minority, init_rng);
  }

  const std::vector<Tensor> params = model.trainable_parameters();
  Adam adam(params, cfg.adam);
  const std::size_t n = train_split.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;

  XlstmModel best = model.clone();
  double best_f1 = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t nan_streak = 0;
  report.stop_reason = "max_epochs";

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(Rng::derive(cfg.seed, epoch + 1));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool aborted = false;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      std::vector<const TokenizedSample*> batch;
      std::vector<LabelVector> labels;
      for (std::size_t i = lo; i < hi; ++i) {
        batch.push_back(&train_split[order[i]]);
        labels.push_back(batch.back()->labels);
      }

      Tensor synthetic;
      if (cfg.use_smote) {
        const auto rebalanced = rebalance_batch(
            labels,
            [&](std::span<const std::size_t> rows) {
              std::vector<const TokenizedSample*> picked;
              for (std::size_t r : rows) picked.push_back(batch[r]);
              return model.pooled_gated(picked);
            },
            cfg.smote, rng);
        report.smote_warnings += rebalanced.warning;
        if (rebalanced.synthetic.defined()) {
          synthetic = rebalanced.synthetic;
          labels.insert(labels.end(), rebalanced.labels.begin(), rebalanced.labels.end());
          report.synthetic_rows += rebalanced.labels.size();
        }
      }
      std::vector<std::uint8_t> flat;
      flat.reserve(labels.size() * kNumLabels);
      for (const auto& l : labels) flat.insert(flat.end(), l.begin(), l.end());

      for (const auto& p : params) p.zero_grad();
      Tape tape;
      const auto out = model.forward(tape, batch, synthetic, true, &rng);
      const Tensor loss = focal_loss(tape, out.probs, flat, report.weights, cfg.gamma);
      tape.backward(loss);
      tape.clear();

      StepRecord rec;
      rec.loss = loss.item();
      rec.grad_norm = global_grad_norm(params);
      if (!std::isfinite(rec.grad_norm) || !std::isfinite(rec.loss)) {
        ++report.refused_steps;
        if (++nan_streak >= cfg.max_nan_batches) {
          aborted = true;
          if (observer) observer(rec);
          break;
        }
        if (observer) observer(rec);
        continue;
      }
      nan_streak = 0;
      clip_gradients(params, cfg.clip_norm);
      rec.clipped_norm = global_grad_norm(params);
      const double t = static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(batches);
      rec.applied = adam.step(lr_at(t, cfg.schedule));
      if (rec.applied) {
        ++report.steps;
        if (model.config().use_gating) enforce_reference_floor(model.gate());
      }
      loss_sum += rec.loss;
      ++loss_count;
      if (observer) observer(rec);
    }
    for (const auto& p : params) p.drop_grad();
    if (aborted) {
      report.stop_reason = "nan";
      break;
    }

    EpochRecord er;
    er.epoch = epoch + 1;
    er.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    er.lr = lr_at(static_cast<double>(epoch), cfg.schedule);
    er.val_macro_f1 = validator ? validator(model, epoch + 1)
                                : validation_macro_f1(model, valid_split, cfg.batch_size);
    if (cfg.record_wall_time) {
      er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    report.epochs.push_back(er);

    if (er.val_macro_f1 > best_f1 + cfg.min_improvement || report.best_epoch == 0) {
      best_f1 = er.val_macro_f1;
      report.best_epoch = er.epoch;
      best.copy_values_from(model);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stop_reason = "patience";
      break;
    }
  }
  if (report.best_epoch > 0) {
    model.copy_values_from(best);
    report.best_f1 = best_f1;
  }
  return report;
}

void write_training_log(std::ostream& out, const TrainReport& report) {
  out << "epoch,loss,val_macro_f1,lr,seconds\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << fmt_double(e.loss) << ',' << fmt_double(e.val_macro_f1) << ','
        << fmt_double(e.lr) << ',' << fmt_double(e.seconds) << '\n';
  }
}

void save_training_log(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path.string());
  write_training_log(out, report);
}

}  // namespace xltk
