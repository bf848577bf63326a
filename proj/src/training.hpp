#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "imbalance.hpp"
#include "tensor.hpp"

namespace xltk {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool bias_correction = true;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  // Applies one update from the parameters' current gradients. Returns false
  // and changes nothing when any gradient is non-finite.
  bool step(double lr);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

double global_grad_norm(std::span<const Tensor> params);
// Rescales every gradient by max_norm / ‖g‖ when the global norm exceeds
// max_norm. Returns the norm before clipping.
double clip_gradients(std::span<const Tensor> params, double max_norm);

enum class Schedule { fixed, cosine };

struct ScheduleConfig {
  Schedule kind = Schedule::fixed;
  double lr = 1e-4;  // fixed mode
  double lr_min = 1e-6;
  double lr_max = 1e-4;
  double period = 15.0;  // epochs between warm restarts
};

// t is fractional epochs since the start of training.
double lr_at(double t, const ScheduleConfig& cfg);

// How the focal-loss α weights are chosen.
enum class WeightMode { inverse_frequency, uniform };

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  std::size_t patience = 7;
  double clip_norm = 1.0;
  AdamConfig adam;
  ScheduleConfig schedule;
  double gamma = kDefaultGamma;
  WeightMode weight_mode = WeightMode::inverse_frequency;
  WeightBasis weight_basis = WeightBasis::prevalence;
  bool use_smote = true;
  SmoteConfig smote;
  std::uint64_t seed = 42;
  bool record_wall_time = false;
  std::size_t max_nan_batches = 3;
  // Strict improvement margin on validation macro F1.
  double min_improvement = 1e-5;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct StepRecord {
  double loss = 0.0;
  double grad_norm = 0.0;          // before clipping
  double clipped_norm = 0.0;       // after clipping
  bool applied = false;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 if none
  double best_f1 = 0.0;
  std::string stop_reason;  // "patience", "max_epochs" or "nan"
  std::size_t steps = 0;
  std::size_t refused_steps = 0;
  std::size_t synthetic_rows = 0;
  std::size_t smote_warnings = 0;
  ClassWeights weights;
};

// Validation score for the model after `epoch` (1-based).
using Validator = std::function<double(const XlstmModel&, std::size_t epoch)>;
// Observes every optimizer step; used by the clipping harness.
using StepObserver = std::function<void(const StepRecord&)>;

// Eval-mode probabilities, row-major N×6. Batches run on up to
// worker_count() threads over a read-only model.
std::vector<double> predict(const XlstmModel& model, std::span<const TokenizedSample> samples,
                            std::size_t batch_size = 64);
double validation_macro_f1(const XlstmModel& model, std::span<const TokenizedSample> samples,
                           std::size_t batch_size = 64);

// Parallelism bound from XLTK_THREADS, else hardware concurrency.
std::size_t worker_count();

ClassWeights weights_for(const TrainConfig& cfg, std::span<const TokenizedSample> train);

TrainReport train(XlstmModel& model, std::span<const TokenizedSample> train_split,
                  std::span<const TokenizedSample> valid_split, const TrainConfig& cfg,
                  const Validator& validator = {}, const StepObserver& observer = {});

void write_training_log(std::ostream& out, const TrainReport& report);
void save_training_log(const std::filesystem::path& path, const TrainReport& report);

}  // namespace xltk
