#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "data.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace xltk {

// Denominator of the imbalance ratio ρ_k.
//   prevalence: ρ_k = N_k / N      (the corpus ratios; every α_k > 0)
//   max_count:  ρ_k = N_k / N_max  (the literal ratio; α = 0 for the largest
//                                   category, which silences its positives)
enum class WeightBasis { prevalence, max_count };

struct ClassWeights {
  std::array<double, kNumLabels> rho{};
  std::array<double, kNumLabels> alpha{};  // (1 − ρ_k) / Σ_j (1 − ρ_j)
  bool substituted_empty = false;          // some N_k was 0 and replaced by 1
};

// Normalized inverse-frequency weights. When Σ_j (1 − ρ_j) vanishes (every
// ρ equal to 1) the weights fall back to uniform.
ClassWeights compute_class_weights(std::span<const LabelVector> labels,
                                   WeightBasis basis = WeightBasis::prevalence);
ClassWeights class_weights_from_counts(const std::array<std::size_t, kNumLabels>& counts,
                                       std::size_t total, WeightBasis basis);
// α_k = 1/6 for every category.
ClassWeights uniform_class_weights();

inline constexpr double kFocalClamp = 1e-12;
inline constexpr double kDefaultGamma = 2.0;

// Weighted focal loss averaged over the N rows of p [N×6]:
//   −(1/N) Σ_i Σ_k [α_k (1−p)^γ log p · 1{y=1} + (1−α_k) p^γ log(1−p) · 1{y=0}]
// with p clamped to [1e-12, 1 − 1e-12]. `labels` is row-major N×6.
Tensor focal_loss(Tape& tape, const Tensor& probs, std::span<const std::uint8_t> labels,
                  const ClassWeights& weights, double gamma);

struct SmoteConfig {
  std::size_t k_neighbors = 5;
  // minority : majority target, e.g. 1:2
  std::size_t ratio_minority = 1;
  std::size_t ratio_majority = 2;
  std::size_t max_synthetic = 64;
};

struct SmoteResult {
  Tensor synthetic;  // [count×d], undefined when count == 0
  std::vector<std::size_t> parent;    // e_i index into the minority set
  std::vector<std::size_t> neighbor;  // e_j index into the minority set
  std::vector<double> lambda;
  bool warning = false;  // fewer than two minority samples
};

// Up to k nearest neighbours of each row by Euclidean distance, excluding the
// row itself; ties go to the lower index.
std::vector<std::vector<std::size_t>> nearest_neighbors(const Tensor& reps, std::size_t k);

// (1 − λ)·a + λ·b, which equals a + λ(b − a) and hits both endpoints exactly.
void smote_point(std::span<const double> a, std::span<const double> b, double lambda,
                 std::span<double> out);

// `count` interpolations e_i + λ(e_j − e_i) over minority rows [n×d].
SmoteResult smote_embeddings(const Tensor& minority, std::size_t count, const SmoteConfig& cfg,
                             Rng& rng);

// Synthetic rows needed to reach the target ratio, capped by max_synthetic.
std::size_t smote_target_count(std::size_t minority, std::size_t majority, const SmoteConfig& cfg);

struct RebalancedBatch {
  Tensor synthetic;                      // undefined when nothing was added
  std::vector<LabelVector> labels;       // label vector of each synthetic row's parent
  std::vector<std::size_t> parent_rows;  // batch row of each synthetic row's parent
  std::size_t minority = 0;
  std::size_t majority = 0;
  bool warning = false;
};

// Minority = rows with any positive label. `represent` maps batch rows to
// their [n×d] representations; it is called only for the minority rows.
RebalancedBatch rebalance_batch(
    std::span<const LabelVector> batch_labels,
    const std::function<Tensor(std::span<const std::size_t>)>& represent, const SmoteConfig& cfg,
    Rng& rng);

}  // namespace xltk
