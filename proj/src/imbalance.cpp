#include "imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace xltk {

ClassWeights class_weights_from_counts(const std::array<std::size_t, kNumLabels>& counts,
                                       std::size_t total, WeightBasis basis) {
  ClassWeights w;
  std::array<double, kNumLabels> n{};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    std::size_t c = counts[k];
    if (c == 0) {
      c = 1;
      w.substituted_empty = true;
    }
    n[k] = static_cast<double>(c);
  }
  double denom = 0.0;
  if (basis == WeightBasis::max_count) {
    denom = *std::max_element(n.begin(), n.end());
  } else {
    if (total == 0) throw ContractError("class weights need a nonempty label matrix");
    denom = std::max(static_cast<double>(total), *std::max_element(n.begin(), n.end()));
  }
  double norm = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    w.rho[k] = n[k] / denom;
    norm += 1.0 - w.rho[k];
  }
  for (std::size_t k = 0; k < kNumLabels; ++k)
    w.alpha[k] = norm > 0.0 ? (1.0 - w.rho[k]) / norm : 1.0 / static_cast<double>(kNumLabels);
  return w;
}

ClassWeights compute_class_weights(std::span<const LabelVector> labels, WeightBasis basis) {
  std::array<std::size_t, kNumLabels> counts{};
  for (const auto& l : labels)
    for (std::size_t k = 0; k < kNumLabels; ++k) counts[k] += l[k] ? 1 : 0;
  return class_weights_from_counts(counts, labels.size(), basis);
}

ClassWeights uniform_class_weights() {
  ClassWeights w;
  w.rho.fill(1.0);
  w.alpha.fill(1.0 / static_cast<double>(kNumLabels));
  return w;
}

Tensor focal_loss(Tape& tape, const Tensor& probs, std::span<const std::uint8_t> labels,
                  const ClassWeights& weights, double gamma) {
  if (probs.rank() != 2 || probs.cols() != kNumLabels) {
    throw DimensionError("focal_loss: probabilities must be [N×6], got " + shape_str(probs.shape()));
  }
  if (labels.size() != probs.size()) {
    throw DimensionError("focal_loss: " + std::to_string(labels.size()) + " labels for " +
                         shape_str(probs.shape()));
  }
  if (!(gamma >= 0.0)) throw ContractError("focal_loss: gamma must be >= 0");
  const std::size_t n = probs.rows();
  if (n == 0) throw ContractError("focal_loss: empty batch");
  const double lo = kFocalClamp, hi = 1.0 - kFocalClamp;

  auto pv = probs.data();
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const std::size_t k = i % kNumLabels;
    const double p = std::clamp(pv[i], lo, hi);
    if (labels[i]) {
      total += weights.alpha[k] * std::pow(1.0 - p, gamma) * std::log(p);
    } else {
      total += (1.0 - weights.alpha[k]) * std::pow(p, gamma) * std::log(1.0 - p);
    }
  }
  const bool track = tracks(tape, {&probs});
  Tensor out({1}, {-total / static_cast<double>(n)}, track);
  if (track) {
    std::vector<std::uint8_t> y(labels.begin(), labels.end());
    tape.record(out, [probs, out, y = std::move(y), weights, gamma, n, lo, hi]() mutable {
      const double s = adjoint_fault_scale("focal_loss");
      const double g = -s * out.grad()[0] / static_cast<double>(n);
      auto pv = probs.data();
      auto gp = probs.grad();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        if (pv[i] < lo || pv[i] > hi) continue;  // clamped: flat
        const std::size_t k = i % kNumLabels;
        const double p = pv[i];
        double d = 0.0;
        if (y[i]) {
          const double q = 1.0 - p;
          d = std::pow(q, gamma) / p;
          if (gamma != 0.0) d -= gamma * std::pow(q, gamma - 1.0) * std::log(p);
          d *= weights.alpha[k];
        } else {
          const double q = 1.0 - p;
          d = -std::pow(p, gamma) / q;
          if (gamma != 0.0) d += gamma * std::pow(p, gamma - 1.0) * std::log(q);
          d *= 1.0 - weights.alpha[k];
        }
        gp[i] += g * d;
      }
    });
  }
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const Tensor& reps, std::size_t k) {
  const std::size_t n = reps.rows(), d = reps.cols();
  auto v = reps.data();
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = v[i * d + c] - v[j * d + c];
        s += diff * diff;
      }
      dist.emplace_back(s, j);
    }
    const std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    for (std::size_t t = 0; t < take; ++t) out[i].push_back(dist[t].second);
  }
  return out;
}

std::size_t smote_target_count(std::size_t minority, std::size_t majority, const SmoteConfig& cfg) {
  if (cfg.ratio_minority == 0 || cfg.ratio_majority == 0) {
    throw ConfigError("smote ratio terms must be positive");
  }
  // smallest m with m / majority >= ratio_minority / ratio_majority
  const std::size_t target =
      (majority * cfg.ratio_minority + cfg.ratio_majority - 1) / cfg.ratio_majority;
  if (target <= minority) return 0;
  return std::min(target - minority, cfg.max_synthetic);
}

void smote_point(std::span<const double> a, std::span<const double> b, double lambda,
                 std::span<double> out) {
  if (a.size() != b.size() || out.size() != a.size()) {
    throw DimensionError("smote_point: endpoint widths differ");
  }
  for (std::size_t c = 0; c < a.size(); ++c) out[c] = (1.0 - lambda) * a[c] + lambda * b[c];
}

SmoteResult smote_embeddings(const Tensor& minority, std::size_t count, const SmoteConfig& cfg,
                             Rng& rng) {
  if (cfg.k_neighbors == 0) throw ConfigError("smote_k must be at least 1");
  SmoteResult out;
  const std::size_t n = minority.rank() == 2 ? minority.rows() : 0;
  if (n < 2) {
    out.warning = true;
    return out;
  }
  if (count == 0) return out;
  const std::size_t d = minority.cols();
  const auto neighbors = nearest_neighbors(minority, std::min(cfg.k_neighbors, n - 1));
  out.synthetic = Tensor({count, d});
  auto src = minority.data();
  auto dst = out.synthetic.data();
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t i = static_cast<std::size_t>(rng.below(n));
    const auto& nb = neighbors[i];
    const std::size_t j = nb[static_cast<std::size_t>(rng.below(nb.size()))];
    const double lambda = rng.uniform();
    smote_point(src.subspan(i * d, d), src.subspan(j * d, d), lambda, dst.subspan(s * d, d));
    out.parent.push_back(i);
    out.neighbor.push_back(j);
    out.lambda.push_back(lambda);
  }
  return out;
}

RebalancedBatch rebalance_batch(
    std::span<const LabelVector> batch_labels,
    const std::function<Tensor(std::span<const std::size_t>)>& represent, const SmoteConfig& cfg,
    Rng& rng) {
  RebalancedBatch out;
  std::vector<std::size_t> minority_rows;
  for (std::size_t i = 0; i < batch_labels.size(); ++i)
    if (any_positive(batch_labels[i])) minority_rows.push_back(i);
  out.minority = minority_rows.size();
  out.majority = batch_labels.size() - out.minority;
  if (minority_rows.empty()) return out;

  const std::size_t count = smote_target_count(out.minority, out.majority, cfg);
  if (count == 0) return out;
  if (minority_rows.size() < 2) {
    out.warning = true;
    return out;
  }
  const Tensor reps = represent(minority_rows);
  if (reps.rank() != 2 || reps.rows() != minority_rows.size()) {
    throw DimensionError("rebalance_batch: representation rows do not match minority count");
  }
  SmoteResult synth = smote_embeddings(reps, count, cfg, rng);
  out.warning = synth.warning;
  out.synthetic = synth.synthetic;
  for (std::size_t parent : synth.parent) {
    out.parent_rows.push_back(minority_rows[parent]);
    out.labels.push_back(batch_labels[minority_rows[parent]]);
  }
  return out;
}

}  // namespace xltk
