#include "gating.hpp"

#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace xltk {

GateParams GateParams::create(std::size_t dim, double beta) {
  if (!(beta > 0.0)) throw ConfigError("gate temperature must be positive");
  GateParams p;
  p.reference = Tensor({dim}, true);
  p.log_beta = Tensor({1}, {std::log(beta)}, true);
  return p;
}

double GateParams::beta() const { return std::exp(log_beta.item()); }

void enforce_reference_floor(GateParams& params) {
  auto v = params.reference.data();
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm >= kReferenceNormFloor) return;
  if (norm > 0.0) {
    for (double& x : v) x *= kReferenceNormFloor / norm;
  } else {
    const double c = kReferenceNormFloor / std::sqrt(static_cast<double>(v.size()));
    for (double& x : v) x = c;
  }
}

GateOutput gate_sequence(Tape& tape, const Tensor& e, const GateParams& params,
                         std::span<const std::uint8_t> mask) {
  if (e.rank() != 2 || e.cols() != params.reference.size()) {
    throw DimensionError("gate_sequence: embeddings " + shape_str(e.shape()) +
                         " do not match reference " + shape_str(params.reference.shape()));
  }
  const std::size_t n = e.rows();
  if (mask.size() != n) throw DimensionError("gate_sequence: mask length does not match rows");
  Tensor live({n});
  for (std::size_t i = 0; i < n; ++i) live.data()[i] = mask[i] ? 1.0 : 0.0;

  Tensor sims = row_cosine(tape, e, params.reference);
  Tensor beta = exp(tape, params.log_beta);
  Tensor gates = mul(tape, sigmoid(tape, scale_by(tape, sims, beta)), live);
  GateOutput out;
  out.gated = scale_rows(tape, e, gates);
  out.gates = gates;
  Tape scratch(false);
  out.sims = mul(scratch, sims, live);
  return out;
}

std::vector<double> gate_gradient_probe(std::span<const double> sims, double beta) {
  std::vector<double> out(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    const double z = beta * sims[i];
    // σ′(z) = e^{−|z|} / (1 + e^{−|z|})², which stays positive for large |z|.
    const double q = std::exp(-std::abs(z));
    out[i] = beta * q / ((1.0 + q) * (1.0 + q));
  }
  return out;
}

std::vector<double> init_reference(std::size_t toxic_count, std::size_t dim,
                                   const std::function<std::vector<double>(std::size_t)>& pooled,
                                   Rng& rng, std::size_t max_samples) {
  std::vector<double> v(dim, 0.0);
  if (toxic_count == 0) {
    for (double& x : v) x = rng.uniform(-0.05, 0.05);
    return v;
  }
  std::vector<std::size_t> order(toxic_count);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const std::size_t take = std::min(max_samples, toxic_count);
  for (std::size_t i = 0; i < take; ++i) {
    const auto p = pooled(order[i]);
    if (p.size() != dim) throw DimensionError("init_reference: pooled vector width mismatch");
    for (std::size_t j = 0; j < dim; ++j) v[j] += p[j];
  }
  for (double& x : v) x /= static_cast<double>(take);
  return v;
}

}  // namespace xltk
