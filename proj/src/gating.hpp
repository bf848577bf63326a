#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace xltk {

inline constexpr double kReferenceNormFloor = 1e-6;
inline constexpr std::size_t kReferenceInitSamples = 1000;

/**
 * Learnable reference direction v and gate temperature β.
 *
 * β is stored as log β so that any unconstrained update keeps it positive.
 */
struct GateParams {
  Tensor reference;  // [d]
  Tensor log_beta;   // [1]

  static GateParams create(std::size_t dim, double beta);
  double beta() const;
};

// Rescales v up to the norm floor if it has collapsed. A zero vector becomes
// the constant direction with norm equal to the floor.
void enforce_reference_floor(GateParams& params);

struct GateOutput {
  Tensor gated;  // m_t = g_t · e_t, zero at PAD rows
  Tensor gates;  // g_t, reported as 0 at PAD rows
  Tensor sims;   // cos(e_t, v), reported as 0 at PAD rows
};

// sim_t = cos(e_t, v), g_t = σ(β·sim_t), m_t = g_t·e_t. mask[t] == 0 marks a
// PAD row. Zero-norm rows that are not PAD get sim 0 and gate 0.5.
GateOutput gate_sequence(Tape& tape, const Tensor& e, const GateParams& params,
                         std::span<const std::uint8_t> mask);

// β·σ′(β·sim) per similarity value.
std::vector<double> gate_gradient_probe(std::span<const double> sims, double beta);

// Mean of up to 1000 pooled vectors drawn without replacement from the
// toxic samples, or Uniform(−0.05, 0.05) when there are none. `pooled(i)`
// returns the mean-pooled projected embedding of toxic sample i.
std::vector<double> init_reference(std::size_t toxic_count, std::size_t dim,
                                   const std::function<std::vector<double>(std::size_t)>& pooled,
                                   Rng& rng, std::size_t max_samples = kReferenceInitSamples);

}  // namespace xltk
