#pragma once

#include <array>
#include <filesystem>
#include <span>

#include "data.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace xltk {

inline constexpr double kTableInitRange = 0.05;

struct TableLoadStats {
  std::size_t covered_rows = 0;  // rows filled from the file
  std::size_t random_rows = 0;   // rows drawn from the seeded fallback
};

// |V|×dim table with rows ~ Uniform(−0.05, 0.05) and a zero PAD row.
Tensor random_table(std::size_t rows, std::size_t dim, Rng& rng);

// Reads "token f1 ... f_dim" lines. Tokens outside `vocab` are ignored;
// vocabulary rows the file does not cover keep their seeded random values.
// A path that is empty loads nothing.
Tensor load_table(const std::filesystem::path& path, std::size_t dim, const Vocabulary& vocab,
                  Rng& rng, TableLoadStats* stats = nullptr);

/**
 * The three word-level sources (GloVe, FastText and BERT roles), the
 * character table, and the learned projection from the concatenated width
 * down to the model width.
 *
 * When `multisource` is false only source A feeds the projection.
 */
struct EmbeddingBundle {
  Tensor source_a;  // |V|×300
  Tensor source_b;  // |V|×300
  Tensor source_c;  // |V|×768
  Tensor chars;     // |V_char|×200
  Tensor w_proj;    // out×concat
  Tensor b_proj;    // out
  bool multisource = true;

  std::size_t fused_width() const;
  std::size_t projected_width() const { return w_proj.rows(); }
};

// Per-position concatenation [A_t ‖ B_t ‖ C_t] → [n×fused_width].
Tensor fuse(Tape& tape, const EmbeddingBundle& bundle, std::span<const std::size_t> word_ids);

// W_proj·fused_t + b_proj for every row.
Tensor project(Tape& tape, const EmbeddingBundle& bundle, const Tensor& fused);

struct SourceCorrelation {
  std::array<std::array<double, 3>, 3> rho{};
  bool degenerate = false;  // some source had zero variance; its entries are NaN
};

// Pearson correlation between the first principal scores of each source's
// mean-pooled per-comment vectors.
SourceCorrelation source_correlation(const EmbeddingBundle& bundle,
                                     std::span<const TokenizedSample> samples);

}  // namespace xltk
