#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "embedding.hpp"
#include "gating.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace xltk {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t char_vocab_size = 0;

  std::size_t dim_a = 300;  // GloVe role
  std::size_t dim_b = 300;  // FastText role
  std::size_t dim_c = 768;  // BERT role
  std::size_t proj_dim = 512;
  std::size_t word_hidden = 256;  // per direction
  std::size_t attn_heads = 8;
  std::size_t char_dim = 200;
  std::size_t char_hidden = 128;  // per direction
  std::size_t dense_dim = 256;

  double dropout = 0.3;
  double recurrent_dropout = 0.2;
  double beta_init = 1.0;

  bool use_gating = true;
  bool use_char = true;
  bool multisource = true;
  bool use_attention = true;
  bool use_residual = true;
  bool train_tables = false;

  // Throws ConfigError on an inconsistent shape combination.
  void validate() const;
  std::size_t fused_width() const { return multisource ? dim_a + dim_b + dim_c : dim_a; }
  std::size_t encoder_width() const { return 2 * word_hidden; }
  std::size_t char_width() const { return use_char ? 2 * char_hidden : 0; }
};

// Trainable parameter count implied by `cfg`. Frozen embedding tables are
// not counted.
std::size_t count_parameters(const ModelConfig& cfg);

// One direction of one LSTM layer. Gate blocks are stacked [i; f; g; o].
struct LstmParams {
  Tensor w_ih;  // 4H×in
  Tensor w_hh;  // 4H×H
  Tensor bias;  // 4H

  static LstmParams create(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden() const { return w_hh.cols(); }
};

struct BiLstmParams {
  LstmParams fwd;
  LstmParams bwd;
};

struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;  // D×D each, stored out×in
  std::size_t heads = 1;
};

struct HeadParams {
  Tensor w1;  // dense×(encoder + char)
  Tensor b1;
  Tensor w2;  // 6×dense
  Tensor b2;
};

// Dropout keep mask of `n` entries, already scaled by 1/(1−p).
std::vector<double> dropout_mask(std::size_t n, double p, Rng& rng);

/**
 * A time-major sequence batch: row t·batch + b holds step t of sample b.
 * Sample b is live for t < lengths[b]; later steps carry its state unchanged
 * and emit zeros.
 */
struct SequenceBatch {
  Tensor x;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> lengths;
};

struct LstmDropout {
  double output = 0.0;
  double recurrent = 0.0;
  Rng* rng = nullptr;  // required when either rate is nonzero
};

// Runs one direction. reverse == true processes each sample from its last
// live step back to step 0. Output rows follow the input layout.
Tensor lstm_direction(Tape& tape, const SequenceBatch& in, const LstmParams& p, bool reverse,
                      const LstmDropout& drop);

// Forward and backward outputs concatenated → rows of width 2H.
Tensor bilstm(Tape& tape, const SequenceBatch& in, const BiLstmParams& p,
              const LstmDropout& drop);

// Multi-head scaled dot-product self-attention over h [T×D]. Columns with
// column_mask[j] == 0 are excluded; an empty mask means all live.
Tensor self_attention(Tape& tape, const Tensor& h, const AttentionParams& p,
                      std::span<const std::uint8_t> column_mask = {});

struct ForwardOutput {
  Tensor probs;  // [(B+S)×6]
  bool empty_chars = false;  // some sample had no characters
};

struct GateTrace {
  std::vector<std::uint32_t> word_ids;
  std::vector<double> sims;
  std::vector<double> gates;
};

class XlstmModel {
 public:
  XlstmModel() = default;
  // Random tables, Xavier weights, forget bias 1, v ~ Uniform(−0.05, 0.05).
  static XlstmModel create(const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  EmbeddingBundle& embeddings() { return embed_; }
  const EmbeddingBundle& embeddings() const { return embed_; }
  GateParams& gate() { return gate_; }
  const GateParams& gate() const { return gate_; }

  // Every parameter in a fixed order, including frozen tables.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  // Parameters the optimizer updates.
  std::vector<Tensor> trainable_parameters() const;
  std::size_t trainable_count() const;

  // Probabilities for `samples` followed by one row per synthetic
  // representation. Synthetic rows [S×proj_dim] enter as length-1 sequences
  // after gating and carry zero character features.
  ForwardOutput forward(Tape& tape, std::span<const TokenizedSample* const> samples,
                        const Tensor& synthetic, bool training, Rng* rng) const;
  ForwardOutput forward(Tape& tape, std::span<const TokenizedSample* const> samples) const;

  // Mean of the projected embeddings over the true length (no gating).
  std::vector<double> pooled_projection(const TokenizedSample& s) const;
  // Mean of the gated projected embeddings over the true length; the
  // SMOTE interpolation space. Rows [n×proj_dim], no gradient.
  Tensor pooled_gated(std::span<const TokenizedSample* const> samples) const;

  // Sets v to the centroid of up to 1000 minority samples and applies the
  // norm floor.
  void init_reference(std::span<const TokenizedSample* const> minority, Rng& rng);

  GateTrace gate_trace(const TokenizedSample& s) const;

  // Copies values from `other`, which must have identical names and shapes.
  void copy_values_from(const XlstmModel& other);
  XlstmModel clone() const;

 private:
  Tensor encode_words(Tape& tape, std::span<const TokenizedSample* const> samples,
                      const Tensor& synthetic, bool training, Rng* rng) const;
  Tensor encode_chars(Tape& tape, std::span<const TokenizedSample* const> samples,
                      std::size_t synthetic_rows, bool& empty) const;
  // Projected (and gated if enabled) rows in time-major order.
  Tensor embed_time_major(Tape& tape, std::span<const TokenizedSample* const> samples,
                          std::size_t steps, const std::vector<std::size_t>& lengths) const;

  ModelConfig cfg_;
  EmbeddingBundle embed_;
  GateParams gate_;
  BiLstmParams lstm1_, lstm2_;
  AttentionParams attn_;
  Tensor norm_gain_, norm_shift_;
  BiLstmParams char_lstm_;
  HeadParams head_;
};

}  // namespace xltk
