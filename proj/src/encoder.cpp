#include "encoder.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace xltk {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(dim_a, "dim_glove");
  if (multisource) {
    positive(dim_b, "dim_fasttext");
    positive(dim_c, "dim_bert");
  }
  positive(proj_dim, "proj_dim");
  positive(word_hidden, "word_hidden");
  positive(attn_heads, "attn_heads");
  positive(dense_dim, "dense_dim");
  if (use_char) {
    positive(char_dim, "char_dim");
    positive(char_hidden, "char_hidden");
  }
  if (encoder_width() % attn_heads != 0) {
    throw ConfigError("attn_heads (" + std::to_string(attn_heads) +
                      ") must divide the encoder width " + std::to_string(encoder_width()));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(recurrent_dropout >= 0.0 && recurrent_dropout < 1.0)) {
    throw ConfigError("recurrent_dropout must be in [0, 1)");
  }
  if (!(beta_init > 0.0) || !std::isfinite(beta_init)) throw ConfigError("beta_init must be > 0");
  if (vocab_size < Vocabulary::kReserved) throw ConfigError("vocabulary is smaller than its reserved range");
  if (use_char && char_vocab_size < CharVocabulary::kReserved) {
    throw ConfigError("character vocabulary is smaller than its reserved range");
  }
}

namespace {

std::size_t lstm_count(std::size_t in, std::size_t h) { return 4 * h * in + 4 * h * h + 4 * h; }

}  // namespace

std::size_t count_parameters(const ModelConfig& cfg) {
  const std::size_t d = cfg.encoder_width();
  std::size_t n = 0;
  if (cfg.train_tables) {
    n += cfg.vocab_size * cfg.fused_width();
    if (cfg.use_char) n += cfg.char_vocab_size * cfg.char_dim;
  }
  n += cfg.proj_dim * cfg.fused_width() + cfg.proj_dim;
  if (cfg.use_gating) n += cfg.proj_dim + 1;
  n += 2 * lstm_count(cfg.proj_dim, cfg.word_hidden);
  n += 2 * lstm_count(d, cfg.word_hidden);
  if (cfg.use_attention) n += 4 * d * d;
  n += 2 * d;
  if (cfg.use_char) n += 2 * lstm_count(cfg.char_dim, cfg.char_hidden);
  n += cfg.dense_dim * (d + cfg.char_width()) + cfg.dense_dim;
  n += kNumLabels * cfg.dense_dim + kNumLabels;
  return n;
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              Rng& rng) {
  Tensor t({rows, cols}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor zeros(Shape shape, bool grad = false) { return Tensor(std::move(shape), grad); }

Tensor filled(std::size_t n, double value, bool grad) {
  return Tensor({n}, std::vector<double>(n, value), grad);
}

Tensor column(const std::vector<double>& v) { return Tensor({v.size()}, v); }

}  // namespace

LstmParams LstmParams::create(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.w_ih = xavier(4 * hidden, in, in, hidden, rng);
  p.w_hh = xavier(4 * hidden, hidden, hidden, hidden, rng);
  p.bias = zeros({4 * hidden}, true);
  auto b = p.bias.data();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
  return p;
}

std::vector<double> dropout_mask(std::size_t n, double p, Rng& rng) {
  std::vector<double> m(n, 1.0);
  if (p <= 0.0) return m;
  const double keep = 1.0 / (1.0 - p);
  for (auto& v : m) v = rng.bernoulli(p) ? 0.0 : keep;
  return m;
}

Tensor lstm_direction(Tape& tape, const SequenceBatch& in, const LstmParams& p, bool reverse,
                      const LstmDropout& drop) {
  const std::size_t T = in.steps, B = in.batch, H = p.hidden();
  if (in.x.rank() != 2 || in.x.rows() != T * B || in.x.cols() != p.w_ih.cols()) {
    throw DimensionError("lstm: input " + shape_str(in.x.shape()) + " does not match " +
                         std::to_string(T) + " steps of " + std::to_string(B) + "×" +
                         std::to_string(p.w_ih.cols()));
  }
  if (in.lengths.size() != B) throw DimensionError("lstm: one length per sample required");

  const Tensor xw = linear(tape, in.x, p.w_ih, p.bias);
  Tensor h = zeros({B, H});
  Tensor c = zeros({B, H});
  Tensor rmask;
  if (drop.recurrent > 0.0) rmask = Tensor({B, H}, dropout_mask(B * H, drop.recurrent, *drop.rng));

  std::vector<Tensor> outputs(T);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> live(B), dead(B);
    std::size_t n_live = 0;
    for (std::size_t b = 0; b < B; ++b) {
      live[b] = t < in.lengths[b] ? 1.0 : 0.0;
      dead[b] = 1.0 - live[b];
      n_live += t < in.lengths[b];
    }
    if (n_live == 0) {
      outputs[t] = zeros({B, H});
      continue;
    }
    const Tensor h_in = rmask.defined() ? mul(tape, h, rmask) : h;
    const Tensor z = add(tape, slice(tape, xw, 0, t * B, B), matmul_nt(tape, h_in, p.w_hh));
    const Tensor i = sigmoid(tape, slice(tape, z, 1, 0, H));
    const Tensor f = sigmoid(tape, slice(tape, z, 1, H, H));
    const Tensor g = tanh(tape, slice(tape, z, 1, 2 * H, H));
    const Tensor o = sigmoid(tape, slice(tape, z, 1, 3 * H, H));
    Tensor c_new = add(tape, mul(tape, f, c), mul(tape, i, g));
    Tensor h_new = mul(tape, o, tanh(tape, c_new));
    if (n_live == B) {
      c = c_new;
      h = h_new;
      outputs[t] = h_new;
    } else {
      const Tensor lv = column(live), dv = column(dead);
      c = add(tape, scale_rows(tape, c_new, lv), scale_rows(tape, c, dv));
      h = add(tape, scale_rows(tape, h_new, lv), scale_rows(tape, h, dv));
      outputs[t] = scale_rows(tape, h_new, lv);
    }
  }
  return concat(tape, outputs, 0);
}

Tensor bilstm(Tape& tape, const SequenceBatch& in, const BiLstmParams& p,
              const LstmDropout& drop) {
  const Tensor f = lstm_direction(tape, in, p.fwd, false, drop);
  const Tensor b = lstm_direction(tape, in, p.bwd, true, drop);
  Tensor out = concat(tape, {f, b}, 1);
  if (drop.output > 0.0) {
    out = mul(tape, out, Tensor(out.shape(), dropout_mask(out.size(), drop.output, *drop.rng)));
  }
  return out;
}

Tensor self_attention(Tape& tape, const Tensor& h, const AttentionParams& p,
                      std::span<const std::uint8_t> column_mask) {
  if (h.rank() != 2 || h.cols() != p.w_q.cols()) {
    throw DimensionError("self_attention: input " + shape_str(h.shape()) + " vs width " +
                         std::to_string(p.w_q.cols()));
  }
  const std::size_t D = h.cols(), dh = D / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor q = matmul_nt(tape, h, p.w_q);
  const Tensor k = matmul_nt(tape, h, p.w_k);
  const Tensor v = matmul_nt(tape, h, p.w_v);
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t j = 0; j < p.heads; ++j) {
    const Tensor qh = slice(tape, q, 1, j * dh, dh);
    const Tensor kh = slice(tape, k, 1, j * dh, dh);
    const Tensor vh = slice(tape, v, 1, j * dh, dh);
    const Tensor weights = softmax_rows(tape, scale(tape, matmul_nt(tape, qh, kh), inv_sqrt),
                                        column_mask);
    heads.push_back(matmul(tape, weights, vh));
  }
  const Tensor joined = p.heads == 1 ? heads[0] : concat(tape, heads, 1);
  return matmul_nt(tape, joined, p.w_o);
}

// --- model ------------------------------------------------------------------

XlstmModel XlstmModel::create(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  XlstmModel m;
  m.cfg_ = cfg;
  const std::size_t d = cfg.encoder_width();

  m.embed_.multisource = cfg.multisource;
  m.embed_.source_a = random_table(cfg.vocab_size, cfg.dim_a, rng);
  if (cfg.multisource) {
    m.embed_.source_b = random_table(cfg.vocab_size, cfg.dim_b, rng);
    m.embed_.source_c = random_table(cfg.vocab_size, cfg.dim_c, rng);
  }
  if (cfg.use_char) m.embed_.chars = random_table(cfg.char_vocab_size, cfg.char_dim, rng);
  for (Tensor* t : {&m.embed_.source_a, &m.embed_.source_b, &m.embed_.source_c, &m.embed_.chars})
    if (t->defined()) t->set_requires_grad(cfg.train_tables);
  m.embed_.w_proj = xavier(cfg.proj_dim, cfg.fused_width(), cfg.fused_width(), cfg.proj_dim, rng);
  m.embed_.b_proj = zeros({cfg.proj_dim}, true);

  if (cfg.use_gating) {
    m.gate_ = GateParams::create(cfg.proj_dim, cfg.beta_init);
    auto v = m.gate_.reference.data();
    for (auto& x : v) x = rng.uniform(-kTableInitRange, kTableInitRange);
    enforce_reference_floor(m.gate_);
  }

  m.lstm1_ = {LstmParams::create(cfg.proj_dim, cfg.word_hidden, rng),
              LstmParams::create(cfg.proj_dim, cfg.word_hidden, rng)};
  m.lstm2_ = {LstmParams::create(d, cfg.word_hidden, rng),
              LstmParams::create(d, cfg.word_hidden, rng)};
  if (cfg.use_attention) {
    m.attn_.heads = cfg.attn_heads;
    m.attn_.w_q = xavier(d, d, d, d, rng);
    m.attn_.w_k = xavier(d, d, d, d, rng);
    m.attn_.w_v = xavier(d, d, d, d, rng);
    m.attn_.w_o = xavier(d, d, d, d, rng);
  }
  m.norm_gain_ = filled(d, 1.0, true);
  m.norm_shift_ = filled(d, 0.0, true);
  if (cfg.use_char) {
    m.char_lstm_ = {LstmParams::create(cfg.char_dim, cfg.char_hidden, rng),
                    LstmParams::create(cfg.char_dim, cfg.char_hidden, rng)};
  }
  const std::size_t head_in = d + cfg.char_width();
  m.head_.w1 = xavier(cfg.dense_dim, head_in, head_in, cfg.dense_dim, rng);
  m.head_.b1 = zeros({cfg.dense_dim}, true);
  m.head_.w2 = xavier(kNumLabels, cfg.dense_dim, cfg.dense_dim, kNumLabels, rng);
  m.head_.b2 = zeros({kNumLabels}, true);
  return m;
}

std::vector<std::pair<std::string, Tensor>> XlstmModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_if = [&](std::string name, const Tensor& t) {
    if (t.defined()) out.emplace_back(std::move(name), t);
  };
  add_if("embed.glove", embed_.source_a);
  add_if("embed.fasttext", embed_.source_b);
  add_if("embed.bert", embed_.source_c);
  add_if("embed.char", embed_.chars);
  add_if("proj.weight", embed_.w_proj);
  add_if("proj.bias", embed_.b_proj);
  add_if("gate.reference", gate_.reference);
  add_if("gate.log_beta", gate_.log_beta);
  auto lstm = [&](const std::string& prefix, const BiLstmParams& p) {
    for (auto [dir, lp] : {std::pair{"fwd", &p.fwd}, std::pair{"bwd", &p.bwd}}) {
      add_if(prefix + "." + dir + ".w_ih", lp->w_ih);
      add_if(prefix + "." + dir + ".w_hh", lp->w_hh);
      add_if(prefix + "." + dir + ".bias", lp->bias);
    }
  };
  lstm("lstm1", lstm1_);
  lstm("lstm2", lstm2_);
  add_if("attn.w_q", attn_.w_q);
  add_if("attn.w_k", attn_.w_k);
  add_if("attn.w_v", attn_.w_v);
  add_if("attn.w_o", attn_.w_o);
  add_if("norm.gain", norm_gain_);
  add_if("norm.shift", norm_shift_);
  lstm("char_lstm", char_lstm_);
  add_if("head.w1", head_.w1);
  add_if("head.b1", head_.b1);
  add_if("head.w2", head_.w2);
  add_if("head.b2", head_.b2);
  return out;
}

std::vector<Tensor> XlstmModel::trainable_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters())
    if (t.requires_grad()) out.push_back(t);
  return out;
}

std::size_t XlstmModel::trainable_count() const {
  std::size_t n = 0;
  for (const auto& t : trainable_parameters()) n += t.size();
  return n;
}

void XlstmModel::copy_values_from(const XlstmModel& other) {
  auto mine = named_parameters();
  auto theirs = other.named_parameters();
  if (mine.size() != theirs.size()) throw ContractError("copy_values_from: parameter sets differ");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first || mine[i].second.shape() != theirs[i].second.shape()) {
      throw ContractError("copy_values_from: mismatch at " + mine[i].first);
    }
    auto src = theirs[i].second.data();
    std::copy(src.begin(), src.end(), mine[i].second.data().begin());
  }
}

XlstmModel XlstmModel::clone() const {
  XlstmModel m = *this;
  auto deep = [](Tensor& t) {
    if (t.defined()) {
      const bool rg = t.requires_grad();
      t = t.detach();
      t.set_requires_grad(rg);
    }
  };
  for (Tensor* t : {&m.embed_.source_a, &m.embed_.source_b, &m.embed_.source_c, &m.embed_.chars,
                    &m.embed_.w_proj, &m.embed_.b_proj, &m.gate_.reference, &m.gate_.log_beta,
                    &m.attn_.w_q, &m.attn_.w_k, &m.attn_.w_v, &m.attn_.w_o, &m.norm_gain_,
                    &m.norm_shift_, &m.head_.w1, &m.head_.b1, &m.head_.w2, &m.head_.b2})
    deep(*t);
  for (BiLstmParams* b : {&m.lstm1_, &m.lstm2_, &m.char_lstm_})
    for (LstmParams* p : {&b->fwd, &b->bwd}) {
      deep(p->w_ih);
      deep(p->w_hh);
      deep(p->bias);
    }
  return m;
}

namespace {

std::size_t effective_length(const TokenizedSample& s) {
  return std::max<std::size_t>(1, std::min(s.word_len, s.word_ids.size()));
}

}  // namespace

Tensor XlstmModel::embed_time_major(Tape& tape, std::span<const TokenizedSample* const> samples,
                                    std::size_t steps,
                                    const std::vector<std::size_t>& lengths) const {
  const std::size_t B = samples.size();
  std::vector<std::size_t> ids(steps * B, Vocabulary::kPad);
  std::vector<std::uint8_t> mask(steps * B, 0);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& w = samples[b]->word_ids;
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t id = t < w.size() ? w[t] : Vocabulary::kPad;
      if (id >= cfg_.vocab_size) {
        throw IndexError("word id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(cfg_.vocab_size));
      }
      ids[t * B + b] = id;
      mask[t * B + b] = 1;
    }
  }
  const Tensor proj = project(tape, embed_, fuse(tape, embed_, ids));
  if (cfg_.use_gating) return gate_sequence(tape, proj, gate_, mask).gated;
  std::vector<double> live(mask.begin(), mask.end());
  return scale_rows(tape, proj, column(live));
}

Tensor XlstmModel::encode_words(Tape& tape, std::span<const TokenizedSample* const> samples,
                                const Tensor& synthetic, bool training, Rng* rng) const {
  const std::size_t B = samples.size();
  const std::size_t S = synthetic.defined() ? synthetic.rows() : 0;
  if (S > 0 && synthetic.cols() != cfg_.proj_dim) {
    throw DimensionError("synthetic rows " + shape_str(synthetic.shape()) +
                         " do not match proj_dim " + std::to_string(cfg_.proj_dim));
  }
  const std::size_t N = B + S;
  std::vector<std::size_t> lengths(N, 1);
  std::size_t steps = 1;
  for (std::size_t b = 0; b < B; ++b) {
    lengths[b] = effective_length(*samples[b]);
    steps = std::max(steps, lengths[b]);
  }
  Tensor x = embed_time_major(tape, samples, steps, std::vector<std::size_t>(lengths.begin(), lengths.begin() + static_cast<std::ptrdiff_t>(B)));
  if (S > 0) {
    std::vector<Tensor> parts;
    const Tensor blank = zeros({S, cfg_.proj_dim});
    for (std::size_t t = 0; t < steps; ++t) {
      parts.push_back(slice(tape, x, 0, t * B, B));
      parts.push_back(t == 0 ? synthetic : blank);
    }
    x = concat(tape, parts, 0);
  }

  LstmDropout drop;
  if (training) {
    drop = {cfg_.dropout, cfg_.recurrent_dropout, rng};
    if ((drop.output > 0.0 || drop.recurrent > 0.0) && rng == nullptr) {
      throw ContractError("training forward with dropout needs a random stream");
    }
  }
  const Tensor h1 = bilstm(tape, {x, steps, N, lengths}, lstm1_, drop);
  const Tensor h2 = bilstm(tape, {h1, steps, N, lengths}, lstm2_, drop);

  std::vector<Tensor> pooled;
  pooled.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t L = lengths[n];
    std::vector<std::size_t> rows(L);
    for (std::size_t t = 0; t < L; ++t) rows[t] = t * N + n;
    // Only live positions are gathered, which is the same as masking the
    // PAD columns out of every softmax.
    const Tensor hn = gather_rows(tape, h2, rows);
    Tensor z = hn;
    if (cfg_.use_attention) {
      const Tensor a = self_attention(tape, hn, attn_);
      z = cfg_.use_residual ? add(tape, hn, a) : a;
    }
    z = layer_norm_rows(tape, z, norm_gain_, norm_shift_);
    const std::size_t len[] = {L};
    pooled.push_back(max_pool_segments(tape, z, 1, L, len));
  }
  return N == 1 ? pooled[0] : concat(tape, pooled, 0);
}

Tensor XlstmModel::encode_chars(Tape& tape, std::span<const TokenizedSample* const> samples,
                                std::size_t synthetic_rows, bool& empty) const {
  const std::size_t B = samples.size();
  std::vector<std::size_t> lengths(B);
  std::size_t steps = 1;
  for (std::size_t b = 0; b < B; ++b) {
    lengths[b] = std::min(samples[b]->char_len, samples[b]->char_ids.size());
    steps = std::max(steps, lengths[b]);
    empty = empty || lengths[b] == 0;
  }
  std::vector<std::size_t> ids(steps * B, CharVocabulary::kPad);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t id = samples[b]->char_ids[t];
      if (id >= cfg_.char_vocab_size) {
        throw IndexError("char id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(cfg_.char_vocab_size));
      }
      ids[t * B + b] = id;
    }
  const Tensor x = gather_rows(tape, embed_.chars, ids, CharVocabulary::kPad);
  const Tensor h = bilstm(tape, {x, steps, B, lengths}, char_lstm_, {});
  std::vector<std::size_t> order(steps * B);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < steps; ++t) order[b * steps + t] = t * B + b;
  Tensor pooled = max_pool_segments(tape, gather_rows(tape, h, order), B, steps, lengths);
  if (synthetic_rows > 0) {
    pooled = concat(tape, {pooled, zeros({synthetic_rows, cfg_.char_width()})}, 0);
  }
  return pooled;
}

ForwardOutput XlstmModel::forward(Tape& tape, std::span<const TokenizedSample* const> samples,
                                  const Tensor& synthetic, bool training, Rng* rng) const {
  if (samples.empty()) throw ContractError("forward: empty batch");
  ForwardOutput out;
  Tensor rep = encode_words(tape, samples, synthetic, training, rng);
  if (cfg_.use_char) {
    const std::size_t S = synthetic.defined() ? synthetic.rows() : 0;
    rep = concat(tape, {rep, encode_chars(tape, samples, S, out.empty_chars)}, 1);
  }
  const Tensor hidden = relu(tape, linear(tape, rep, head_.w1, head_.b1));
  out.probs = sigmoid(tape, linear(tape, hidden, head_.w2, head_.b2));
  return out;
}

ForwardOutput XlstmModel::forward(Tape& tape,
                                  std::span<const TokenizedSample* const> samples) const {
  return forward(tape, samples, Tensor(), false, nullptr);
}

std::vector<double> XlstmModel::pooled_projection(const TokenizedSample& s) const {
  std::vector<double> out(cfg_.proj_dim, 0.0);
  const std::size_t L = std::min(s.word_len, s.word_ids.size());
  if (L == 0) return out;
  std::vector<std::size_t> ids(s.word_ids.begin(), s.word_ids.begin() + static_cast<std::ptrdiff_t>(L));
  for (std::size_t id : ids)
    if (id >= cfg_.vocab_size) throw IndexError("word id outside vocabulary");
  Tape quiet(false);
  const Tensor proj = project(quiet, embed_, fuse(quiet, embed_, ids));
  auto p = proj.data();
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t j = 0; j < cfg_.proj_dim; ++j) out[j] += p[t * cfg_.proj_dim + j];
  for (auto& v : out) v /= static_cast<double>(L);
  return out;
}

Tensor XlstmModel::pooled_gated(std::span<const TokenizedSample* const> samples) const {
  const std::size_t B = samples.size(), P = cfg_.proj_dim;
  Tensor out({B, P});
  if (B == 0) return out;
  std::vector<std::size_t> lengths(B);
  std::size_t steps = 1;
  for (std::size_t b = 0; b < B; ++b) {
    lengths[b] = effective_length(*samples[b]);
    steps = std::max(steps, lengths[b]);
  }
  Tape quiet(false);
  const Tensor x = embed_time_major(quiet, samples, steps, lengths);
  auto xv = x.data();
  auto ov = out.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t j = 0; j < P; ++j) ov[b * P + j] += xv[(t * B + b) * P + j];
    for (std::size_t j = 0; j < P; ++j) ov[b * P + j] /= static_cast<double>(lengths[b]);
  }
  return out;
}

void XlstmModel::init_reference(std::span<const TokenizedSample* const> minority, Rng& rng) {
  if (!cfg_.use_gating) return;
  const auto v = xltk::init_reference(
      minority.size(), cfg_.proj_dim,
      [&](std::size_t i) { return pooled_projection(*minority[i]); }, rng);
  std::copy(v.begin(), v.end(), gate_.reference.data().begin());
  enforce_reference_floor(gate_);
}

GateTrace XlstmModel::gate_trace(const TokenizedSample& s) const {
  GateTrace trace;
  const std::size_t L = std::min(s.word_len, s.word_ids.size());
  trace.word_ids.assign(s.word_ids.begin(), s.word_ids.begin() + static_cast<std::ptrdiff_t>(L));
  if (L == 0) return trace;
  std::vector<std::size_t> ids(trace.word_ids.begin(), trace.word_ids.end());
  for (std::size_t id : ids)
    if (id >= cfg_.vocab_size) throw IndexError("word id outside vocabulary");
  Tape quiet(false);
  const Tensor proj = project(quiet, embed_, fuse(quiet, embed_, ids));
  if (!cfg_.use_gating) {
    trace.sims.assign(L, 0.0);
    trace.gates.assign(L, 1.0);
    return trace;
  }
  const std::vector<std::uint8_t> mask(L, 1);
  const GateOutput g = gate_sequence(quiet, proj, gate_, mask);
  trace.sims.assign(g.sims.data().begin(), g.sims.data().end());
  trace.gates.assign(g.gates.data().begin(), g.gates.data().end());
  return trace;
}

}  // namespace xltk
