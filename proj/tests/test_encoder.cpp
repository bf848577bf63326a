#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "checkpoint.hpp"
#include "encoder.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace xltk;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 30;
  c.char_vocab_size = 12;
  c.dim_a = 4;
  c.dim_b = 3;
  c.dim_c = 5;
  c.proj_dim = 6;
  c.word_hidden = 3;
  c.attn_heads = 2;
  c.char_dim = 4;
  c.char_hidden = 2;
  c.dense_dim = 5;
  return c;
}

TokenizedSample make_sample(std::size_t words, std::size_t chars, Rng& rng, std::size_t T = 10,
                            std::size_t C = 16) {
  TokenizedSample s;
  s.word_ids.assign(T, 0);
  s.char_ids.assign(C, 0);
  s.word_len = words;
  s.char_len = chars;
  for (std::size_t t = 0; t < words; ++t) s.word_ids[t] = static_cast<std::uint32_t>(3 + rng.below(27));
  for (std::size_t t = 0; t < chars; ++t) s.char_ids[t] = static_cast<std::uint32_t>(2 + rng.below(10));
  return s;
}

std::vector<const TokenizedSample*> ptrs(const std::vector<TokenizedSample>& v) {
  std::vector<const TokenizedSample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

std::vector<double> probs_of(const XlstmModel& m, const std::vector<TokenizedSample>& v) {
  Tape tape(false);
  auto p = ptrs(v);
  auto out = m.forward(tape, p);
  return {out.probs.data().begin(), out.probs.data().end()};
}

Tensor named(const XlstmModel& m, const std::string& name) {
  for (auto& [n, t] : m.named_parameters())
    if (n == name) return t;
  return Tensor();
}

}  // namespace

TEST(Lstm, SingleStepBothDirectionsAgree) {
  Rng rng(1);
  auto p = LstmParams::create(4, 3, rng);
  Tape tape(false);
  SequenceBatch in{test::random_tensor({1, 4}, rng), 1, 1, {1}};
  Tensor out = bilstm(tape, in, {p, p}, {});
  ASSERT_EQ(out.shape(), (Shape{1, 6}));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out[j], out[3 + j]);
}

TEST(Lstm, ForgetBiasIsOneAndGatesOrdered) {
  Rng rng(2);
  auto p = LstmParams::create(4, 3, rng);
  EXPECT_EQ(p.w_ih.shape(), (Shape{12, 4}));
  EXPECT_EQ(p.w_hh.shape(), (Shape{12, 3}));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(p.bias[i], (i >= 3 && i < 6) ? 1.0 : 0.0);
}

TEST(Lstm, ZeroFixedPoint) {
  Rng rng(3);
  auto p = LstmParams::create(4, 3, rng);
  for (auto* t : {&p.w_ih, &p.w_hh, &p.bias})
    for (double& x : t->data()) x = 0;
  Tape tape(false);
  Tensor out = lstm_direction(tape, {Tensor({5, 4}), 5, 1, {5}}, p, false, {});
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ReversalSymmetry) {
  Rng rng(4);
  auto p = LstmParams::create(3, 4, rng);
  const std::size_t T = 5, B = 2;
  const std::vector<std::size_t> lengths = {5, 3};
  Tensor x = test::random_tensor({T * B, 3}, rng);
  for (std::size_t t = 3; t < T; ++t)
    for (std::size_t c = 0; c < 3; ++c) x.data()[(t * B + 1) * 3 + c] = 0;
  Tape tape(false);
  Tensor back = lstm_direction(tape, {x, T, B, lengths}, p, true, {});
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t L = lengths[b];
    Tensor rev({L, 3});
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t c = 0; c < 3; ++c) rev.data()[t * 3 + c] = x.at((L - 1 - t) * B + b, c);
    Tensor fwd = lstm_direction(tape, {rev, L, 1, {L}}, p, false, {});
    for (std::size_t t = 0; t < L; ++t)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(back.at(t * B + b, j), fwd.at(L - 1 - t, j), 1e-15);
    for (std::size_t t = L; t < T; ++t)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(back.at(t * B + b, j), 0.0);
  }
}

TEST(Lstm, WidthMismatch) {
  Rng rng(5);
  auto p = LstmParams::create(4, 3, rng);
  Tape tape(false);
  EXPECT_THROW(lstm_direction(tape, {Tensor({2, 5}), 2, 1, {2}}, p, false, {}), DimensionError);
}

TEST(Dropout, KeepRate) {
  Rng rng(6);
  auto m = dropout_mask(10000, 0.3, rng);
  const double kept = static_cast<double>(std::count_if(m.begin(), m.end(), [](double v) { return v > 0; }));
  EXPECT_GE(kept / 10000.0, 0.68);
  EXPECT_LE(kept / 10000.0, 0.72);
  for (double v : m)
    if (v > 0) EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
}

namespace {

AttentionParams random_attention(std::size_t d, std::size_t heads, Rng& rng) {
  return {test::random_tensor({d, d}, rng), test::random_tensor({d, d}, rng),
          test::random_tensor({d, d}, rng), test::random_tensor({d, d}, rng), heads};
}

}  // namespace

TEST(Attention, SingletonReturnsValueRow) {
  Rng rng(7);
  auto p = random_attention(4, 2, rng);
  for (double& x : p.w_o.data()) x = 0;
  for (std::size_t i = 0; i < 4; ++i) p.w_o.data()[i * 4 + i] = 1;
  Tensor h = test::random_tensor({1, 4}, rng);
  Tape tape(false);
  Tensor out = self_attention(tape, h, p);
  Tensor v = matmul_nt(tape, h, p.w_v);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out[j], v[j], 1e-15);
}

TEST(Attention, IdenticalRowsGiveIdenticalOutputs) {
  Rng rng(8);
  auto p = random_attention(6, 3, rng);
  Tensor row = test::random_tensor({1, 6}, rng);
  Tensor h({4, 6});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) h.data()[r * 6 + c] = row[c];
  Tape tape(false);
  Tensor out = self_attention(tape, h, p);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.at(r, c), out.at(0, c), 1e-14);
}

TEST(Attention, MaskedColumnsIgnoredAndAllMaskedRejected) {
  Rng rng(9);
  auto p = random_attention(4, 2, rng);
  Tensor h = test::random_tensor({3, 4}, rng);
  Tensor h2 = h.clone();
  for (std::size_t c = 0; c < 4; ++c) h2.data()[2 * 4 + c] = 99.0;
  const std::vector<std::uint8_t> mask = {1, 1, 0};
  Tape tape(false);
  Tensor a = self_attention(tape, h, p, mask);
  Tensor b = self_attention(tape, h2, p, mask);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a.at(r, c), b.at(r, c), 1e-13);
  const std::vector<std::uint8_t> none = {0, 0, 0};
  EXPECT_THROW(self_attention(tape, h, p, none), ContractError);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  Rng rng(10);
  auto p = random_attention(4, 2, rng);
  for (auto* t : {&p.w_q, &p.w_k, &p.w_v, &p.w_o}) t->set_requires_grad(true);
  Tensor h = test::random_tensor({3, 4}, rng, -1, 1, true);
  auto r = check_op_gradient(
      "attention", [&](Tape& t) { return self_attention(t, h, p); },
      {h, p.w_q, p.w_k, p.w_v, p.w_o}, kNonlinearTolerance, rng);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(ResidualNorm, StandardizesRows) {
  Rng rng(11);
  Tensor h = test::random_tensor({3, 512}, rng, -10, 10);
  Tensor gain({512}, std::vector<double>(512, 1.0));
  Tensor shift({512});
  Tape tape(false);
  Tensor out = layer_norm_rows(tape, add(tape, h, Tensor({3, 512})), gain, shift);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 512; ++c) mean += out.at(r, c) / 512;
    for (std::size_t c = 0; c < 512; ++c) var += (out.at(r, c) - mean) * (out.at(r, c) - mean) / 512;
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(ResidualNorm, GradientThroughResidual) {
  Rng rng(12);
  Tensor h = test::random_tensor({2, 6}, rng, -1, 1, true);
  Tensor a = test::random_tensor({2, 6}, rng, -1, 1, true);
  Tensor gain = test::random_tensor({6}, rng, 0.5, 1.5, true);
  Tensor shift = test::random_tensor({6}, rng, -0.5, 0.5, true);
  auto r = check_op_gradient(
      "residual", [&](Tape& t) { return layer_norm_rows(t, add(t, h, a), gain, shift); },
      {h, a, gain, shift}, 1e-5, rng);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(PoolMax, IdentityAndPermutation) {
  Rng rng(13);
  Tape tape(false);
  Tensor one = test::random_tensor({1, 5}, rng);
  const std::size_t l1[] = {1};
  Tensor p1 = max_pool_segments(tape, one, 1, 1, l1);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(p1[c], one[c]);

  Tensor h = test::random_tensor({4, 5}, rng);
  Tensor perm({4, 5});
  const std::size_t order[] = {2, 0, 3, 1};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) perm.data()[r * 5 + c] = h.at(order[r], c);
  const std::size_t l4[] = {4};
  Tensor a = max_pool_segments(tape, h, 1, 4, l4);
  Tensor b = max_pool_segments(tape, perm, 1, 4, l4);
  for (std::size_t c = 0; c < 5; ++c) {
    double expect = -1e9;
    for (std::size_t r = 0; r < 4; ++r) expect = std::max(expect, h.at(r, c));
    EXPECT_EQ(a[c], expect);
    EXPECT_EQ(b[c], expect);
  }
}

TEST(Model, ForwardShapeRangeAndEvalDeterminism) {
  Rng rng(14);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(7, 12, rng), make_sample(2, 3, rng),
                                        make_sample(10, 16, rng)};
  auto a = probs_of(m, batch);
  ASSERT_EQ(a.size(), 18u);
  for (double p : a) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_EQ(probs_of(m, batch), a);
}

TEST(Model, BatchCompositionDoesNotChangeEvalOutput) {
  Rng rng(15);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(7, 12, rng), make_sample(2, 3, rng)};
  auto both = probs_of(m, batch);
  auto second = probs_of(m, {batch[1]});
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(both[6 + k], second[k], 1e-13);
}

TEST(Model, TrainingDropoutChangesOutputsAndNeedsRng) {
  Rng rng(16);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(7, 12, rng)};
  auto p = ptrs(batch);
  Tape tape(false);
  Rng d1(1), d2(2);
  auto a = m.forward(tape, p, Tensor(), true, &d1).probs;
  auto b = m.forward(tape, p, Tensor(), true, &d2).probs;
  bool differ = false;
  for (std::size_t k = 0; k < 6; ++k) differ = differ || a[k] != b[k];
  EXPECT_TRUE(differ);
  EXPECT_THROW(m.forward(tape, p, Tensor(), true, nullptr), ContractError);
}

TEST(Model, SyntheticRowsAppended) {
  Rng rng(17);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(4, 5, rng), make_sample(6, 2, rng)};
  auto p = ptrs(batch);
  Tensor synth = m.pooled_gated(p);
  Tape tape(false);
  auto out = m.forward(tape, p, synth, false, nullptr);
  EXPECT_EQ(out.probs.shape(), (Shape{4, 6}));
  EXPECT_THROW(m.forward(tape, p, Tensor({1, 5}), false, nullptr), DimensionError);
}

TEST(Model, HeadSaturation) {
  Rng rng(18);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(5, 6, rng)};
  Tensor w2 = named(m, "head.w2"), b2 = named(m, "head.b2");
  for (double& x : w2.data()) x = 0;
  for (double x : probs_of(m, batch)) EXPECT_EQ(x, 0.5);
  for (std::size_t k = 0; k < 6; ++k) b2.data()[k] = k % 2 == 0 ? 10 : -10;
  auto probs = probs_of(m, batch);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(probs[k] >= 0.5, k % 2 == 0);
}

TEST(Model, CharBranchWidthAndEmptyFlag) {
  Rng rng(19);
  auto cfg = tiny_config();
  auto m = XlstmModel::create(cfg, rng);
  EXPECT_EQ(named(m, "head.w1").cols(), cfg.encoder_width() + 2 * cfg.char_hidden);
  std::vector<TokenizedSample> batch = {make_sample(3, 0, rng)};
  auto p = ptrs(batch);
  Tape tape(false);
  EXPECT_TRUE(m.forward(tape, p).empty_chars);
  batch[0] = make_sample(3, 1, rng);
  EXPECT_FALSE(m.forward(tape, p).empty_chars);
}

TEST(Model, EmptyWordSequenceStillScores) {
  Rng rng(20);
  auto m = XlstmModel::create(tiny_config(), rng);
  auto p = probs_of(m, {make_sample(0, 4, rng)});
  for (double x : p) EXPECT_TRUE(std::isfinite(x));
}

TEST(Model, VariantsRunAndDropParameters) {
  Rng rng(21);
  std::vector<TokenizedSample> batch = {make_sample(5, 6, rng), make_sample(3, 2, rng)};
  for (int v = 0; v < 5; ++v) {
    auto cfg = tiny_config();
    if (v == 0) cfg.use_gating = false;
    if (v == 1) cfg.use_char = false;
    if (v == 2) cfg.multisource = false;
    if (v == 3) cfg.use_attention = false;
    if (v == 4) cfg.use_residual = false;
    Rng r(3);
    auto m = XlstmModel::create(cfg, r);
    EXPECT_EQ(m.trainable_count(), count_parameters(cfg)) << v;
    EXPECT_EQ(probs_of(m, batch).size(), 12u);
    std::set<std::string> names;
    for (auto& [n, t] : m.named_parameters()) names.insert(n);
    EXPECT_EQ(names.count("gate.reference") + names.count("gate.log_beta"), v == 0 ? 0u : 2u);
    EXPECT_EQ(names.count("embed.char"), v == 1 ? 0u : 1u);
    EXPECT_EQ(names.count("embed.bert"), v == 2 ? 0u : 1u);
    EXPECT_EQ(names.count("attn.w_q"), v == 3 ? 0u : 1u);
  }
}

TEST(Model, GateTraceCoversTrueLength) {
  Rng rng(22);
  auto m = XlstmModel::create(tiny_config(), rng);
  auto s = make_sample(4, 2, rng);
  auto trace = m.gate_trace(s);
  ASSERT_EQ(trace.sims.size(), 4u);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(trace.word_ids[t], s.word_ids[t]);
    EXPECT_NEAR(trace.gates[t], 1.0 / (1.0 + std::exp(-m.gate().beta() * trace.sims[t])), 1e-14);
  }
}

TEST(Model, InitReferenceIsMinorityCentroid) {
  Rng rng(23);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> tox = {make_sample(3, 1, rng), make_sample(5, 1, rng)};
  auto p = ptrs(tox);
  Rng r(1);
  m.init_reference(p, r);
  auto a = m.pooled_projection(tox[0]);
  auto b = m.pooled_projection(tox[1]);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(m.gate().reference[j], (a[j] + b[j]) / 2, 1e-15);
}

TEST(Model, CloneIsDeepAndCopyRestores) {
  Rng rng(24);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::vector<TokenizedSample> batch = {make_sample(5, 6, rng)};
  const auto before = probs_of(m, batch);
  auto snapshot = m.clone();
  for (auto& t : m.trainable_parameters())
    for (double& x : t.data()) x += 0.1;
  EXPECT_NE(probs_of(m, batch), before);
  EXPECT_EQ(probs_of(snapshot, batch), before);
  m.copy_values_from(snapshot);
  EXPECT_EQ(probs_of(m, batch), before);
}

TEST(Model, InvalidConfigsRejected) {
  auto c = tiny_config();
  c.attn_heads = 4;  // does not divide 6
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.vocab_size = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ParameterCount, PaperDimensionsWithinThirtyPercent) {
  ModelConfig c;  // paper dimensions
  c.vocab_size = 100000;
  c.char_vocab_size = 100;
  const double n = static_cast<double>(count_parameters(c));
  EXPECT_GE(n, 0.7 * 7.3e6);
  EXPECT_LE(n, 1.3 * 7.3e6);
  // Word path: projection, gate, two BiLSTM layers, attention, norm, head.
  const double expect = 512.0 * 1368 + 512 + 512 + 1 + 2 * (4.0 * 256 * (512 + 256 + 1)) +
                        2 * (4.0 * 256 * (512 + 256 + 1)) + 4 * 512.0 * 512 + 2 * 512 +
                        2 * (4.0 * 128 * (200 + 128 + 1)) + 256.0 * 768 + 256 + 6 * 256 + 6;
  EXPECT_EQ(n, expect);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  Rng rng(25);
  auto m = XlstmModel::create(tiny_config(), rng);
  Rng other(26);
  auto fresh = XlstmModel::create(tiny_config(), other);
  std::vector<TokenizedSample> batch = {make_sample(5, 6, rng)};
  std::stringstream buf;
  write_checkpoint(buf, m.named_parameters());
  EXPECT_EQ(buf.str().substr(0, 4), "XLCK");
  read_checkpoint(buf, fresh.named_parameters());
  EXPECT_EQ(probs_of(fresh, batch), probs_of(m, batch));
}

TEST(Checkpoint, RejectsMismatches) {
  Rng rng(27);
  auto m = XlstmModel::create(tiny_config(), rng);
  std::stringstream buf;
  write_checkpoint(buf, m.named_parameters());
  const std::string good = buf.str();
  const auto before = named(m, "head.b1").clone();

  auto params = m.named_parameters();
  {
    std::string bad = good;
    bad[0] = 'Y';
    std::istringstream in(bad);
    EXPECT_THROW(read_checkpoint(in, params), Error);
  }
  {
    std::istringstream in(good.substr(0, good.size() - 9));
    EXPECT_THROW(read_checkpoint(in, params), Error);
  }
  {
    auto fewer = params;
    fewer.pop_back();
    std::istringstream in(good);
    EXPECT_THROW(read_checkpoint(in, fewer), SchemaError);
  }
  {
    auto cfg = tiny_config();
    cfg.dense_dim = 7;
    Rng r(1);
    auto other = XlstmModel::create(cfg, r);
    std::istringstream in(good);
    EXPECT_THROW(read_checkpoint(in, other.named_parameters()), SchemaError);
  }
  EXPECT_EQ(std::vector<double>(named(m, "head.b1").data().begin(), named(m, "head.b1").data().end()),
            std::vector<double>(before.data().begin(), before.data().end()));
}
