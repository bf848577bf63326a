#include <gtest/gtest.h>

#include <cmath>

#include "embedding.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"
#include "training.hpp"

using namespace xltk;

namespace {

Vocabulary small_vocab() {
  std::vector<std::vector<std::string>> docs = {{"alpha", "beta", "gamma"}};
  return Vocabulary::build(docs, 1);
}

EmbeddingBundle bundle_with(std::size_t vocab, std::size_t a, std::size_t b, std::size_t c,
                            std::size_t out, Rng& rng) {
  EmbeddingBundle e;
  e.source_a = random_table(vocab, a, rng);
  e.source_b = random_table(vocab, b, rng);
  e.source_c = random_table(vocab, c, rng);
  e.chars = random_table(4, 3, rng);
  e.w_proj = test::random_tensor({out, a + b + c}, rng, -0.1, 0.1, true);
  e.b_proj = test::random_tensor({out}, rng, -0.1, 0.1, true);
  return e;
}

}  // namespace

TEST(LoadTable, FullCoverageHasNoRandomRows) {
  auto dir = test::scratch_dir("table_full");
  auto vocab = small_vocab();
  std::string text;
  for (std::uint32_t i = 0; i < vocab.size(); ++i)
    text += vocab.token(i) + " " + std::to_string(i) + " " + std::to_string(i * 2) + "\n";
  test::write_file(dir / "t.txt", text);
  Rng rng(1);
  TableLoadStats stats;
  Tensor t = load_table(dir / "t.txt", 2, vocab, rng, &stats);
  EXPECT_EQ(stats.random_rows, 0u);
  EXPECT_EQ(t.at(0, 0), 0.0);
  EXPECT_EQ(t.at(0, 1), 0.0);  // PAD stays zero even when listed
  EXPECT_EQ(t.at(4, 0), 4.0);
  EXPECT_EQ(t.at(4, 1), 8.0);
}

TEST(LoadTable, EmptyFileGivesRandomRowsExceptPad) {
  auto dir = test::scratch_dir("table_empty");
  test::write_file(dir / "t.txt", "");
  auto vocab = small_vocab();
  Rng rng(2);
  TableLoadStats stats;
  Tensor t = load_table(dir / "t.txt", 5, vocab, rng, &stats);
  EXPECT_EQ(stats.covered_rows, 0u);
  EXPECT_EQ(stats.random_rows, vocab.size() - 1);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(t.at(0, c), 0.0);
  for (std::size_t i = 5; i < t.size(); ++i) {
    EXPECT_GE(t[i], -kTableInitRange);
    EXPECT_LT(t[i], kTableInitRange);
  }
}

TEST(LoadTable, DimensionMismatchIsParseErrorWithLine) {
  auto dir = test::scratch_dir("table_bad");
  test::write_file(dir / "t.txt", "alpha 1 2 3\nbeta 1 2\n");
  Rng rng(3);
  try {
    load_table(dir / "t.txt", 3, small_vocab(), rng);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Fuse, PadIsZeroAndLayoutConcatenates) {
  Rng rng(4);
  auto e = bundle_with(6, 300, 300, 768, 512, rng);
  EXPECT_EQ(e.fused_width(), 1368u);
  Tape tape(false);
  const std::vector<std::size_t> ids = {0, 3};
  Tensor f = fuse(tape, e, ids);
  ASSERT_EQ(f.shape(), (Shape{2, 1368}));
  for (std::size_t c = 0; c < 1368; ++c) EXPECT_EQ(f.at(0, c), 0.0);
  for (std::size_t c = 0; c < 300; ++c) EXPECT_EQ(f.at(1, c), e.source_a.at(3, c));
  for (std::size_t c = 0; c < 300; ++c) EXPECT_EQ(f.at(1, 300 + c), e.source_b.at(3, c));
  for (std::size_t c = 0; c < 768; ++c) EXPECT_EQ(f.at(1, 600 + c), e.source_c.at(3, c));
  EXPECT_EQ(project(tape, e, f).shape(), (Shape{2, 512}));
}

TEST(Fuse, ConstructedSingleCoordinate) {
  Rng rng(5);
  auto e = bundle_with(3, 300, 300, 768, 4, rng);
  for (auto* t : {&e.source_a, &e.source_b, &e.source_c})
    for (double& x : t->data()) x = 0;
  e.source_a.data()[2 * 300] = 1.0;
  Tape tape(false);
  const std::vector<std::size_t> ids = {2};
  Tensor f = fuse(tape, e, ids);
  EXPECT_EQ(f[0], 1.0);
  double rest = 0;
  for (std::size_t c = 1; c < 1368; ++c) rest += std::abs(f[c]);
  EXPECT_EQ(rest, 0.0);
}

TEST(Fuse, OutOfRangeIdIsIndexError) {
  Rng rng(6);
  auto e = bundle_with(3, 2, 2, 2, 2, rng);
  Tape tape(false);
  const std::vector<std::size_t> ids = {3};
  EXPECT_THROW(fuse(tape, e, ids), IndexError);
}

TEST(Project, SelectorAndAffine) {
  Rng rng(7);
  auto e = bundle_with(3, 3, 2, 4, 5, rng);
  for (double& x : e.w_proj.data()) x = 0;
  for (double& x : e.b_proj.data()) x = 0;
  for (std::size_t r = 0; r < 5; ++r) e.w_proj.data()[r * 9 + r] = 1.0;
  Tape tape(false);
  Tensor x = test::random_tensor({4, 9}, rng);
  Tensor y = project(tape, e, x);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(y.at(r, c), x.at(r, c));

  auto f = bundle_with(3, 3, 2, 4, 5, rng);
  Tensor zero = project(tape, f, Tensor({1, 9}));
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(zero[c], f.b_proj[c]);
  Tensor one = test::random_tensor({1, 9}, rng);
  Tensor scaled({1, 9});
  for (std::size_t i = 0; i < 9; ++i) scaled.data()[i] = 3.7 * one[i];
  Tensor p1 = project(tape, f, one);
  Tensor p2 = project(tape, f, scaled);
  for (std::size_t c = 0; c < 5; ++c)
    EXPECT_NEAR(p2[c] - zero[c], 3.7 * (p1[c] - zero[c]), 1e-12);
}

TEST(Project, WidthMismatchIsDimensionError) {
  Rng rng(8);
  auto e = bundle_with(3, 3, 2, 4, 5, rng);
  Tape tape(false);
  EXPECT_THROW(project(tape, e, Tensor({2, 8})), DimensionError);
}

TEST(Project, GradientOfWeight) {
  Rng rng(9);
  auto e = bundle_with(5, 3, 2, 4, 3, rng);
  Tensor x = test::random_tensor({4, 9}, rng);
  auto r = check_op_gradient(
      "project", [&](Tape& t) { return project(t, e, x); }, {e.w_proj, e.b_proj}, 1e-5, rng);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(Fuse, PadRowStaysZeroUnderTraining) {
  Rng rng(10);
  auto e = bundle_with(6, 3, 2, 4, 3, rng);
  for (auto* t : {&e.source_a, &e.source_b, &e.source_c}) t->set_requires_grad(true);
  Adam adam({e.source_a, e.source_b, e.source_c, e.w_proj, e.b_proj}, AdamConfig{0.1});
  const std::vector<std::size_t> ids = {0, 1, 0, 5, 2};
  for (int step = 0; step < 20; ++step) {
    for (auto* t : {&e.source_a, &e.source_b, &e.source_c, &e.w_proj, &e.b_proj}) t->zero_grad();
    Tape tape;
    Tensor y = project(tape, e, fuse(tape, e, ids));
    tape.backward(sum(tape, mul(tape, y, y)));
    ASSERT_TRUE(adam.step(0.1));
  }
  for (const auto* t : {&e.source_a, &e.source_b, &e.source_c})
    for (std::size_t c = 0; c < t->cols(); ++c) EXPECT_EQ(t->at(0, c), 0.0);
  EXPECT_NE(e.source_a.at(1, 0), 0.0);
}

namespace {

std::vector<TokenizedSample> random_samples(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<TokenizedSample> out(n);
  for (auto& s : out) {
    s.word_len = 1 + rng.below(12);
    s.word_ids.assign(12, 0);
    for (std::size_t t = 0; t < s.word_len; ++t)
      s.word_ids[t] = static_cast<std::uint32_t>(Vocabulary::kReserved + rng.below(vocab - Vocabulary::kReserved));
  }
  return out;
}

}  // namespace

TEST(SourceCorrelation, CopiedSourceIsPerfectlyCorrelated) {
  Rng rng(11);
  auto e = bundle_with(80, 6, 6, 10, 4, rng);
  e.source_b = e.source_a.clone();
  auto samples = random_samples(60, 80, rng);
  auto c = source_correlation(e, samples);
  EXPECT_FALSE(c.degenerate);
  EXPECT_NEAR(c.rho[0][1], 1.0, 1e-9);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(c.rho[i][i], 1.0);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(c.rho[i][j], c.rho[j][i]);
  }
}

TEST(SourceCorrelation, IndependentTablesAreWeaklyCorrelated) {
  Rng rng(12);
  auto e = bundle_with(2000, 300, 300, 768, 2, rng);
  auto samples = random_samples(500, 2000, rng);
  auto c = source_correlation(e, samples);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_LT(std::abs(c.rho[i][j]), 0.2) << i << "," << j;
}

TEST(SourceCorrelation, ZeroVarianceFlagged) {
  Rng rng(13);
  auto e = bundle_with(20, 3, 3, 3, 2, rng);
  for (double& x : e.source_c.data()) x = 0;
  auto samples = random_samples(10, 20, rng);
  auto c = source_correlation(e, samples);
  EXPECT_TRUE(c.degenerate);
  EXPECT_TRUE(std::isnan(c.rho[0][2]));
  EXPECT_FALSE(std::isnan(c.rho[0][1]));
}

TEST(SourceCorrelation, NeedsTwoSamples) {
  Rng rng(14);
  auto e = bundle_with(20, 3, 3, 3, 2, rng);
  auto samples = random_samples(1, 20, rng);
  EXPECT_THROW(source_correlation(e, samples), SizeError);
}
