#include <gtest/gtest.h>

#include <cmath>

#include "errors.hpp"
#include "gating.hpp"
#include "gradcheck.hpp"
#include "harness.hpp"
#include "test_util.hpp"

using namespace xltk;

namespace {

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GateParams with_reference(std::vector<double> v, double beta) {
  GateParams p = GateParams::create(v.size(), beta);
  for (std::size_t i = 0; i < v.size(); ++i) p.reference.data()[i] = v[i];
  return p;
}

GateOutput gate_rows(const Tensor& e, const GateParams& p) {
  Tape tape(false);
  const std::vector<std::uint8_t> mask(e.rows(), 1);
  return gate_sequence(tape, e, p, mask);
}

}  // namespace

TEST(Gate, AlignedOrthogonalAntipodal) {
  auto p = with_reference({1, 2, 2}, 1.0);
  Tensor e({3, 3}, {1, 2, 2, 2, -1, 0, -1, -2, -2});
  auto g = gate_rows(e, p);
  EXPECT_NEAR(g.sims[0], 1.0, 1e-15);
  EXPECT_NEAR(g.gates[0], 0.7310585786300049, 1e-12);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(g.gated.at(0, c), g.gates[0] * e.at(0, c), 1e-15);
  EXPECT_EQ(g.sims[1], 0.0);
  EXPECT_NEAR(g.gates[1], 0.5, 1e-12);
  EXPECT_NEAR(g.sims[2], -1.0, 1e-15);
  EXPECT_LT(g.gates[2], 0.5);
}

TEST(Gate, PadRowsEmitZeros) {
  auto p = with_reference({1, 0}, 2.0);
  Tensor e({2, 2}, {3, 1, 4, 4});
  Tape tape(false);
  const std::vector<std::uint8_t> mask = {1, 0};
  auto g = gate_sequence(tape, e, p, mask);
  EXPECT_EQ(g.gates[1], 0.0);
  EXPECT_EQ(g.sims[1], 0.0);
  EXPECT_EQ(g.gated.at(1, 0), 0.0);
  EXPECT_EQ(g.gated.at(1, 1), 0.0);
}

TEST(Gate, ZeroNormRowIsNeutral) {
  auto p = with_reference({1, 1}, 3.0);
  auto g = gate_rows(Tensor({1, 2}, {0, 0}), p);
  EXPECT_EQ(g.sims[0], 0.0);
  EXPECT_EQ(g.gates[0], 0.5);
}

TEST(Gate, RangeProperty) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(10);
    GateParams p = GateParams::create(d, rng.uniform(0.01, 20.0));
    for (double& x : p.reference.data()) x = rng.uniform(-3, 3);
    Tensor e = test::random_tensor({5, d}, rng, -5, 5);
    auto g = gate_rows(e, p);
    for (std::size_t t = 0; t < 5; ++t) {
      EXPECT_GE(g.sims[t], -1.0);
      EXPECT_LE(g.sims[t], 1.0);
      EXPECT_GT(g.gates[t], 0.0);
      EXPECT_LT(g.gates[t], 1.0);
    }
  }
}

TEST(Gate, ScaleInvariance) {
  Rng rng(22);
  GateParams p = GateParams::create(6, 2.5);
  for (double& x : p.reference.data()) x = rng.uniform(-1, 1);
  Tensor e = test::random_tensor({4, 6}, rng);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    Tensor ce({4, 6});
    for (std::size_t i = 0; i < e.size(); ++i) ce.data()[i] = c * e[i];
    auto a = gate_rows(e, p);
    auto b = gate_rows(ce, p);
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(a.gates[t], b.gates[t], 1e-14);
    for (std::size_t i = 0; i < e.size(); ++i)
      EXPECT_NEAR(b.gated[i], c * a.gated[i], 1e-12 * std::max(1.0, c));
  }
}

TEST(Gate, HardLimitAtLargeBeta) {
  for (double s = -1.0; s <= 1.0 + 1e-12; s += 0.01) {
    if (std::abs(s) < 0.1 - 1e-12) continue;
    auto p = with_reference({1, 0}, 100.0);
    auto g = gate_rows(Tensor({1, 2}, {s, std::sqrt(std::max(0.0, 1 - s * s))}), p);
    EXPECT_LT(std::abs(g.gates[0] - (s > 0 ? 1.0 : 0.0)), 1e-3) << s;
  }
}

TEST(Gate, MonotoneInSimilarity) {
  auto p = with_reference({1, 0}, 1.7);
  double prev = -1;
  for (int i = 0; i <= 200; ++i) {
    const double s = -1.0 + i * 0.01;
    auto g = gate_rows(Tensor({1, 2}, {s, std::sqrt(std::max(0.0, 1 - s * s))}), p);
    EXPECT_GT(g.gates[0], prev);
    prev = g.gates[0];
  }
}

TEST(Gate, GradientMatchesFiniteDifferences) {
  Rng rng(23);
  GateParams p = GateParams::create(5, 1.3);
  for (double& x : p.reference.data()) x = rng.uniform(-1, 1);
  Tensor e = test::random_tensor({4, 5}, rng, -1, 1, true);
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  auto r = check_op_gradient(
      "gate", [&](Tape& t) { return gate_sequence(t, e, p, mask).gated; },
      {e, p.reference, p.log_beta}, kNonlinearTolerance, rng);
  EXPECT_TRUE(r.passed()) << r.max_rel_error;
}

TEST(Probe, AnalyticValuesAndPositivity) {
  const std::vector<double> zero = {0.0};
  EXPECT_DOUBLE_EQ(gate_gradient_probe(zero, 1.0)[0], 0.25);
  EXPECT_DOUBLE_EQ(gate_gradient_probe(zero, 4.0)[0], 1.0);
  const std::vector<double> grid = {-1, -0.5, 0, 0.5, 1};
  for (double beta : {0.1, 1.0, 10.0}) {
    auto d = gate_gradient_probe(grid, beta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_GT(d[i], 0.0);
      EXPECT_NEAR(d[i], beta * sigma(beta * grid[i]) * (1 - sigma(beta * grid[i])), 1e-13);
    }
  }
}

TEST(Params, BetaPositiveAndValidated) {
  auto p = GateParams::create(3, 2.0);
  EXPECT_NEAR(p.beta(), 2.0, 1e-15);
  p.log_beta.data()[0] = -50;
  EXPECT_GT(p.beta(), 0.0);
  EXPECT_THROW(GateParams::create(3, 0.0), ConfigError);
}

TEST(Params, FloorRestoresZeroVector) {
  auto p = GateParams::create(4, 1.0);
  enforce_reference_floor(p);
  double n = 0;
  for (double x : p.reference.data()) n += x * x;
  EXPECT_NEAR(std::sqrt(n), kReferenceNormFloor, 1e-18);
  p.reference.data()[0] = 1e-9;
  p.reference.data()[1] = p.reference.data()[2] = p.reference.data()[3] = 0;
  enforce_reference_floor(p);
  EXPECT_NEAR(p.reference[0], kReferenceNormFloor, 1e-18);
  p.reference.data()[0] = 3;
  enforce_reference_floor(p);
  EXPECT_EQ(p.reference[0], 3.0);
}

TEST(InitReference, SingletonCentroid) {
  Rng rng(24);
  auto v = init_reference(1, 3, [](std::size_t) { return std::vector<double>{1, -2, 0.5}; }, rng);
  EXPECT_EQ(v, (std::vector<double>{1, -2, 0.5}));
}

TEST(InitReference, SymmetricPairCollapsesThenFloor) {
  Rng rng(25);
  auto v = init_reference(2, 2, [](std::size_t i) {
    return i == 0 ? std::vector<double>{1, 2} : std::vector<double>{-1, -2};
  }, rng);
  EXPECT_EQ(v, (std::vector<double>{0, 0}));
  auto p = GateParams::create(2, 1.0);
  p.reference.data()[0] = v[0];
  p.reference.data()[1] = v[1];
  enforce_reference_floor(p);
  EXPECT_NEAR(std::hypot(p.reference[0], p.reference[1]), kReferenceNormFloor, 1e-18);
}

TEST(InitReference, MeanOfFiftyKnownVectors) {
  Rng rng(26);
  std::vector<std::vector<double>> pooled(50, std::vector<double>(4));
  std::vector<double> expect(4, 0.0);
  for (auto& p : pooled)
    for (std::size_t j = 0; j < 4; ++j) {
      p[j] = rng.uniform(-1, 1);
      expect[j] += p[j] / 50.0;
    }
  auto v = init_reference(50, 4, [&](std::size_t i) { return pooled[i]; }, rng);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(v[j], expect[j], 1e-12);
}

TEST(InitReference, CapsSampleCountAndFallsBack) {
  Rng rng(27);
  std::size_t calls = 0;
  init_reference(5000, 2, [&](std::size_t) {
    ++calls;
    return std::vector<double>{1, 1};
  }, rng);
  EXPECT_EQ(calls, kReferenceInitSamples);
  auto v = init_reference(0, 64, [](std::size_t) { return std::vector<double>{}; }, rng);
  ASSERT_EQ(v.size(), 64u);
  for (double x : v) {
    EXPECT_GE(x, -0.05);
    EXPECT_LT(x, 0.05);
  }
}

TEST(Concentration, GatedMinorityShareGrows) {
  auto r = harness::gradient_concentration(7, 4.0);
  EXPECT_GE(r.min_minority_sim, 0.8);
  EXPECT_LE(r.max_majority_abs_sim, 0.1);
  EXPECT_GE(r.ratio, 1.2) << r.gated_minority << " " << r.gated_majority << " "
                          << r.plain_minority << " " << r.plain_majority;
}
