#include <gtest/gtest.h>

#include "liquid_s4/expansion.hpp"
#include "test_support.hpp"

using namespace liquid_s4;

namespace {

DiscreteSystem random_scalar(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a(-0.95, 0.95), bc(-1.5, 1.5);
  return DiscreteSystem::scalar(a(rng), bc(rng), bc(rng));
}

LiquidKernelSet kernels_for(const DiscreteSystem& d, LiquidMode mode, int p, std::size_t window) {
  return build_liquid_kernels(d, mode, p, window);
}

// full liquid output minus the main convolution, computed from the oracle
std::vector<double> oracle_liquid_part(const DiscreteSystem& d, std::span<const double> u, int p, std::size_t w,
                                       LiquidMode mode) {
  std::vector<double> full = liquid_oracle(d, u, p, w, mode), main = liquid_oracle(d, u, p, w, LiquidMode::None);
  for (std::size_t i = 0; i < full.size(); ++i) full[i] -= main[i];
  return full;
}

}  // namespace

TEST(CorrelationSignal, HandValues) {
  const std::vector<double> u = {1, 2, 3};
  EXPECT_EQ(correlation_signal(u, 2).values, (std::vector<double>{0, 2, 6}));
  EXPECT_EQ(correlation_signal(u, 3).values, (std::vector<double>{0, 0, 6}));
}

TEST(CorrelationSignal, OnesAndZeros) {
  const std::vector<double> ones(6, 1.0), zeros(6, 0.0);
  EXPECT_EQ(correlation_signal(ones, 4).values, (std::vector<double>{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(correlation_signal(zeros, 2).values, zeros);
}

TEST(CorrelationSignal, OrderErrors) {
  const std::vector<double> u = {1, 2, 3};
  for (int p : {1, 0, 4}) {
    try {
      correlation_signal(u, p);
      FAIL() << "p=" << p;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidOrder);
    }
  }
}

TEST(LiquidKernelKb, ScalarHandValues) {
  const DiscreteSystem d = DiscreteSystem::scalar(0.5, 2.0, 3.0);
  EXPECT_EQ(liquid_kernel_kb(d, 2, 3).taps, (std::vector<double>{12, 6, 3}));
  EXPECT_EQ(liquid_kernel_kb(d, 3, 2).taps, (std::vector<double>{24, 12}));
}

TEST(LiquidKernelKb, DescendingFormIsFlip) {
  std::mt19937_64 rng(21);
  const DiscreteSystem d = discretize_bilinear(random_stable_system(6, rng), 0.05);
  for (int p = 2; p <= 5; ++p)
    EXPECT_EQ(liquid_kernel_kb_descending(d, p, 17).taps, flip(liquid_kernel_kb(d, p, 17).taps));
}

TEST(LiquidKernelKb, IdentityTransitionEqualsPb) {
  std::mt19937_64 rng(22);
  const DiscreteSystem base = discretize_bilinear(random_stable_system(5, rng), 0.1);
  const DiscreteSystem d = DiscreteSystem::from_dense(ComplexMatrix::Identity(5, 5), base.b_bar, base.c_bar);
  for (int p = 2; p <= kMaxLiquidOrder; ++p)
    EXPECT_LT(support::max_abs_diff(liquid_kernel_kb(d, p, 12).taps, liquid_kernel_pb(d, p, 12).taps), 1e-12);
}

TEST(LiquidKernelKb, ZeroInputMatrixGivesZeroTaps) {
  const DiscreteSystem d = DiscreteSystem::from_dense(ComplexMatrix::Identity(3, 3) * 0.5, ComplexVec::Zero(3),
                                                      ComplexVec::Ones(3));
  for (double t : liquid_kernel_kb(d, 2, 8).taps) EXPECT_EQ(t, 0.0);
  for (double t : liquid_kernel_pb(d, 4, 8).taps) EXPECT_EQ(t, 0.0);
}

TEST(LiquidKernelPb, ScalarAndCancellation) {
  EXPECT_EQ(liquid_kernel_pb(DiscreteSystem::scalar(0.3, 2.0, 1.5), 3, 4).taps, (std::vector<double>(4, 12.0)));
  ComplexVec c(2);
  c << 1.0, -1.0;
  const DiscreteSystem d = DiscreteSystem::from_dense(ComplexMatrix::Identity(2, 2) * 0.2, ComplexVec::Ones(2), c);
  for (double t : liquid_kernel_pb(d, 2, 5).taps) EXPECT_EQ(t, 0.0);
  EXPECT_EQ(liquid_kernel_kb(d, 2, 1).taps.size(), 1u);
}

TEST(LiquidKernel, ArgumentErrors) {
  const DiscreteSystem d = DiscreteSystem::scalar(0.5, 1.0, 1.0);
  EXPECT_THROW(liquid_kernel_kb(d, 1, 4), Error);
  EXPECT_THROW(liquid_kernel_kb(d, kMaxLiquidOrder + 1, 4), Error);
  EXPECT_THROW(liquid_kernel_pb(d, 2, 0), Error);
  EXPECT_THROW(build_liquid_kernels(d, LiquidMode::KB, 1, 4), Error);
  EXPECT_TRUE(build_liquid_kernels(d, LiquidMode::None, 1, 4).taps.empty());
}

TEST(ApplyLiquid, HandValues) {
  const DiscreteSystem d = DiscreteSystem::scalar(0.5, 2.0, 3.0);
  const std::vector<double> u = {1.5, -2.0, 0.0, 0.0};
  const std::vector<double> y = apply_liquid(kernels_for(d, LiquidMode::KB, 2, 4), u);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 3.0 * 4.0 * 1.5 * -2.0);
  EXPECT_DOUBLE_EQ(y[2], 0.5 * y[1]);
  EXPECT_DOUBLE_EQ(y[3], 0.25 * y[1]);
}

TEST(ApplyLiquid, QuietInputsStayQuiet) {
  const DiscreteSystem d = DiscreteSystem::scalar(0.5, 2.0, 3.0);
  const LiquidKernelSet set = kernels_for(d, LiquidMode::KB, 4, 8);
  for (double v : apply_liquid(set, std::vector<double>(16, 0.0))) EXPECT_EQ(v, 0.0);
  std::vector<double> spike(16, 0.0);
  spike[7] = 5.0;  // no window of two or more nonzero samples
  for (double v : apply_liquid(set, spike)) EXPECT_EQ(v, 0.0);
}

TEST(ApplyLiquid, OrderPScalesAsPowerOfAmplitude) {
  std::mt19937_64 rng(23);
  const DiscreteSystem d = discretize_bilinear(random_stable_system(4, rng), 0.1);
  const std::vector<double> u = support::normal_sequence(32, rng);
  for (int p = 2; p <= 4; ++p) {
    LiquidKernelSet only = build_liquid_kernels(d, LiquidMode::KB, p, 8);
    for (std::size_t i = 0; i + 2 < static_cast<std::size_t>(p); ++i) std::fill(only.taps[i].begin(), only.taps[i].end(), 0.0);
    const std::vector<double> base = apply_liquid(only, u);
    for (double alpha : {2.0, -1.0}) {
      std::vector<double> scaled_u = u;
      for (double& v : scaled_u) v *= alpha;
      std::vector<double> expected = base;
      for (double& v : expected) v *= std::pow(alpha, p);
      EXPECT_LT(support::scaled_diff(apply_liquid(only, scaled_u), expected), 1e-12) << "p=" << p << " alpha=" << alpha;
    }
  }
}

TEST(LiquidOracle, ScalarSystemsMatchKernelPath) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    const DiscreteSystem d = random_scalar(rng);
    const std::vector<double> u = support::normal_sequence(16, rng);
    const int p = 2 + trial % 3;
    const std::size_t w = 1 + static_cast<std::size_t>(trial) % 16;
    for (LiquidMode mode : {LiquidMode::KB, LiquidMode::PB}) {
      const std::vector<double> path = apply_liquid(kernels_for(d, mode, p, w), u);
      EXPECT_LT(support::scaled_diff(path, oracle_liquid_part(d, u, p, w, mode)), 1e-10)
          << "trial " << trial << " mode " << to_string(mode);
    }
  }
}

TEST(LiquidOracle, NoneModeIsRecurrentS4) {
  std::mt19937_64 rng(25);
  const DiscreteSystem d = discretize_bilinear(random_stable_system(5, rng), 0.08);
  const std::vector<double> u = support::normal_sequence(40, rng);
  EXPECT_LT(support::scaled_diff(liquid_oracle(d, u, 1, 8, LiquidMode::None), recurrent_s4(d, u)), 1e-12);
}

TEST(LiquidOracle, SizeGuard) {
  const DiscreteSystem d = DiscreteSystem::scalar(0.5, 1.0, 1.0);
  EXPECT_THROW(liquid_oracle(d, std::vector<double>(65, 1.0), 2, 4), Error);
  EXPECT_THROW(liquid_oracle(d, std::vector<double>(8, 1.0), 6, 4), Error);
}

TEST(RecurrentLiquid, SecondOutputHandFormula) {
  const double a = 0.4, b = 1.5, c = -2.0, u0 = 0.7, u1 = -1.3;
  const std::vector<double> u = {u0, u1};
  const std::vector<double> y = recurrent_liquid(DiscreteSystem::scalar(a, b, c), u);
  EXPECT_DOUBLE_EQ(y[0], c * b * u0);
  EXPECT_NEAR(y[1], c * (a * b * u0 + b * b * u0 * u1 + b * u1), 1e-15);
}

TEST(RecurrentLiquid, DivergenceIsReported) {
  const std::vector<double> u(2000, 3.0);
  try {
    recurrent_liquid(DiscreteSystem::scalar(0.9, 2.0, 1.0), u);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Diverged);
  }
}

TEST(Expansion, TermsSumToRecurrence) {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteSystem d = discretize_bilinear(random_stable_system(3, rng), 0.2);
    const std::vector<double> u = support::normal_sequence(5, rng);
    const std::vector<double> y = recurrent_liquid(d, u);
    for (std::size_t k = 0; k < u.size(); ++k) {
      const auto terms = expand_liquid_output(d, u, k);
      EXPECT_EQ(terms.size(), (std::size_t{1} << (k + 1)) - 1);
      EXPECT_NEAR(sum_terms(terms), y[k], 1e-10 * std::max(1.0, std::abs(y[k])));
    }
  }
}

TEST(Expansion, KernelPathKeepsExactlyTheConsecutiveTerms) {
  std::mt19937_64 rng(27);
  const DiscreteSystem d = discretize_bilinear(random_stable_system(3, rng), 0.2);
  const std::vector<double> u = support::normal_sequence(5, rng);
  const std::vector<double> path = liquid_oracle(d, u, 5, 5, LiquidMode::KB);
  for (std::size_t k = 0; k < u.size(); ++k) {
    double kept = 0.0;
    for (const auto& t : expand_liquid_output(d, u, k))
      if (t.consecutive()) kept += t.value;
    EXPECT_NEAR(path[k], kept, 1e-10);
  }
}

TEST(Expansion, LengthThreeTermPresence) {
  // with P = 2 the kernel path at k = 2 drops exactly u0*u2 (gapped) and u0*u1*u2 (order 3)
  std::mt19937_64 rng(28);
  const DiscreteSystem d = discretize_bilinear(random_stable_system(2, rng), 0.3);
  const std::vector<double> u = {0.9, -1.1, 1.7};
  double dropped = 0.0;
  for (const auto& t : expand_liquid_output(d, u, 2)) {
    const bool gapped = t.inputs == std::vector<std::size_t>{0, 2};
    const bool triple = t.inputs.size() == 3;
    EXPECT_EQ(t.consecutive(), !gapped) << "term starting at " << t.start;
    if (gapped || triple) dropped += t.value;
  }
  const double gap = recurrent_liquid(d, u)[2] - liquid_oracle(d, u, 2, 3, LiquidMode::KB)[2];
  EXPECT_NEAR(gap, dropped, 1e-12);
}

TEST(ParseLiquidMode, NamesAndErrors) {
  EXPECT_EQ(parse_liquid_mode("KB"), LiquidMode::KB);
  EXPECT_EQ(parse_liquid_mode("pb"), LiquidMode::PB);
  EXPECT_EQ(parse_liquid_mode("None"), LiquidMode::None);
  EXPECT_THROW(parse_liquid_mode("kbpb"), Error);
  EXPECT_EQ(default_liquid_window(1024), 16u);
  EXPECT_EQ(default_liquid_window(32), 8u);
  EXPECT_EQ(default_liquid_window(4), 4u);
}
