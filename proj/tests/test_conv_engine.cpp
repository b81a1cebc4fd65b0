#include <gtest/gtest.h>

#include "commands.hpp"
#include "test_support.hpp"

using namespace liquid_s4;

TEST(RecurrentS4, ScalarHandValues) {
  const std::vector<double> u = {1.0, 0.0, 0.0};
  EXPECT_EQ(recurrent_s4(DiscreteSystem::scalar(0.5, 1.0, 2.0), u), (std::vector<double>{2.0, 1.0, 0.5}));
}

TEST(RecurrentS4, ImpulseResponseIsKernel) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const DplrSystem sys = support::sweep_system(trial, 1 + trial * 3, rng);
    const double dt = support::log_uniform(rng, 1e-3, 0.2);
    std::vector<double> impulse(256, 0.0);
    impulse[0] = 1.0;
    const std::vector<double> y = recurrent_s4(discretize_bilinear(sys, dt), impulse);
    EXPECT_LT(support::scaled_diff(y, kernel_genfn(sys, dt, 256).taps), 1e-12) << "trial " << trial;
  }
}

TEST(RecurrentS4, Superposition) {
  std::mt19937_64 rng(32);
  const DiscreteSystem d = discretize_bilinear(legs_system(8, 1), 0.05);
  const std::vector<double> u = support::normal_sequence(64, rng), v = support::normal_sequence(64, rng);
  std::vector<double> mix(64);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * u[i] - 0.5 * v[i];
  const std::vector<double> yu = recurrent_s4(d, u), yv = recurrent_s4(d, v), ymix = recurrent_s4(d, mix);
  std::vector<double> expected(64);
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = 2.0 * yu[i] - 0.5 * yv[i];
  EXPECT_LT(support::scaled_diff(ymix, expected), 1e-12);
}

TEST(ForwardLiquidS4, NoneModeMatchesRecurrence) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const DplrSystem sys = support::sweep_system(trial, 1 + (trial * 7) % 32, rng);
    const double dt = support::log_uniform(rng, 1e-3, 0.2);
    for (std::size_t l : {16u, 200u, 1024u}) {
      const std::vector<double> u = support::normal_sequence(l, rng);
      const std::vector<double> y = forward_liquid_s4(sys, dt, u, LiquidMode::None, 1, 1);
      EXPECT_LT(relative_linf(y, recurrent_s4(discretize_bilinear(sys, dt), u)), 1e-8) << "trial " << trial;
    }
  }
}

TEST(ForwardLiquidS4, PbSecondOrderIsEvenInInput) {
  std::mt19937_64 rng(34);
  const DplrSystem sys = legs_system(6, 2);
  const std::vector<double> u = support::normal_sequence(128, rng);
  std::vector<double> neg = u;
  for (double& v : neg) v = -v;
  const std::vector<double> yp = forward_liquid_s4(sys, 0.05, u, LiquidMode::PB, 2, 8);
  const std::vector<double> yn = forward_liquid_s4(sys, 0.05, neg, LiquidMode::PB, 2, 8);
  const LiquidKernelSet set = build_liquid_kernels(discretize_bilinear(sys, 0.05), LiquidMode::PB, 2, 8);
  std::vector<double> twice_liquid = apply_liquid(set, u);
  for (double& v : twice_liquid) v *= 2.0;
  std::vector<double> sum(u.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = yp[i] + yn[i];
  EXPECT_LT(support::scaled_diff(sum, twice_liquid), 1e-12);
}

TEST(ForwardLiquidS4, KbMatchesOracle) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const DplrSystem sys = support::sweep_system(trial, 1 + trial % 6, rng);
    const double dt = support::log_uniform(rng, 1e-3, 0.2);
    const std::vector<double> u = support::normal_sequence(16, rng);
    for (LiquidMode mode : {LiquidMode::KB, LiquidMode::PB}) {
      const std::vector<double> y = forward_liquid_s4(sys, dt, u, mode, 3, 5);
      EXPECT_LT(support::scaled_diff(y, liquid_oracle(discretize_bilinear(sys, dt), u, 3, 5, mode)), 1e-10);
    }
  }
}

TEST(ForwardLiquidS4, Causality) {
  std::mt19937_64 rng(36);
  const DplrSystem sys = legs_system(16, 3);
  std::vector<double> u = support::normal_sequence(300, rng);
  const std::vector<double> before = forward_liquid_s4(sys, 0.02, u, LiquidMode::KB, 3, 8);
  for (std::size_t i = 150; i < u.size(); ++i) u[i] += 10.0;
  const std::vector<double> after = forward_liquid_s4(sys, 0.02, u, LiquidMode::KB, 3, 8);
  double scale = 1.0;
  for (double v : before) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < 150; ++i) EXPECT_LT(std::abs(after[i] - before[i]), 1e-12 * scale) << "index " << i;
}

TEST(ForwardLiquidS4, EmptyInputAndBadOrder) {
  EXPECT_TRUE(forward_liquid_s4(legs_system(4, 0), 0.1, std::vector<double>{}, LiquidMode::KB, 2, 4).empty());
  EXPECT_THROW(forward_liquid_s4(legs_system(4, 0), 0.1, std::vector<double>(8, 1.0), LiquidMode::PB, 11, 4), Error);
}

TEST(ConvolveBatch, FeaturesUseTheirOwnSystems) {
  const cli::FeatureSystems fs = cli::make_feature_systems(8, 3, 64, std::nullopt, std::nullopt, 5);
  std::mt19937_64 rng(37);
  SequenceBatch input(2, 64, 3);
  for (double& v : input.values) v = std::normal_distribution<double>()(rng);
  const cli::LiquidSettings liquid{LiquidMode::PB, 2, 8};
  const SequenceBatch out = cli::convolve_batch(input, fs, liquid);
  ASSERT_EQ(out.values.size(), input.values.size());
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < 3; ++h) {
      const std::vector<double> ref =
          forward_liquid_s4(fs.systems[h], fs.schedule.per_feature_dt[h], input.sequence(b, h), LiquidMode::PB, 2, 8);
      EXPECT_EQ(out.sequence(b, h), ref);
    }
}
