#include <kexit/langevin.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace kexit;

namespace {

SimConfig base(double h, double dt, const Vec& start) {
  SimConfig c;
  c.h = h;
  c.dt = dt;
  c.start = start;
  c.seed = 2024;
  return c;
}

TEST(Step, QuadraticWithoutNoiseContracts) {
  CounterRng rng(1, 0, Substream::kNoise);
  const Vec x = make_vec({0.4, -0.8});
  const Vec y = step(x, fixture::quadratic(2), 0.0, 0.1, rng);
  EXPECT_DOUBLE_EQ(y[0], 0.9 * x[0]);
  EXPECT_DOUBLE_EQ(y[1], 0.9 * x[1]);
  EXPECT_EQ(rng.counter(), 0u);
}

TEST(Step, GradientFlowReachesMinimum) {
  const auto p = Potential::cosine_lattice(1.0);
  CounterRng rng(1, 0, Substream::kNoise);
  Vec x = make_vec({0.5, 0.5});
  for (int i = 0; i < 20000; ++i) x = step(x, p, 0.0, 1e-3, rng);
  EXPECT_LT(x.norm(), 1e-8);
}

TEST(Step, FixedSeedIsBitIdentical) {
  const auto p = Potential::cosine_lattice(1.0);
  CounterRng a(5, 3, Substream::kNoise), b(5, 3, Substream::kNoise);
  Vec x = make_vec({0.1, 0.2}), y = x;
  for (int i = 0; i < 1000; ++i) {
    x = step(x, p, 0.5, 1e-3, a);
    y = step(y, p, 0.5, 1e-3, b);
  }
  EXPECT_TRUE(x == y);
}

TEST(Step, NoiseRefinementMatchesHalfSteps) {
  // Refinement 2 consumes the draws of two half steps in the same order, so
  // with zero drift the endpoints coincide.
  const auto p = fixture::zero_potential(2);
  CounterRng a(8, 0, Substream::kNoise), b(8, 0, Substream::kNoise);
  const Vec coarse = step(Vec::Zero(2), p, 0.5, 2e-3, a, 2);
  Vec fine = step(Vec::Zero(2), p, 0.5, 1e-3, b);
  fine = step(fine, p, 0.5, 1e-3, b);
  EXPECT_NEAR(coarse[0], fine[0], 1e-15);
  EXPECT_NEAR(coarse[1], fine[1], 1e-15);
}

TEST(Simulate, ExitsOnAPatch) {
  auto cfg = base(0.5, 1e-3, make_vec({0, 0}));
  cfg.burn_in = 50.0;
  const auto dom = fixture::face_patches();
  const auto s = simulate_exit(cfg, Potential::cosine_lattice(1.0), dom, 0);
  EXPECT_GT(s.tau, 0.0);
  const std::vector<std::string> ok{"east", "west", "north", "south", kOtherPatch};
  EXPECT_NE(std::find(ok.begin(), ok.end(), s.patch), ok.end());
  int on_face = 0;
  for (int a = 0; a < 2; ++a) on_face += std::abs(std::abs(s.exit_point[a]) - 1.0) <= 1e-9;
  EXPECT_EQ(on_face, 1);
}

TEST(Simulate, ExitPointOnExactlyOneFace) {
  auto cfg = base(0.9, 2e-3, make_vec({0, 0}));
  const auto dom = fixture::face_patches();
  const auto p = Potential::cosine_lattice(1.0);
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto s = simulate_exit(cfg, p, dom, i);
    int on_face = 0;
    for (int a = 0; a < 2; ++a) on_face += std::abs(std::abs(s.exit_point[a]) - 1.0) <= 1e-9;
    ASSERT_EQ(on_face, 1) << to_string(s.exit_point);
    ASSERT_TRUE(dom.box.contains(s.exit_point));
  }
}

TEST(Simulate, NoiseFreeRunNeverExits) {
  auto cfg = base(0.0, 1e-3, make_vec({0.5, 0.5}));
  cfg.max_steps = 10000;
  try {
    simulate_exit(cfg, Potential::cosine_lattice(1.0), fixture::face_patches(), 0);
    FAIL() << "expected the step budget to run out";
  } catch (const StepBudgetExceeded& e) {
    EXPECT_NEAR(e.partial_time, 10.0, 1e-9);
  }
}

TEST(Simulate, DeterministicPerIndex) {
  auto cfg = base(0.8, 1e-3, make_vec({0, 0}));
  cfg.record_path = true;
  const auto dom = fixture::face_patches();
  const auto p = Potential::cosine_lattice(1.0);
  const auto a = simulate_exit(cfg, p, dom, 4), b = simulate_exit(cfg, p, dom, 4);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_TRUE(a.exit_point == b.exit_point);
  ASSERT_EQ(a.path.size(), b.path.size());
  EXPECT_EQ(static_cast<long>(a.path.size()), a.steps + 1);
  EXPECT_NE(simulate_exit(cfg, p, dom, 5).tau, a.tau);
}

TEST(Simulate, BurnInRestartsAfterEarlyExit) {
  // Start near a face at high temperature: the burn-in must restart at least
  // once and still end with a proper exit.
  auto cfg = base(2.0, 1e-3, make_vec({0.97, 0}));
  cfg.burn_in = 5.0;
  const auto s = simulate_exit(cfg, Potential::cosine_lattice(1.0), fixture::face_patches(), 0);
  EXPECT_GE(s.restarts, 1);
  EXPECT_GT(s.tau, 0.0);
}

TEST(Simulate, RejectsBadConfiguration) {
  const auto dom = fixture::face_patches();
  const auto p = Potential::cosine_lattice(1.0);
  EXPECT_THROW(simulate_exit(base(0.5, 0.0, make_vec({0, 0})), p, dom), InvalidArgument);
  EXPECT_THROW(simulate_exit(base(-0.5, 1e-3, make_vec({0, 0})), p, dom), InvalidArgument);
  EXPECT_THROW(simulate_exit(base(0.5, 1e-3, make_vec({1, 0})), p, dom), InvalidArgument);
  EXPECT_THROW(simulate_exit(base(0.5, 1e-3, make_vec({0})), p, dom), InvalidArgument);
}

TEST(Estimate, IndependentOfWorkerCount) {
  auto cfg = base(0.8, 2e-3, make_vec({0, 0}));
  const auto dom = fixture::face_patches();
  const auto p = Potential::cosine_lattice(1.0);
  const auto one = estimate(cfg, p, dom, 100, 1);
  const auto three = estimate(cfg, p, dom, 100, 3);
  EXPECT_EQ(one.mean_tau, three.mean_tau);
  EXPECT_EQ(one.counts, three.counts);
  for (std::size_t i = 0; i < 100; ++i) ASSERT_EQ(one.samples[i].tau, three.samples[i].tau);
}

TEST(Estimate, SummaryIsConsistent) {
  auto cfg = base(0.8, 2e-3, make_vec({0, 0}));
  cfg.burn_in = 5.0;
  const auto dom = fixture::face_patches();
  const auto s = estimate(cfg, Potential::cosine_lattice(1.0), dom, 200);
  ASSERT_EQ(s.labels.back(), kOtherPatch);
  std::size_t total = 0;
  double freq = 0.0, rate = 0.0;
  for (std::size_t k = 0; k < s.counts.size(); ++k) {
    total += s.counts[k];
    freq += s.frequencies[k];
    rate += s.rates[k];
  }
  EXPECT_EQ(total, 200u);
  EXPECT_NEAR(freq, 1.0, 1e-12);
  EXPECT_NEAR(rate, s.lambda, 1e-12 * s.lambda);
  EXPECT_EQ(s.counts.back(), 0u);  // whole-face patches leave only the corners
  EXPECT_NEAR(s.ks_critical, 1.63 / std::sqrt(200.0), 1e-15);
  EXPECT_THROW(estimate(cfg, Potential::cosine_lattice(1.0), dom, 99), InvalidArgument);
}

}  // namespace
