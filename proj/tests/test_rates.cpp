#include <kexit/rates.hpp>
#include <kexit/random.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace kexit;

namespace {

const double kPi2 = kPi * kPi;

SaddleTable synthetic(int dim, std::vector<double> values, std::vector<double> mus,
                      std::vector<double> dets, double det0 = 4.0, double f0 = -1.0) {
  SaddleTable t;
  t.dim = dim;
  t.x0 = Vec::Zero(dim);
  t.f_x0 = f0;
  t.det_hess_x0 = det0;
  t.min_hess_eig_x0 = 1.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    SaddleEntry s;
    s.label = "s" + std::to_string(k);
    s.location = Vec::Zero(dim);
    s.value = values[k];
    s.abs_mu = mus[k];
    s.abs_det_hess = dets[k];
    t.saddles.push_back(s);
  }
  t.n0 = 1;
  while (t.n0 < t.size() && t.saddles[t.n0].value <= values[0] + kSaddleTieTolerance) ++t.n0;
  return t;
}

TEST(Prefactor, SymmetricLatticeIsPi) {
  const auto t = fixture::lattice_table(1.0);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(ek_prefactor(t, k), kPi, 1e-9);
}

TEST(Prefactor, AnisotropicLattice) {
  const auto t = fixture::lattice_table(1.5);
  EXPECT_NEAR(ek_prefactor(t, 0), kPi, 1e-9);  // low saddle on x = +-1
  EXPECT_NEAR(ek_prefactor(t, 1), kPi, 1e-9);
  EXPECT_NEAR(ek_prefactor(t, 2), 1.5 * kPi, 1e-9);  // high saddle on y = +-1
  EXPECT_NEAR(t.saddles[2].abs_mu, 1.5 * kPi2, 1e-9);
}

TEST(Prefactor, RejectsDegenerateDeterminant) {
  auto t = synthetic(2, {0.0}, {1.0}, {0.0});
  EXPECT_THROW(ek_prefactor(t, 0), InvalidArgument);
  EXPECT_THROW(ek_prefactor(t, 3), InvalidArgument);
}

TEST(Rates, SymmetricLatticeAtHalf) {
  const auto t = fixture::lattice_table(1.0);
  EXPECT_NEAR(ek_rate(t, 0, 0.5), kPi * std::exp(-8.0), 1e-12);
  EXPECT_NEAR(ek_rate(t, 0, 0.5), 1.0539e-3, 1e-7);
  EXPECT_NEAR(lambda_h_asymptotic(t, 0.5), 4.0 * kPi * std::exp(-8.0), 1e-12);
  EXPECT_NEAR(lambda_h_asymptotic(t, 0.5), 4.2156e-3, 1e-7);
  EXPECT_THROW(ek_rate(t, 0, 0.0), InvalidArgument);
  EXPECT_THROW(lambda_h_asymptotic(t, -1.0), InvalidArgument);
}

TEST(Rates, AnisotropicLatticeAtHalf) {
  const auto t = fixture::lattice_table(1.5);
  EXPECT_NEAR(lambda_h_asymptotic(t, 0.5), 2.0 * kPi * std::exp(-8.0), 1e-12);
  EXPECT_NEAR(ek_rate(t, 3, 0.5), 1.5 * kPi * std::exp(-12.0), 1e-14);
}

TEST(Rates, MonotoneInTemperatureAndBarrier) {
  const auto t = synthetic(2, {0.0, 0.5, 1.0, 4.0}, {1, 1, 1, 1}, {1, 1, 1, 1});
  for (std::size_t k = 0; k < t.size(); ++k) {
    double prev = 0.0;
    for (double h : {0.1, 0.2, 0.4, 0.8}) {
      const double r = ek_rate(t, k, h);
      EXPECT_GT(r, prev);
      prev = r;
    }
  }
  for (std::size_t k = 1; k < t.size(); ++k) EXPECT_LT(ek_rate(t, k, 0.3), ek_rate(t, k - 1, 0.3));
}

TEST(Rates, ArrheniusSlopeIsExact) {
  const auto t = fixture::lattice_table(1.0);
  const double h1 = 0.5, h2 = 0.25;
  const double slope = (std::log(lambda_h_asymptotic(t, h2)) - std::log(lambda_h_asymptotic(t, h1))) /
                       (1.0 / h2 - 1.0 / h1);
  EXPECT_NEAR(slope, -4.0, 1e-10);
}

TEST(ExitProbabilities, SymmetricLatticeQuarterEach) {
  const auto t = fixture::lattice_table(1.0);
  for (double h : {0.5, 0.3, 0.1}) {
    const auto p = exit_probabilities(t, h);
    for (double v : p.normalized) EXPECT_NEAR(v, 0.25, 1e-12);
    EXPECT_NEAR(p.other, 0.0, 1e-12);
  }
}

TEST(ExitProbabilities, AnisotropicLatticeSuppressesHighSaddles) {
  const auto t = fixture::lattice_table(1.5);
  const auto p = exit_probabilities(t, 0.5);
  EXPECT_NEAR(p.leading[0], 0.5, 1e-9);
  EXPECT_NEAR(p.leading[1], 0.5, 1e-9);
  const double high = 0.75 * std::exp(-4.0);
  EXPECT_NEAR(p.leading[2], high, 1e-9);
  EXPECT_NEAR(p.leading[3], high, 1e-9);
  EXPECT_NEAR(high, 1.374e-2, 1e-5);
  double sum = 0.0;
  for (double v : p.normalized) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(p.normalized[2] / p.normalized[0], 1.5 * std::exp(-4.0), 1e-12);
}

TEST(ExitProbabilities, SingleSaddleAndInvariances) {
  const auto one = synthetic(2, {0.3}, {2.0}, {5.0});
  EXPECT_NEAR(exit_probabilities(one, 0.2).normalized[0], 1.0, 1e-15);

  auto t = synthetic(2, {0.0, 0.0, 0.4}, {1.0, 3.0, 2.0}, {2.0, 5.0, 1.0});
  auto shifted = t;
  shifted.f_x0 += 7.0;
  for (auto& s : shifted.saddles) s.value += 7.0;
  const auto a = exit_probabilities(t, 0.3), b = exit_probabilities(shifted, 0.3);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a.normalized[k], b.normalized[k], 1e-12);

  auto swapped = t;
  std::swap(swapped.saddles[0], swapped.saddles[1]);
  const auto c = exit_probabilities(swapped, 0.3);
  EXPECT_NEAR(c.normalized[0], a.normalized[1], 1e-15);
  EXPECT_NEAR(c.normalized[1], a.normalized[0], 1e-15);
}

TEST(FluxAndMass, SymmetricLatticeClosedForms) {
  const auto t = fixture::lattice_table(1.0);
  const double h = 0.4;
  EXPECT_NEAR(mass_asymptotic(t, h) / (std::sqrt(0.4 * kPi) / kPi * std::exp(5.0)), 1.0, 1e-9);
  // 2 pi^2 * pi * pi^{-1/2} / pi^2 = 2 sqrt(pi)
  const double flux = 2.0 * std::sqrt(kPi) / std::sqrt(0.4) * std::exp(-5.0);
  EXPECT_NEAR(flux_asymptotic(t, 0, h) / flux, 1.0, 1e-9);
  EXPECT_NEAR(0.5 * h * flux_asymptotic(t, 0, h) / mass_asymptotic(t, h) /
                  (kPi * std::exp(-10.0)), 1.0, 1e-9);
}

TEST(FluxAndMass, IdentityOnRandomTables) {
  CounterRng rng(42, 0, Substream::kSampling);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 3;
    const int n = 1 + trial % 4;
    std::vector<double> values, mus, dets;
    for (int k = 0; k < n; ++k) {
      values.push_back(rng.uniform() * 2.0);
      mus.push_back(0.1 + 5.0 * rng.uniform());
      dets.push_back(0.1 + 10.0 * rng.uniform());
    }
    std::sort(values.begin(), values.end());
    const auto t = synthetic(d, values, mus, dets, 0.5 + 5.0 * rng.uniform(), -rng.uniform());
    const double h = 0.1 + 0.9 * rng.uniform();
    for (int k = 0; k < n; ++k) {
      const double lhs = std::log(0.5 * h) + log_flux_asymptotic(t, k, h) - log_mass_asymptotic(t, h);
      EXPECT_NEAR(std::exp(lhs - std::log(ek_rate(t, k, h))), 1.0, 1e-12);
    }
  }
}

TEST(FluxAndMass, PrintedCoefficientAgreesOnlyInOneDimension) {
  for (int d : {1, 2, 3}) {
    const auto t = synthetic(d, {0.2}, {1.3}, {2.1});
    const double gap = log_flux_asymptotic(t, 0, 0.3) - log_flux_asymptotic_pi3d4(t, 0, 0.3);
    EXPECT_NEAR(gap, (d - 1.0) * std::log(kPi), 1e-12) << d;
  }
}

TEST(Mixed, SymmetricLatticeConstants) {
  const auto t = fixture::lattice_table(1.0);
  EXPECT_NEAR(mixed_constant(t, 0), 2.0 * kPi, 1e-9);
  EXPECT_NEAR(mixed_eigenvalue_asymptotic(t, 0, 0.25), 2.0 * kPi * 0.25 * std::exp(-16.0), 1e-17);
  EXPECT_NEAR(mixed_eigenvalue_asymptotic(t, 0, 0.25), 1.7677e-7, 1e-11);
  EXPECT_NEAR(kappa_x0(t), 1.0 / kPi, 1e-12);
  EXPECT_NEAR(mixed_flux_constant(t, 0), std::sqrt(2.0), 1e-9);
  for (std::size_t k = 0; k < t.size(); ++k)
    EXPECT_DOUBLE_EQ(mixed_constant(t, k), 2.0 * ek_prefactor(t, k));
}

TEST(Extrapolation, RescalesByRateRatio) {
  const auto t = synthetic(2, {1.0}, {1.0}, {1.0});  // barrier 2
  EXPECT_NEAR(tad_extrapolate(t, 0, 1.0, 0.5, 0.25), std::exp(8.0), 1e-9);
  EXPECT_NEAR(tad_extrapolate(t, 0, 1.0, 0.5, 0.25), 2980.96, 0.01);
  EXPECT_DOUBLE_EQ(tad_extrapolate(t, 0, 3.5, 0.4, 0.4), 3.5);
  EXPECT_THROW(tad_extrapolate(t, 0, 1.0, 0.25, 0.5), InvalidArgument);
}

TEST(Extrapolation, OrderingPreservedWhenBarriersAgree) {
  // Brute force over sampled pairs: the low-temperature order of two events
  // equals the high-temperature order whenever the larger time also has the
  // larger barrier.
  CounterRng rng(9, 0, Substream::kSampling);
  for (int trial = 0; trial < 500; ++trial) {
    const double e1 = 0.2 + rng.uniform(), e2 = 0.2 + rng.uniform();
    const auto t = synthetic(2, {e1 - 1.0, e2 - 1.0}, {1, 1}, {1, 1});
    const double t1 = 0.1 + rng.uniform(), t2 = 0.1 + rng.uniform();
    const bool agree = (t1 < t2) == (e1 < e2);
    const double lo1 = tad_extrapolate(t, 0, t1, 0.5, 0.2);
    const double lo2 = tad_extrapolate(t, 1, t2, 0.5, 0.2);
    if (agree) {
      EXPECT_EQ(lo1 < lo2, t1 < t2);
    }
  }
}

TEST(Predict, BundlesEveryColumn) {
  const auto t = fixture::lattice_table(1.5);
  const auto r = predict(t, 0.3);
  ASSERT_EQ(r.rate.size(), 4u);
  EXPECT_NEAR(r.lambda, r.rate[0] + r.rate[1], 1e-15);
  EXPECT_NEAR(r.barrier[3], 3.0, 1e-12);
}

}  // namespace
