#include <kexit/spectral.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace kexit;

namespace {

// Lowest eigenvalue of -(h/2) times the 5-point Dirichlet Laplacian on a
// d-cube of edge L with spacing delta: (h/2) d (4/delta^2) sin^2(pi delta / 2L).
double discrete_laplacian_mode(double h, int d, double L, double delta) {
  const double s = std::sin(kPi * delta / (2.0 * L));
  return 0.5 * h * d * 4.0 / (delta * delta) * s * s;
}

TEST(Assemble, FlatPotentialMatchesLaplacianMode) {
  const auto g = assemble_dirichlet(fixture::zero_potential(2), fixture::unit_square(), 1.0, 0.01);
  const auto sol = principal_eigenpair(g);
  ASSERT_TRUE(sol.converged);
  EXPECT_NEAR(sol.lambda, discrete_laplacian_mode(1.0, 2, 2.0, 0.01), 1e-9);
  EXPECT_NEAR(sol.lambda / (kPi * kPi / 4.0), 1.0, 0.01);
}

TEST(Assemble, DetailedBalance) {
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.5), fixture::unit_square(), 0.3, 0.05);
  const double ulp = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int k = 0; k < g.stencil(); ++k) {
      const long j = g.neighbor(i, k);
      ASSERT_GE(g.rate(i, k), 0.0);
      if (j < 0) continue;
      const auto jj = static_cast<std::size_t>(j);
      const int back = k ^ 1;
      ASSERT_EQ(g.neighbor(jj, back), static_cast<long>(i));
      EXPECT_EQ(g.conductance(i, k), g.conductance(jj, back));
      // Both sides round exponentials whose arguments reach (f_max - f_min) / h,
      // so the products agree to that many ulps.
      const double a = g.weight(i) * g.rate(i, k), b = g.weight(jj) * g.rate(jj, back);
      const double span = 4.0 * (g.energy(g.node(i)) + g.energy(g.node(jj)) - 2.0 * g.f_min()) / g.h();
      EXPECT_LE(std::abs(a - b), (8.0 + span) * ulp * std::max(a, b));
    }
    double row = 0.0;
    for (int k = 0; k < g.stencil(); ++k) row += g.rate(i, k);
    EXPECT_DOUBLE_EQ(row, g.diagonal(i));
  }
}

TEST(Assemble, SecondOrderConsistencyInOneDimension) {
  // -Q u against -(h/2) u'' + f' u' for f = x^2/2 and u = cos(pi x / 2).
  const double h = 0.7;
  auto max_err = [&](double delta) {
    const Box box(make_vec({-1}), make_vec({1}));
    const auto g = assemble_dirichlet(fixture::quadratic(1), box, h, delta);
    std::vector<double> u(g.size()), out;
    for (std::size_t i = 0; i < g.size(); ++i)
      u[i] = std::cos(0.5 * kPi * g.grid().position(g.node(i))[0]);
    g.apply(u, out);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = g.grid().position(g.node(i))[0];
      const double exact = 0.5 * h * 0.25 * kPi * kPi * std::cos(0.5 * kPi * x) -
                           x * 0.5 * kPi * std::sin(0.5 * kPi * x);
      err = std::max(err, std::abs(out[i] - exact));
    }
    return err;
  };
  const double e1 = max_err(0.02), e2 = max_err(0.01);
  EXPECT_LT(e1, 1e-2);
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Assemble, RejectsBadGrids) {
  const auto p = Potential::cosine_lattice(1.0);
  const Box box = fixture::unit_square();
  EXPECT_THROW(assemble_dirichlet(p, box, 0.0, 0.01), InvalidArgument);
  EXPECT_THROW(assemble_dirichlet(p, box, 0.3, 0.03), InvalidArgument);  // 2 / 0.03 not integral
  EXPECT_THROW(assemble_dirichlet(p, box, 0.3, 0.5), InvalidArgument);
  EXPECT_THROW(assemble(p, box, 0.3, 0.1, BoundaryConditions::mixed({{0, 1}}, {})), InvalidArgument);
}

TEST(Eigenpair, PositiveAndNormalized) {
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.0), fixture::unit_square(), 0.5, 0.02);
  const auto sol = principal_eigenpair(g);
  ASSERT_TRUE(sol.converged);
  for (double v : sol.u) ASSERT_GT(v, 0.0);
  EXPECT_NEAR(g.dot(sol.u, sol.u) * g.grid().cell_volume(), 1.0, 1e-12);
  EXPECT_LE(sol.residual, std::max(1e-6 * sol.lambda, sol.residual_floor));
}

TEST(Eigenpair, SecondEigenvalueWellSeparated) {
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.0), fixture::unit_square(), 0.4, 0.02);
  const auto eig = small_eigenvalues(g, 1e9, 2);
  ASSERT_EQ(eig.size(), 2u);
  EXPECT_GT(eig[1], 10.0 * eig[0]);
  EXPECT_NEAR(eig[0] * std::exp(10.0) / (4.0 * kPi), 0.95, 0.1);
}

TEST(SmallEigenvalues, OneExponentiallySmallMode) {
  const double h = 0.3;
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.0), fixture::unit_square(), h, 0.02);
  EXPECT_EQ(small_eig_count(g, 0.1 * h), 1);
}

TEST(SmallEigenvalues, FlatPotentialThresholds) {
  const auto g = assemble_dirichlet(fixture::zero_potential(2), fixture::unit_square(), 1.0, 0.05);
  const double first = discrete_laplacian_mode(1.0, 2, 2.0, 0.05);
  EXPECT_EQ(small_eig_count(g, 0.9 * first), 0);
  EXPECT_EQ(small_eig_count(g, 1.1 * first), 1);
  // Second Dirichlet mode of the square is (h/2)(pi/2)^2 (1 + 4).
  EXPECT_GE(small_eig_count(g, 7.0), 2);
}

TEST(Eigenpair, ConservativeChainHasZeroEigenvalue) {
  const Box box = fixture::unit_square();
  const auto g = assemble(fixture::zero_potential(2), box, 1.0, 0.1,
                          BoundaryConditions::mixed({}, box.faces()));
  const auto sol = principal_eigenpair(g);
  EXPECT_EQ(sol.lambda, 0.0);
  for (double v : sol.u) EXPECT_DOUBLE_EQ(v, sol.u.front());
}

TEST(ExitAnalysis, SymmetricLatticeQuarters) {
  const auto dom = fixture::face_patches();
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.0), dom.box, 0.4, 0.01);
  const auto sol = principal_eigenpair(g);
  const auto r = exit_analysis(g, sol, dom);
  ASSERT_EQ(r.patches.size(), 4u);
  for (const auto& p : r.patches) EXPECT_NEAR(p.rate / r.lambda, 0.25, 1e-6) << p.label;
  EXPECT_LE(r.identity_rel_err, 1e-10);
  EXPECT_NEAR(r.probability("north"), 0.25, 1e-6);
  double qsd = 0.0;
  for (double v : r.qsd) qsd += v;
  EXPECT_NEAR(qsd, 1.0, 1e-12);
  double law = 0.0;
  for (const auto& [node, pr] : r.exit_law) law += pr;
  EXPECT_NEAR(law, 1.0, 1e-10);
}

TEST(ExitAnalysis, AnisotropicHighSaddleSuppression) {
  const auto dom = fixture::face_patches();
  const double h = 0.3;
  const auto g = assemble_dirichlet(Potential::cosine_lattice(1.5), dom.box, h, 0.01);
  const auto r = exit_analysis(g, principal_eigenpair(g), dom);
  const double low = 0.5 * (r.patches[0].rate + r.patches[1].rate);
  const double high = 0.5 * (r.patches[2].rate + r.patches[3].rate);
  const double ratio = high / low / (1.5 * std::exp(-2.0 / h));
  EXPECT_GE(ratio, 0.6);
  EXPECT_LE(ratio, 1.6);
  EXPECT_LE(r.identity_rel_err, 1e-10);
}

TEST(ExitAnalysis, RequiresDirichletAssembly) {
  const Box box = fixture::unit_square();
  const auto g = assemble(Potential::cosine_lattice(1.0), box, 0.5, 0.1,
                          BoundaryConditions::mixed({{0, 1}}, {{0, -1}, {1, -1}, {1, 1}}));
  const auto sol = principal_eigenpair(g);
  EXPECT_THROW(exit_analysis(g, sol, fixture::face_patches()), InvalidArgument);
}

TEST(Mixed, SingleChannelEigenvalue) {
  const auto p = Potential::cosine_lattice(1.0);
  const Box sub(make_vec({-0.6, -0.6}), make_vec({1, 0.6}));
  const double h = 0.35;
  const auto r = mixed_eigenvalue(p, sub, {0, 1}, h, 0.01);
  EXPECT_NEAR(r.lambda_witten, 2.0 * h * r.mu_gen, 1e-18);
  const double ratio = r.lambda_witten / (2.0 * kPi * h * std::exp(-4.0 / h));
  EXPECT_GE(ratio, 0.5);
  EXPECT_LE(ratio, 1.5);
  EXPECT_GE(r.min_neumann_normal_derivative, -1e-9);
}

TEST(Mixed, RejectsInvalidSubdomains) {
  const auto p = Potential::cosine_lattice(1.0);
  // No saddle on the absorbing face.
  EXPECT_THROW(mixed_eigenvalue(p, Box(make_vec({-0.6, -0.6}), make_vec({1, 0.6})), {0, -1}, 0.35, 0.02),
               InvalidArgument);
  // Minimum outside the sub-box.
  EXPECT_THROW(mixed_eigenvalue(p, Box(make_vec({0.2, -0.6}), make_vec({1, 0.6})), {0, 1}, 0.35, 0.02),
               InvalidArgument);
}

}  // namespace
