#pragma once

#include <kexit/domain.hpp>
#include <kexit/landscape.hpp>
#include <kexit/potential.hpp>

namespace kexit::fixture {

inline Box unit_square() { return Box(make_vec({-1, -1}), make_vec({1, 1})); }

/// [-1,1]^2 with one whole-face exit patch per saddle.
inline DomainSpec face_patches() {
  DomainSpec dom;
  dom.box = unit_square();
  dom.sigma = {{"east", {0, 1}, make_vec({1, 0}), 1.0},
               {"west", {0, -1}, make_vec({-1, 0}), 1.0},
               {"north", {1, 1}, make_vec({0, 1}), 1.0},
               {"south", {1, -1}, make_vec({0, -1}), 1.0}};
  return dom;
}

inline DomainSpec bare(const Box& box) { return DomainSpec{box, {}, {}}; }

inline SaddleTable lattice_table(double c, const DomainSpec& dom = face_patches()) {
  const auto p = Potential::cosine_lattice(c);
  const auto s = find_critical_points(p, dom, 16, 1e-10);
  return build_saddle_table(s.points, dom);
}

inline Potential quadratic(int dim, double coef = 0.5) {
  Polynomial poly{dim, {}};
  for (int a = 0; a < dim; ++a) {
    Monomial m{coef, {}};
    m.powers[a] = 2;
    poly.terms.push_back(m);
  }
  return Potential::polynomial(poly);
}

inline Potential zero_potential(int dim) { return Potential::polynomial({dim, {}}); }

}  // namespace kexit::fixture
