#pragma once

// Critical points of f on a box basin, their classification, the saddle
// table, generalized critical point counts and the structural checks on
// (f, basin) that the exit asymptotics rely on.

#include <kexit/agmon.hpp>
#include <kexit/domain.hpp>
#include <kexit/potential.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kexit {

enum class PointKind { Interior, Boundary };

struct BoundaryData {
  Face face;
  Vec normal;                  // outward unit normal
  double mu = 0.0;             // n^T Hess f n
  double normal_derivative = 0.0;
  int restricted_index = 0;    // index of f restricted to the face
  Vec restricted_eigs;         // sorted eigenvalues of the face Hessian
};

struct CriticalPoint {
  Vec location;
  double value = 0.0;
  double grad_norm = 0.0;       // norm of the gradient Newton drove to zero (tangential on faces)
  double full_grad_norm = 0.0;  // |grad f|
  Vec hess_eigs;                // sorted ascending
  double det_hess = 0.0;
  PointKind kind = PointKind::Interior;
  int index = 0;                // negative eigenvalues of the full Hessian
  std::optional<BoundaryData> boundary;
  std::string patch;            // Sigma label when the point sits in a declared patch
};

struct CriticalSearch {
  std::vector<CriticalPoint> points;
  std::size_t seeds = 0;
  std::size_t unconverged = 0;  // Newton runs that failed or left the box
};

class DegeneratePoint : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline Vec sorted_eigs(const Mat& h) {
  if (h.rows() == 0) return Vec(0);
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

inline int count_negative(const Vec& eigs) {
  int n = 0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) n += eigs[i] < 0.0;
  return n;
}

// Newton on grad_T f = 0 over the coordinates `free` (all coordinates for
// interior search), others held fixed. Returns the root or nullopt.
inline std::optional<Vec> newton_root(const Potential& p, Vec x, const std::vector<int>& free,
                                      const Box& box, double tol, int max_iter = 100) {
  const int m = static_cast<int>(free.size());
  const double max_step = 0.25 * box.diameter();
  for (int it = 0; it <= max_iter; ++it) {
    const Vec g_full = p.gradient(x);
    Vec g(m);
    for (int i = 0; i < m; ++i) g[i] = g_full[free[i]];
    if (!all_finite(g)) return std::nullopt;
    if (m == 0 || g.norm() <= tol) return x;
    if (it == max_iter) break;
    const Mat h_full = p.hessian(x);
    Mat h(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) h(i, j) = h_full(free[i], free[j]);
    const Vec eigs = sorted_eigs(h);
    if (eigs.cwiseAbs().minCoeff() < 1e-10) h += 1e-10 * Mat::Identity(m, m);
    Vec s = h.fullPivLu().solve(-g);
    if (!all_finite(s)) return std::nullopt;
    if (s.norm() > max_step) s *= max_step / s.norm();
    for (int i = 0; i < m; ++i) x[free[i]] += s[i];
    if (!box.contains(x, box.diameter())) return std::nullopt;
  }
  return std::nullopt;
}

inline bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace detail

/// Classifies x as a critical point. For boundary points `face` is the face on
/// which f restricted has a critical point. Throws DegeneratePoint when the
/// relevant Hessian has an eigenvalue below the degeneracy floor.
inline CriticalPoint classify_point(const Potential& p, const DomainSpec& dom, const Vec& x,
                                    std::optional<Face> face, double degeneracy_floor = 1e-8) {
  const EvalResult e = p.evaluate(x);
  CriticalPoint cp;
  cp.location = x;
  cp.value = e.value;
  cp.full_grad_norm = e.gradient.norm();
  cp.hess_eigs = detail::sorted_eigs(e.hessian);
  cp.det_hess = cp.hess_eigs.prod();
  cp.index = detail::count_negative(cp.hess_eigs);
  const double scale = std::max(1.0, cp.hess_eigs.cwiseAbs().maxCoeff());
  if (!face) {
    cp.kind = PointKind::Interior;
    cp.grad_norm = cp.full_grad_norm;
    if (cp.hess_eigs.cwiseAbs().minCoeff() <= degeneracy_floor * scale)
      throw DegeneratePoint("degenerate (non-Morse) interior critical point at " + to_string(x));
  } else {
    cp.kind = PointKind::Boundary;
    BoundaryData b;
    b.face = *face;
    b.normal = dom.box.outward_normal(*face);
    b.mu = b.normal.dot(e.hessian * b.normal);
    b.normal_derivative = b.normal.dot(e.gradient);
    const int d = p.dimension();
    std::vector<int> free;
    for (int a = 0; a < d; ++a)
      if (a != face->axis) free.push_back(a);
    Mat hr(static_cast<int>(free.size()), static_cast<int>(free.size()));
    Vec gt(static_cast<int>(free.size()));
    for (std::size_t i = 0; i < free.size(); ++i) {
      gt[static_cast<int>(i)] = e.gradient[free[i]];
      for (std::size_t j = 0; j < free.size(); ++j)
        hr(static_cast<int>(i), static_cast<int>(j)) = e.hessian(free[i], free[j]);
    }
    cp.grad_norm = free.empty() ? 0.0 : gt.norm();
    b.restricted_eigs = detail::sorted_eigs(hr);
    b.restricted_index = detail::count_negative(b.restricted_eigs);
    if (b.restricted_eigs.size() &&
        b.restricted_eigs.cwiseAbs().minCoeff() <= degeneracy_floor * scale)
      throw DegeneratePoint("degenerate (non-Morse) boundary critical point at " + to_string(x) +
                            " on face " + face->name());
    cp.boundary = b;
  }
  if (auto k = dom.sigma_at(x)) cp.patch = dom.sigma[*k].label;
  return cp;
}

/// Newton search for critical points of f in the open box and of f restricted
/// to each closed face, from a regular seed grid. Deduplicates within 10*tol.
inline CriticalSearch find_critical_points(const Potential& p, const DomainSpec& dom,
                                           int seeds_per_axis, double tol) {
  if (seeds_per_axis < 4) throw InvalidArgument("seeds_per_axis must be >= 4");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  const int d = dom.dim();
  if (p.dimension() != d) throw InvalidArgument("potential and domain dimensions differ");
  const Box& box = dom.box;
  const double dedupe = 10.0 * tol;
  CriticalSearch out;

  std::vector<Vec> interior;
  std::vector<std::pair<Vec, Face>> boundary;

  auto seen = [&](const Vec& x) {
    for (const auto& y : interior)
      if ((x - y).norm() <= dedupe) return true;
    for (const auto& [y, f] : boundary)
      if ((x - y).norm() <= dedupe) return true;
    return false;
  };

  // Interior: seeds at cell centres of the seed lattice.
  {
    std::vector<int> all(d);
    for (int a = 0; a < d; ++a) all[a] = a;
    std::array<int, kMaxDim> c{};
    long total = 1;
    for (int a = 0; a < d; ++a) total *= seeds_per_axis;
    for (long s = 0; s < total; ++s) {
      long r = s;
      Vec x(d);
      for (int a = d - 1; a >= 0; --a) {
        c[a] = static_cast<int>(r % seeds_per_axis);
        r /= seeds_per_axis;
        x[a] = box.lower[a] + box.extent(a) * (c[a] + 0.5) / seeds_per_axis;
      }
      ++out.seeds;
      auto root = detail::newton_root(p, x, all, box, tol);
      if (!root) {
        ++out.unconverged;
        continue;
      }
      // Roots on or next to the boundary are picked up by the face search.
      if (!box.strictly_inside(*root, dedupe)) continue;
      if (!seen(*root)) interior.push_back(*root);
    }
  }

  // Faces: closed face parameterisations, seeds include the face edges.
  for (const Face& face : box.faces()) {
    std::vector<int> free;
    for (int a = 0; a < d; ++a)
      if (a != face.axis) free.push_back(a);
    const int m = static_cast<int>(free.size());
    long total = 1;
    for (int i = 0; i < m; ++i) total *= seeds_per_axis;
    for (long s = 0; s < total; ++s) {
      long r = s;
      Vec x(d);
      x[face.axis] = box.face_value(face);
      for (int i = m - 1; i >= 0; --i) {
        const int a = free[i];
        const long ci = r % seeds_per_axis;
        r /= seeds_per_axis;
        x[a] = box.lower[a] + box.extent(a) * static_cast<double>(ci) / (seeds_per_axis - 1);
      }
      ++out.seeds;
      auto root = detail::newton_root(p, x, free, box, tol);
      if (!root || !box.contains(*root, dedupe)) {
        ++out.unconverged;
        continue;
      }
      Vec y = *root;
      for (int a = 0; a < d; ++a) y[a] = std::clamp(y[a], box.lower[a], box.upper[a]);
      if (!seen(y)) boundary.emplace_back(y, face);
    }
  }

  for (const auto& x : interior) out.points.push_back(classify_point(p, dom, x, std::nullopt));
  for (const auto& [x, f] : boundary) out.points.push_back(classify_point(p, dom, x, f));
  std::sort(out.points.begin(), out.points.end(), [](const auto& a, const auto& b) {
    if (a.kind != b.kind) return a.kind == PointKind::Interior;
    return detail::lex_less(a.location, b.location);
  });
  return out;
}

/// A boundary critical point of f itself (|grad f| = 0) that is a local
/// minimum of f on its face and a maximum in the normal direction.
inline bool is_boundary_saddle(const CriticalPoint& cp, double grad_tol) {
  return cp.kind == PointKind::Boundary && cp.boundary->restricted_index == 0 &&
         cp.full_grad_norm <= grad_tol && cp.boundary->mu < 0.0;
}

struct SaddleEntry {
  std::string label;
  Vec location;
  Face face;
  double value = 0.0;
  double abs_mu = 0.0;
  double abs_det_hess = 0.0;
  std::string sigma_label;
  std::string gamma_label;
};

struct SaddleTable {
  int dim = 0;
  std::vector<SaddleEntry> saddles;  // ascending energy
  std::size_t n0 = 0;                // saddles at the lowest level
  Vec x0;
  double f_x0 = 0.0;
  double det_hess_x0 = 0.0;
  double min_hess_eig_x0 = 0.0;

  std::size_t size() const { return saddles.size(); }
  const SaddleEntry& at(std::size_t k) const {
    if (k >= saddles.size()) throw InvalidArgument("saddle index out of range");
    return saddles[k];
  }
  double barrier(std::size_t k) const { return at(k).value - f_x0; }

  std::optional<std::size_t> find(const std::string& label) const {
    for (std::size_t k = 0; k < saddles.size(); ++k)
      if (saddles[k].label == label) return k;
    return std::nullopt;
  }
};

inline constexpr double kSaddleTieTolerance = 1e-10;

/// Orders the boundary saddles by energy, identifies the reference minimum and
/// the number n0 of saddles at the lowest level. Unlabelled saddles get z1..zn.
inline SaddleTable build_saddle_table(std::span<const CriticalPoint> points, const DomainSpec& dom,
                                      double grad_tol = 1e-8) {
  SaddleTable t;
  t.dim = dom.dim();
  const CriticalPoint* minimum = nullptr;
  std::size_t interior = 0;
  std::vector<const CriticalPoint*> saddles;
  for (const auto& cp : points) {
    if (cp.kind == PointKind::Interior) {
      ++interior;
      minimum = &cp;
      continue;
    }
    if (cp.boundary->restricted_index != 0) continue;
    if (is_boundary_saddle(cp, grad_tol)) {
      saddles.push_back(&cp);
    } else {
      throw InvalidArgument("boundary local minimum at " + to_string(cp.location) +
                            " is not a saddle point of f (mu = " +
                            std::to_string(cp.boundary->mu) + ")");
    }
  }
  if (interior != 1)
    throw InvalidArgument("expected exactly one interior critical point, found " +
                          std::to_string(interior));
  if (minimum->index != 0) throw InvalidArgument("the interior critical point is not a minimum");
  if (saddles.empty()) throw InvalidArgument("no saddle point on the boundary");

  std::sort(saddles.begin(), saddles.end(), [](const auto* a, const auto* b) {
    if (a->value != b->value) return a->value < b->value;
    return detail::lex_less(a->location, b->location);
  });

  t.x0 = minimum->location;
  t.f_x0 = minimum->value;
  t.det_hess_x0 = minimum->det_hess;
  t.min_hess_eig_x0 = minimum->hess_eigs.minCoeff();
  for (std::size_t k = 0; k < saddles.size(); ++k) {
    const auto& cp = *saddles[k];
    SaddleEntry s;
    s.location = cp.location;
    s.face = cp.boundary->face;
    s.value = cp.value;
    s.abs_mu = std::abs(cp.boundary->mu);
    s.abs_det_hess = std::abs(cp.det_hess);
    s.label = cp.patch.empty() ? "z" + std::to_string(k + 1) : cp.patch;
    s.sigma_label = cp.patch;
    s.gamma_label = s.label;
    t.saddles.push_back(std::move(s));
  }
  const double lowest = t.saddles.front().value;
  t.n0 = static_cast<std::size_t>(std::count_if(
      t.saddles.begin(), t.saddles.end(),
      [&](const SaddleEntry& s) { return s.value <= lowest + kSaddleTieTolerance; }));
  return t;
}

/// Default Sigma radius: a fifth of the smallest distance between saddles
/// (or of the smallest box extent for a single saddle).
inline double default_patch_radius(const SaddleTable& t, const Box& box) {
  double sep = box.min_extent();
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      sep = std::min(sep, (t.saddles[i].location - t.saddles[j].location).norm());
  return 0.2 * sep;
}

/// Adds a Sigma patch of radius rho around every saddle not already covered,
/// labelled with the saddle's table label, and relabels the table accordingly.
inline DomainSpec with_saddle_patches(DomainSpec dom, SaddleTable& table, double rho) {
  for (auto& s : table.saddles) {
    if (!s.sigma_label.empty()) continue;
    dom.sigma.push_back({s.label, s.face, s.location, rho});
    s.sigma_label = s.label;
  }
  dom.validate();
  return dom;
}

struct GeneralizedCounts {
  std::vector<int> interior, boundary1, boundary2, total;
};

/// Generalized critical point counts per degree q = 0..d: interior points of
/// index q, boundary points with restricted index q-1 that either have
/// outward-pointing gradient (boundary1) or are critical for f with a
/// negative normal curvature (boundary2).
inline GeneralizedCounts count_generalized(std::span<const CriticalPoint> points, int dim,
                                           double grad_tol = 1e-8) {
  GeneralizedCounts c;
  c.interior.assign(dim + 1, 0);
  c.boundary1.assign(dim + 1, 0);
  c.boundary2.assign(dim + 1, 0);
  c.total.assign(dim + 1, 0);
  for (const auto& cp : points) {
    if (cp.kind == PointKind::Interior) {
      ++c.interior[cp.index];
      continue;
    }
    const auto& b = *cp.boundary;
    const int q = b.restricted_index + 1;
    if (q > dim) continue;
    if (cp.full_grad_norm <= grad_tol) {
      if (b.mu < 0.0) ++c.boundary2[q];
    } else if (b.normal_derivative > 0.0) {
      ++c.boundary1[q];
    }
  }
  for (int q = 0; q <= dim; ++q) c.total[q] = c.interior[q] + c.boundary1[q] + c.boundary2[q];
  return c;
}

struct AssumptionViolation {
  std::string what;
  Vec location;
  double value = 0.0;
};

struct AssumptionReport {
  bool ok = false;
  bool normal_derivative_ok = false;  // d_n f >= -tol on the boundary
  bool boundary_minima_ok = false;    // boundary minima of f on faces are saddles of f
  bool unique_minimum_ok = false;     // one interior critical point, a minimum
  double min_normal_derivative = 0.0;
  std::vector<AssumptionViolation> violations;
};

/// Samples the structural assumptions on (f, basin): nonnegative normal
/// derivative, every local minimum of f on the boundary a saddle of f, and a
/// unique interior critical point which is a minimum.
inline AssumptionReport check_assumptions(const Potential& p, const DomainSpec& dom,
                                          std::span<const CriticalPoint> points,
                                          int n_boundary_samples, double tol = 1e-9,
                                          double grad_tol = 1e-8) {
  if (n_boundary_samples < 100) throw InvalidArgument("n_boundary_samples must be >= 100");
  AssumptionReport r;
  const Box& box = dom.box;
  const int d = dom.dim();
  r.min_normal_derivative = std::numeric_limits<double>::infinity();
  std::size_t bad_samples = 0;
  for (const Face& face : box.faces()) {
    std::vector<int> free;
    for (int a = 0; a < d; ++a)
      if (a != face.axis) free.push_back(a);
    const int m = static_cast<int>(free.size());
    const int per_axis =
        m == 0 ? 1
               : std::max(2, static_cast<int>(std::ceil(std::pow(n_boundary_samples, 1.0 / m))));
    long total = 1;
    for (int i = 0; i < m; ++i) total *= per_axis;
    const Vec n = box.outward_normal(face);
    for (long s = 0; s < total; ++s) {
      long rem = s;
      Vec x(d);
      x[face.axis] = box.face_value(face);
      for (int i = m - 1; i >= 0; --i) {
        const long ci = rem % per_axis;
        rem /= per_axis;
        x[free[i]] = box.lower[free[i]] + box.extent(free[i]) * ci / double(per_axis - 1);
      }
      const double dn = n.dot(p.gradient(x));
      r.min_normal_derivative = std::min(r.min_normal_derivative, dn);
      if (dn < -tol) {
        ++bad_samples;
        if (r.violations.size() < 64)
          r.violations.push_back({"negative normal derivative on " + face.name(), x, dn});
      }
    }
  }
  r.normal_derivative_ok = bad_samples == 0;

  r.boundary_minima_ok = true;
  std::size_t interior = 0;
  bool interior_is_min = true;
  for (const auto& cp : points) {
    if (cp.kind == PointKind::Interior) {
      ++interior;
      interior_is_min = interior_is_min && cp.index == 0;
      continue;
    }
    if (cp.boundary->restricted_index == 0 && !is_boundary_saddle(cp, grad_tol)) {
      r.boundary_minima_ok = false;
      r.violations.push_back(
          {"boundary minimum is not a saddle of f", cp.location, cp.boundary->mu});
    }
  }
  r.unique_minimum_ok = interior == 1 && interior_is_min;
  if (!r.unique_minimum_ok)
    r.violations.push_back({"interior critical points: " + std::to_string(interior) +
                                (interior_is_min ? "" : " (not all minima)"),
                            Vec::Zero(d), static_cast<double>(interior)});
  r.ok = r.normal_derivative_ok && r.boundary_minima_ok && r.unique_minimum_ok;
  return r;
}

struct HypothesisReport {
  std::vector<bool> hypo1_ok;          // per saddle
  std::vector<double> hypo1_margin;    // inf d_a - max(...), per saddle
  std::vector<double> hypo1_eps_grid;  // discretization bound of the Agmon field used
  bool hypo2_ok = false;
  double hypo2_lhs = 0.0;  // f(z_1) - f(x_0)
  double hypo2_rhs = 0.0;  // f(z_n) - f(z_1)
  std::vector<bool> hypo2_bis_ok;      // per saddle above the lowest level
  std::vector<double> hypo2_bis_margin;
};

/// Barrier-separation hypotheses on the saddle table. `fields[k]` must be the
/// Agmon field sourced at saddle k.
inline HypothesisReport check_hypotheses(const SaddleTable& t, const DomainSpec& dom,
                                         std::span<const AgmonField> fields) {
  if (fields.size() != t.size())
    throw InvalidArgument("missing Agmon field: need one per saddle (" +
                          std::to_string(t.size()) + "), got " + std::to_string(fields.size()));
  HypothesisReport r;
  const double f1 = t.saddles.front().value;
  const double fn = t.saddles.back().value;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& s = t.saddles[k];
    if ((fields[k].source - s.location).norm() > 2.0 * fields[k].grid.box().diameter() * 1e-6 +
                                                     fields[k].max_spacing())
      throw InvalidArgument("Agmon field " + std::to_string(k) + " is not sourced at saddle " +
                            s.label);
    const double inf = boundary_inf(fields[k], dom, s.gamma_label);
    const double rhs = std::max(fn - s.value, s.value - f1);
    r.hypo1_margin.push_back(inf - rhs);
    r.hypo1_ok.push_back(inf > rhs);
    r.hypo1_eps_grid.push_back(fields[k].eps_grid);
  }
  r.hypo2_lhs = f1 - t.f_x0;
  r.hypo2_rhs = fn - f1;
  r.hypo2_ok = r.hypo2_lhs > r.hypo2_rhs;
  for (std::size_t k = t.n0; k < t.size(); ++k) {
    const double margin = (f1 - t.f_x0) - 2.0 * (t.saddles[k].value - f1);
    r.hypo2_bis_margin.push_back(margin);
    r.hypo2_bis_ok.push_back(margin > 0.0);
  }
  return r;
}

}  // namespace kexit
