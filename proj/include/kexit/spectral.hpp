#pragma once

// Reversible jump-chain discretization of the generator (h/2) Lap - grad f . grad
// on a box, killed at Dirichlet nodes and reflected at Neumann faces, with its
// principal eigenpair, quasi-stationary exit statistics and small-eigenvalue count.

#include <kexit/domain.hpp>
#include <kexit/grid.hpp>
#include <kexit/landscape.hpp>
#include <kexit/potential.hpp>
#include <kexit/random.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kexit {

struct BoundaryConditions {
  std::vector<Face> dirichlet;
  std::vector<Face> neumann;

  static BoundaryConditions dirichlet_all(int dim) {
    BoundaryConditions bc;
    bc.dirichlet = Box(Vec::Zero(dim), Vec::Ones(dim)).faces();
    return bc;
  }

  static BoundaryConditions mixed(std::vector<Face> dirichlet, std::vector<Face> neumann) {
    return {std::move(dirichlet), std::move(neumann)};
  }

  bool all_dirichlet(int dim) const {
    return static_cast<int>(dirichlet.size()) == 2 * dim && neumann.empty();
  }

  /// Every face must be listed exactly once.
  void validate(int dim) const {
    std::vector<int> seen(2 * dim, 0);
    for (const auto* list : {&dirichlet, &neumann}) {
      for (const Face& f : *list) {
        if (f.axis < 0 || f.axis >= dim) throw InvalidArgument("face axis out of range");
        ++seen[2 * f.axis + (f.side > 0)];
      }
    }
    for (int s : seen)
      if (s != 1)
        throw InvalidArgument("boundary conditions must assign every face exactly once");
  }
};

/// Jump chain on the unknown (non-Dirichlet) nodes. Rates to Dirichlet
/// neighbours are kept as exit channels; edges through Neumann faces do not exist.
class DiscreteGenerator {
 public:
  static constexpr int kNoEdge = -1;
  static constexpr int kAbsorbed = -2;

  const Grid& grid() const { return grid_; }
  double h() const { return h_; }
  double delta() const { return delta_; }
  double f_min() const { return f_min_; }
  int dim() const { return grid_.dim(); }
  int stencil() const { return 2 * grid_.dim(); }
  bool all_dirichlet() const { return all_dirichlet_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t node(std::size_t i) const { return nodes_[i]; }
  /// Unknown index of a grid node, or -1 for Dirichlet nodes.
  long unknown(std::size_t grid_node) const { return unknown_[grid_node]; }
  double energy(std::size_t grid_node) const { return f_[grid_node]; }

  /// e^{-2 (f_i - f_min) / h} on unknown i.
  double weight(std::size_t i) const { return pi_[i]; }
  const std::vector<double>& weights() const { return pi_; }

  /// Neighbour slot k of unknown i: unknown index, kAbsorbed or kNoEdge.
  long neighbor(std::size_t i, int k) const { return nbr_[i * stencil() + k]; }
  /// Grid node behind slot k (meaningful unless kNoEdge).
  std::size_t neighbor_node(std::size_t i, int k) const { return nbr_node_[i * stencil() + k]; }
  /// Jump rate from unknown i through slot k.
  double rate(std::size_t i, int k) const { return q_[i * stencil() + k]; }
  /// pi_i q_{i->j}, computed symmetrically so both directions are bitwise equal.
  double conductance(std::size_t i, int k) const { return c_[i * stencil() + k]; }

  double kill_rate(std::size_t i) const { return kill_[i]; }
  double diagonal(std::size_t i) const { return diag_[i]; }

  /// (-Q u)_i in difference form: sum_j q_ij (u_i - u_j) with u = 0 on Dirichlet nodes.
  void apply(const std::vector<double>& u, std::vector<double>& out) const {
    const int s = stencil();
    out.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      double acc = 0.0;
      for (int k = 0; k < s; ++k) {
        const long j = nbr_[i * s + k];
        if (j == kNoEdge) continue;
        acc += q_[i * s + k] * (j == kAbsorbed ? u[i] : u[i] - u[static_cast<std::size_t>(j)]);
      }
      out[i] = acc;
    }
  }

  /// Weighted Dirichlet form  sum over edges c (u_i - u_j)^2 + sum over exits c u_i^2.
  double dirichlet_form(const std::vector<double>& u) const {
    const int s = stencil();
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (int k = 0; k < s; ++k) {
        const long j = nbr_[i * s + k];
        if (j == kNoEdge) continue;
        if (j == kAbsorbed) {
          e += c_[i * s + k] * u[i] * u[i];
        } else if (static_cast<std::size_t>(j) > i) {
          const double d = u[i] - u[static_cast<std::size_t>(j)];
          e += c_[i * s + k] * d * d;
        }
      }
    }
    return e;
  }

  double dot(const std::vector<double>& a, const std::vector<double>& b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += pi_[i] * a[i] * b[i];
    return s;
  }

  friend DiscreteGenerator assemble(const Potential&, const Box&, double, double,
                                    const BoundaryConditions&);

 private:
  Grid grid_;
  double h_ = 0.0, delta_ = 0.0, f_min_ = 0.0;
  bool all_dirichlet_ = true;
  std::vector<double> f_;
  std::vector<long> unknown_;
  std::vector<std::size_t> nodes_;
  std::vector<double> pi_, kill_, diag_;
  std::vector<long> nbr_;
  std::vector<std::size_t> nbr_node_;
  std::vector<double> q_, c_;
};

inline DiscreteGenerator assemble(const Potential& p, const Box& box, double h, double delta,
                                  const BoundaryConditions& bc) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("temperature h must be positive");
  if (!(delta > 0.0)) throw InvalidArgument("grid spacing must be positive");
  if (p.dimension() != box.dim()) throw InvalidArgument("potential and box dimensions differ");
  bc.validate(box.dim());
  const int d = box.dim();
  std::array<int, kMaxDim> n{};
  for (int a = 0; a < d; ++a) {
    const double cells = box.extent(a) / delta;
    const long rounded = std::lround(cells);
    if (std::abs(cells - static_cast<double>(rounded)) > 1e-6)
      throw InvalidArgument("grid spacing does not divide the box edge along axis " +
                            std::to_string(a));
    n[a] = static_cast<int>(rounded) + 1;
    if (n[a] < 8) throw InvalidArgument("grid too small: fewer than 8 nodes per axis");
  }

  DiscreteGenerator g;
  g.grid_ = Grid(box, n);
  g.h_ = h;
  g.delta_ = delta;
  g.all_dirichlet_ = bc.all_dirichlet(d);
  const std::size_t total = g.grid_.size();
  g.f_.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    g.f_[i] = p.value(g.grid_.position(i));
    if (!std::isfinite(g.f_[i])) throw NumericalError("non-finite energy on the grid");
  }

  g.unknown_.assign(total, -1);
  for (std::size_t i = 0; i < total; ++i) {
    bool absorbing = false;
    for (const Face& f : bc.dirichlet) absorbing = absorbing || g.grid_.on_face(i, f);
    if (!absorbing) {
      g.unknown_[i] = static_cast<long>(g.nodes_.size());
      g.nodes_.push_back(i);
    }
  }
  if (g.nodes_.empty()) throw InvalidArgument("no unknown nodes: every node is absorbing");

  // Reference energy: minimum over every grid node, absorbing ones included.
  g.f_min_ = std::numeric_limits<double>::infinity();
  for (double v : g.f_) g.f_min_ = std::min(g.f_min_, v);

  const int s = 2 * d;
  const std::size_t m = g.nodes_.size();
  g.pi_.resize(m);
  g.kill_.assign(m, 0.0);
  g.diag_.assign(m, 0.0);
  g.nbr_.assign(m * s, DiscreteGenerator::kNoEdge);
  g.nbr_node_.assign(m * s, 0);
  g.q_.assign(m * s, 0.0);
  g.c_.assign(m * s, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t gi = g.nodes_[i];
    const double fi = g.f_[gi];
    g.pi_[i] = std::exp(-2.0 * (fi - g.f_min_) / h);
    const auto ci = g.grid_.coords(gi);
    for (int a = 0; a < d; ++a) {
      const double scale = h / (2.0 * g.grid_.spacing(a) * g.grid_.spacing(a));
      for (int side = 0; side < 2; ++side) {
        const int k = 2 * a + side;
        const int cj = ci[a] + (side ? 1 : -1);
        if (cj < 0 || cj >= n[a]) continue;  // Neumann face: no edge leaves the box
        auto cc = ci;
        cc[a] = cj;
        const std::size_t gj = g.grid_.index(cc);
        const double fj = g.f_[gj];
        const long uj = g.unknown_[gj];
        g.nbr_[i * s + k] = uj < 0 ? DiscreteGenerator::kAbsorbed : uj;
        g.nbr_node_[i * s + k] = gj;
        g.q_[i * s + k] = scale * std::exp(-(fj - fi) / h);
        g.c_[i * s + k] = scale * std::exp(-(fi + fj - 2.0 * g.f_min_) / h);
        g.diag_[i] += g.q_[i * s + k];
        if (uj < 0) g.kill_[i] += g.q_[i * s + k];
      }
    }
  }
  return g;
}

inline DiscreteGenerator assemble_dirichlet(const Potential& p, const Box& box, double h,
                                            double delta) {
  return assemble(p, box, h, delta, BoundaryConditions::dirichlet_all(box.dim()));
}

struct SolverOptions {
  double tol = 1e-12;        // relative change of the Rayleigh quotient
  int max_iters = 200;       // outer inverse iterations
  double inner_tol = 1e-14;  // relative residual of each linear solve
  int max_inner = 20000;
};

struct SpectralSolution {
  double lambda = 0.0;
  std::vector<double> u;  // on unknowns, sum u^2 pi delta^d = 1, u > 0
  double residual = 0.0;  // ||(-Q - lambda) u||_pi
  double residual_floor = 0.0;  // rounding floor eps * max diag * ||u||_pi
  int iterations = 0;
  long inner_iterations = 0;
  bool converged = false;
};

namespace detail {

inline bool all_of_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Preconditioned CG for (-Q) x = b in the pi-weighted inner product, Jacobi
// preconditioner, optional deflation of the pi-orthonormal vectors `deflate`.
// Followed by iterative refinement on the true residual.
inline long pcg_solve(const DiscreteGenerator& g, const std::vector<double>& b,
                      std::vector<double>& x, double tol, int max_iter,
                      const std::vector<std::vector<double>>& deflate = {}) {
  const std::size_t n = b.size();
  auto project = [&](std::vector<double>& v) {
    for (const auto& q : deflate) {
      const double c = g.dot(q, v);
      for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
    }
  };
  const double bnorm = std::sqrt(g.dot(b, b));
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    return 0;
  }
  std::vector<double> r(n), z(n), p(n), ap(n), corr(n);
  long total = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 4; ++sweep) {
    g.apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    project(r);
    const double rnorm = std::sqrt(g.dot(r, r));
    if (rnorm <= tol * bnorm || !(rnorm < 0.5 * best)) break;
    best = rnorm;
    std::fill(corr.begin(), corr.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / g.diagonal(i);
    project(z);
    p = z;
    double rz = g.dot(r, z);
    for (int it = 0; it < max_iter; ++it) {
      ++total;
      g.apply(p, ap);
      project(ap);
      const double pap = g.dot(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        corr[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      if (std::sqrt(g.dot(r, r)) <= 0.1 * tol * bnorm) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / g.diagonal(i);
      project(z);
      const double rz_new = g.dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    for (std::size_t i = 0; i < n; ++i) x[i] += corr[i];
  }
  return total;
}

inline double normalize(const DiscreteGenerator& g, std::vector<double>& u) {
  const double cell = g.grid().cell_volume();
  const double norm = std::sqrt(g.dot(u, u) * cell);
  for (double& v : u) v /= norm;
  return norm;
}

inline double rayleigh(const DiscreteGenerator& g, const std::vector<double>& u) {
  return g.dirichlet_form(u) / g.dot(u, u);
}

inline double residual_norm(const DiscreteGenerator& g, const std::vector<double>& u,
                            double lambda) {
  std::vector<double> au;
  g.apply(u, au);
  for (std::size_t i = 0; i < u.size(); ++i) au[i] -= lambda * u[i];
  return std::sqrt(g.dot(au, au));
}

struct Eigenpair {
  double lambda = 0.0;
  std::vector<double> u;
  int iterations = 0;
  long inner = 0;
  bool converged = false;
};

// Inverse iteration in the complement of `deflate`, started from `start`.
inline Eigenpair inverse_iteration(const DiscreteGenerator& g, std::vector<double> u,
                                   const SolverOptions& opt,
                                   const std::vector<std::vector<double>>& deflate = {}) {
  auto project = [&](std::vector<double>& v) {
    for (const auto& q : deflate) {
      const double c = g.dot(q, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * q[i];
    }
  };
  Eigenpair e;
  project(u);
  normalize(g, u);
  double lambda = rayleigh(g, u);
  std::vector<double> x(u.size());
  int stable = 0;
  for (int it = 1; it <= opt.max_iters; ++it) {
    for (std::size_t i = 0; i < u.size(); ++i) x[i] = u[i] / lambda;
    e.inner += pcg_solve(g, u, x, opt.inner_tol, opt.max_inner, deflate);
    project(x);
    if (!all_of_finite(x)) throw NumericalError("inverse iteration produced non-finite values");
    u.swap(x);
    normalize(g, u);
    const double next = rayleigh(g, u);
    e.iterations = it;
    const bool small_change = std::abs(next - lambda) <= opt.tol * next;
    lambda = next;
    if (small_change && ++stable >= 2) {
      e.converged = true;
      break;
    }
    if (!small_change) stable = 0;
  }
  e.lambda = lambda;
  e.u = std::move(u);
  return e;
}

}  // namespace detail

/// Principal eigenpair of -Q by inverse iteration. A chain with no exit
/// channel returns lambda = 0 with the constant eigenvector.
inline SpectralSolution principal_eigenpair(const DiscreteGenerator& g,
                                            const SolverOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (opt.max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  SpectralSolution s;
  bool conservative = true;
  for (std::size_t i = 0; i < g.size() && conservative; ++i) conservative = g.kill_rate(i) == 0.0;
  if (conservative) {
    s.u.assign(g.size(), 1.0);
    detail::normalize(g, s.u);
    s.converged = true;
    return s;
  }
  auto e = detail::inverse_iteration(g, std::vector<double>(g.size(), 1.0), opt);
  if (!e.converged)
    throw NumericalError("principal eigenpair did not converge in " +
                         std::to_string(opt.max_iters) + " iterations");
  double sum = 0.0;
  for (double v : e.u) sum += v;
  if (sum < 0.0)
    for (double& v : e.u) v = -v;
  for (std::size_t i = 0; i < e.u.size(); ++i)
    if (!(e.u[i] > 0.0))
      throw NumericalError("principal eigenvector has a non-positive component at node " +
                           std::to_string(g.node(i)) + ": eigenvalue not simple or solve failed");
  s.lambda = e.lambda;
  s.u = std::move(e.u);
  s.iterations = e.iterations;
  s.inner_iterations = e.inner;
  s.converged = true;
  s.residual = detail::residual_norm(g, s.u, s.lambda);
  double dmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) dmax = std::max(dmax, g.diagonal(i));
  s.residual_floor = 64.0 * std::numeric_limits<double>::epsilon() * dmax *
                     std::sqrt(g.dot(s.u, s.u));
  return s;
}

/// Ascending eigenvalues of -Q below `threshold`, found one at a time by
/// deflated inverse iteration; stops after `cap` values.
inline std::vector<double> small_eigenvalues(const DiscreteGenerator& g, double threshold,
                                             int cap = 3, SolverOptions opt = {}) {
  if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
  opt.tol = std::max(opt.tol, 1e-8);
  opt.inner_tol = std::max(opt.inner_tol, 1e-10);
  std::vector<double> found;
  std::vector<std::vector<double>> basis;
  for (int k = 0; k < cap && static_cast<std::size_t>(k) < g.size(); ++k) {
    std::vector<double> start(g.size());
    CounterRng rng(0x5eed, static_cast<std::uint64_t>(k), Substream::kSampling);
    for (double& v : start) v = rng.uniform() - 0.5;
    if (k == 0) std::fill(start.begin(), start.end(), 1.0);
    auto e = detail::inverse_iteration(g, std::move(start), opt, basis);
    if (!(e.lambda < threshold)) break;
    found.push_back(e.lambda);
    std::vector<double> q = e.u;
    const double nrm = std::sqrt(g.dot(q, q));
    for (double& v : q) v /= nrm;
    basis.push_back(std::move(q));
  }
  return found;
}

inline int small_eig_count(const DiscreteGenerator& g, double threshold) {
  return static_cast<int>(small_eigenvalues(g, threshold).size());
}

struct PatchFlux {
  std::string label;
  double rate = 0.0;      // k(Sigma)
  double flux = 0.0;      // (2/h) k M in the f_min-relative normalization
  double log_flux = 0.0;  // log of the flux for the e^{-2f/h}-normalized eigenfunction
};

struct ExitAnalysis {
  double lambda = 0.0;
  std::vector<PatchFlux> patches;
  double other_rate = 0.0;
  double total_rate = 0.0;
  double identity_rel_err = 0.0;  // |total - lambda| / lambda
  double mass = 0.0;              // sum u pi delta^d
  double log_mass = 0.0;          // mass of the e^{-2f/h}-normalized eigenfunction, log
  std::vector<double> qsd;        // nu on unknowns, sums to 1
  std::vector<std::pair<std::size_t, double>> exit_law;  // (grid node, probability)

  double probability(const std::string& label) const {
    for (const auto& p : patches)
      if (p.label == label) return p.rate / lambda;
    throw InvalidArgument("no patch labelled '" + label + "'");
  }
};

inline ExitAnalysis exit_analysis(const DiscreteGenerator& g, const SpectralSolution& sol,
                                  const DomainSpec& dom) {
  if (!sol.converged) throw InvalidArgument("exit analysis needs a converged solution");
  if (!g.all_dirichlet()) throw InvalidArgument("exit analysis needs an all-Dirichlet assembly");
  if (!(sol.lambda > 0.0)) throw InvalidArgument("exit analysis needs a positive eigenvalue");
  ExitAnalysis r;
  r.lambda = sol.lambda;
  const std::size_t n = g.size();
  const double cell = g.grid().cell_volume();
  double up = 0.0;
  for (std::size_t i = 0; i < n; ++i) up += sol.u[i] * g.weight(i);
  r.mass = up * cell;
  r.log_mass = std::log(r.mass) - g.f_min() / g.h();
  r.qsd.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.qsd[i] = sol.u[i] * g.weight(i) / up;

  const double tol = 1e-9 * std::max(1.0, dom.box.diameter());
  std::vector<double> patch_rate(dom.sigma.size(), 0.0);
  std::vector<double> law(g.grid().size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.kill_rate(i) == 0.0) continue;
    for (int k = 0; k < g.stencil(); ++k) {
      if (g.neighbor(i, k) != DiscreteGenerator::kAbsorbed) continue;
      const double flow = r.qsd[i] * g.rate(i, k);
      law[g.neighbor_node(i, k)] += flow;
    }
  }
  for (std::size_t b = 0; b < law.size(); ++b) {
    if (law[b] == 0.0) continue;
    r.exit_law.emplace_back(b, law[b] / r.lambda);
    if (auto idx = dom.sigma_at(g.grid().position(b), tol))
      patch_rate[*idx] += law[b];
    else
      r.other_rate += law[b];
  }
  r.total_rate = r.other_rate;
  for (std::size_t k = 0; k < dom.sigma.size(); ++k) {
    PatchFlux pf;
    pf.label = dom.sigma[k].label;
    pf.rate = patch_rate[k];
    pf.flux = 2.0 / g.h() * pf.rate * r.mass;
    pf.log_flux = std::log(2.0 / g.h() * pf.rate) + r.log_mass;
    r.total_rate += pf.rate;
    r.patches.push_back(pf);
  }
  r.identity_rel_err = std::abs(r.total_rate - r.lambda) / r.lambda;
  return r;
}

struct MixedEigenvalue {
  double mu_gen = 0.0;
  double lambda_witten = 0.0;  // 2 h mu_gen
  double min_neumann_normal_derivative = 0.0;
};

/// Principal eigenvalue on a sub-box absorbing only at `dirichlet_face` and
/// reflecting elsewhere. The sub-box must hold one interior minimum and
/// exactly one saddle of f, on the absorbing face, with grad f . n >= 0 on the
/// reflecting faces.
inline MixedEigenvalue mixed_eigenvalue(const Potential& p, const Box& sub, const Face& dirichlet_face,
                                        double h, double delta, int samples_per_face = 200,
                                        const SolverOptions& opt = {}) {
  DomainSpec dom{sub, {}, {}};
  std::vector<Face> neumann;
  for (const Face& f : sub.faces())
    if (!(f == dirichlet_face)) neumann.push_back(f);

  const auto search = find_critical_points(p, dom, 8, 1e-10);
  int interior = 0, saddles = 0, saddles_on_face = 0;
  for (const auto& cp : search.points) {
    if (cp.kind == PointKind::Interior) {
      interior += cp.index == 0 ? 1 : 2;
    } else if (is_boundary_saddle(cp, 1e-8)) {
      ++saddles;
      saddles_on_face += cp.boundary->face == dirichlet_face;
    }
  }
  if (interior != 1)
    throw InvalidArgument("mixed sub-box must contain exactly one interior critical point, a minimum");
  if (saddles != 1 || saddles_on_face != 1)
    throw InvalidArgument("mixed sub-box must contain exactly one saddle, on the absorbing face");

  MixedEigenvalue r;
  r.min_neumann_normal_derivative = std::numeric_limits<double>::infinity();
  const int d = sub.dim();
  for (const Face& face : neumann) {
    std::vector<int> free;
    for (int a = 0; a < d; ++a)
      if (a != face.axis) free.push_back(a);
    const int m = static_cast<int>(free.size());
    const int per_axis =
        m == 0 ? 1 : std::max(2, static_cast<int>(std::ceil(std::pow(samples_per_face, 1.0 / m))));
    long total = 1;
    for (int i = 0; i < m; ++i) total *= per_axis;
    const Vec nrm = sub.outward_normal(face);
    for (long s = 0; s < total; ++s) {
      long rem = s;
      Vec x(d);
      x[face.axis] = sub.face_value(face);
      for (int i = m - 1; i >= 0; --i) {
        const long ci = rem % per_axis;
        rem /= per_axis;
        x[free[i]] = sub.lower[free[i]] + sub.extent(free[i]) * ci / double(per_axis - 1);
      }
      // Corners shared with the absorbing face are exempt.
      if (sub.on_face(x, dirichlet_face, 1e-12)) continue;
      const double dn = nrm.dot(p.gradient(x));
      r.min_neumann_normal_derivative = std::min(r.min_neumann_normal_derivative, dn);
      if (dn < -1e-9)
        throw InvalidArgument("grad f . n < 0 on reflecting face " + face.name() + " at " +
                              to_string(x));
    }
  }

  const auto gen = assemble(p, sub, h, delta, BoundaryConditions::mixed({dirichlet_face}, neumann));
  const auto sol = principal_eigenpair(gen, opt);
  r.mu_gen = sol.lambda;
  r.lambda_witten = 2.0 * h * sol.lambda;
  return r;
}

}  // namespace kexit
