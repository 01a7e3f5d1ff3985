#pragma once

// Agmon distance d_a(x, y) = inf over paths of  int |grad f| |dgamma|,
// approximated by shortest paths on the full-stencil grid graph of the closed
// box (8 neighbours in 2D, 26 in 3D).

#include <kexit/domain.hpp>
#include <kexit/grid.hpp>
#include <kexit/potential.hpp>
#include <kexit/random.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace kexit {

struct AgmonField {
  Grid grid;
  Vec source;
  std::size_t source_node = 0;
  std::vector<double> distance;  // d_a(node, source)
  std::vector<char> settled;
  std::vector<double> energy;    // f at the nodes
  double eps_grid = 0.0;         // discretization bound

  double max_spacing() const {
    double s = 0.0;
    for (int a = 0; a < grid.dim(); ++a) s = std::max(s, grid.spacing(a));
    return s;
  }

  double at(const Vec& x) const { return distance[grid.nearest(x)]; }
};

namespace detail {

inline std::vector<std::array<int, kMaxDim>> full_stencil(int d) {
  std::vector<std::array<int, kMaxDim>> offs;
  long total = 1;
  for (int a = 0; a < d; ++a) total *= 3;
  for (long s = 0; s < total; ++s) {
    std::array<int, kMaxDim> o{};
    long r = s;
    bool zero = true;
    for (int a = 0; a < d; ++a) {
      o[a] = static_cast<int>(r % 3) - 1;
      r /= 3;
      zero = zero && o[a] == 0;
    }
    if (!zero) offs.push_back(o);
  }
  return offs;
}

inline Grid agmon_grid(const Box& box, double delta) {
  std::array<int, kMaxDim> n{};
  for (int a = 0; a < box.dim(); ++a) {
    if (delta > 0.5 * box.extent(a))
      throw InvalidArgument("Agmon grid spacing exceeds half the box extent");
    n[a] = static_cast<int>(std::lround(box.extent(a) / delta)) + 1;
  }
  return Grid(box, n);
}

// Dijkstra over the grid graph with edge weight mean(|grad f|) * edge length.
inline void dijkstra(const Grid& g, const std::vector<double>& gradnorm, std::size_t source,
                     std::vector<double>& dist, std::vector<char>& settled) {
  const int d = g.dim();
  const auto offs = full_stencil(d);
  std::vector<double> len(offs.size());
  for (std::size_t k = 0; k < offs.size(); ++k) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += std::pow(offs[k][a] * g.spacing(a), 2);
    len[k] = std::sqrt(s);
  }
  dist.assign(g.size(), std::numeric_limits<double>::infinity());
  settled.assign(g.size(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    const auto [du, u] = pq.top();
    pq.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    const auto cu = g.coords(u);
    for (std::size_t k = 0; k < offs.size(); ++k) {
      std::array<int, kMaxDim> cv = cu;
      bool inside = true;
      for (int a = 0; a < d; ++a) {
        cv[a] += offs[k][a];
        inside = inside && cv[a] >= 0 && cv[a] < g.nodes(a);
      }
      if (!inside) continue;
      const std::size_t v = g.index(cv);
      if (settled[v]) continue;
      const double alt = du + 0.5 * (gradnorm[u] + gradnorm[v]) * len[k];
      if (alt < dist[v]) {
        dist[v] = alt;
        pq.emplace(alt, v);
      }
    }
  }
}

}  // namespace detail

/// Shortest-path Agmon field from `source` over the closed box.
inline AgmonField agmon_field(const Potential& p, const DomainSpec& dom, const Vec& source,
                              double delta) {
  if (!(delta > 0.0)) throw InvalidArgument("Agmon grid spacing must be positive");
  if (source.size() != dom.dim() || !dom.box.contains(source, 1e-12))
    throw InvalidArgument("Agmon source must lie in the closed box");
  AgmonField f;
  f.grid = detail::agmon_grid(dom.box, delta);
  f.source = source;
  f.source_node = f.grid.nearest(source);
  const std::size_t n = f.grid.size();
  std::vector<double> gradnorm(n);
  f.energy.resize(n);
  double gmax = 0.0, hmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = f.grid.position(i);
    f.energy[i] = p.value(x);
    gradnorm[i] = p.gradient(x).norm();
    gmax = std::max(gmax, gradnorm[i]);
    if (i % 7 == 0) hmax = std::max(hmax, p.hessian(x).norm());
  }
  detail::dijkstra(f.grid, gradnorm, f.source_node, f.distance, f.settled);
  const double h = f.max_spacing();
  // Metric anisotropy of the stencil plus the trapezoid error of |grad f|
  // (Lipschitz with constant max |Hess f|) accumulated along a box-sized path.
  f.eps_grid = gmax * h * (std::sqrt(2.0) - 1.0) +
               0.25 * hmax * h * std::sqrt(double(dom.dim())) * dom.box.diameter();
  return f;
}

/// Minimum of the field over boundary nodes outside the Gamma regions named in `excluded`.
inline double boundary_inf(const AgmonField& field, const DomainSpec& dom,
                           std::span<const std::string> excluded) {
  std::vector<GammaPatch> gammas;
  for (const auto& label : excluded) gammas.push_back(dom.gamma_for(label));
  const double tol = 1e-9 * std::max(1.0, dom.box.diameter());
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < field.grid.size(); ++i) {
    if (!field.grid.on_boundary(i)) continue;
    const Vec x = field.grid.position(i);
    bool skip = false;
    for (const auto& g : gammas) skip = skip || DomainSpec::in_gamma(dom.box, g, x, tol);
    if (skip) continue;
    any = true;
    best = std::min(best, field.distance[i]);
  }
  if (!any) throw InvalidArgument("no boundary nodes outside the excluded Gamma regions");
  return best;
}

inline double boundary_inf(const AgmonField& field, const DomainSpec& dom,
                           const std::string& excluded) {
  return boundary_inf(field, dom, std::span<const std::string>(&excluded, 1));
}

struct AgmonPropertyReport {
  std::size_t pairs = 0;
  double worst_lower_bound_margin = 0.0;  // min of d_a - |f(x) - f(y)|
  double worst_triangle_margin = 0.0;     // min of d(a,b) + d(b,c) - d(a,c)
  double symmetry_gap = 0.0;              // |d(s,a) from field(s) - d(a,s) from field(a)|
  double eps_grid = 0.0;
  bool ok = false;
};

/// Checks the lower bound |f(x) - f(y)| <= d_a(x, y), symmetry and the triangle
/// inequality, using a second field sourced at a randomly drawn anchor node.
/// Each sampled node x is paired with both sources.
inline AgmonPropertyReport check_agmon_properties(const Potential& p, const DomainSpec& dom,
                                                  const AgmonField& field, int n_pairs,
                                                  std::uint64_t seed = 0) {
  if (n_pairs < 100) throw InvalidArgument("n_pairs must be >= 100");
  if (dom.dim() != field.grid.dim()) throw InvalidArgument("field and domain dimensions differ");
  CounterRng rng(seed, 0, Substream::kSampling);
  const std::size_t n = field.grid.size();
  const std::size_t anchor = static_cast<std::size_t>(rng.uniform() * n);
  AgmonField second;
  second.grid = field.grid;
  second.source = field.grid.position(anchor);
  second.source_node = anchor;
  second.energy = field.energy;
  {
    std::vector<double> gradnorm(n);
    for (std::size_t i = 0; i < n; ++i) gradnorm[i] = p.gradient(field.grid.position(i)).norm();
    detail::dijkstra(second.grid, gradnorm, anchor, second.distance, second.settled);
  }
  const std::size_t s = field.source_node;
  AgmonPropertyReport r;
  r.eps_grid = field.eps_grid;
  r.symmetry_gap = std::abs(field.distance[anchor] - second.distance[s]);
  double lower = std::numeric_limits<double>::infinity();
  double tri = std::numeric_limits<double>::infinity();
  const double d_sa = field.distance[anchor];
  auto visit = [&](std::size_t x) {
    lower = std::min(lower, field.distance[x] - std::abs(field.energy[x] - field.energy[s]));
    lower = std::min(lower, second.distance[x] - std::abs(field.energy[x] - field.energy[anchor]));
    tri = std::min(tri, d_sa + second.distance[x] - field.distance[x]);
    tri = std::min(tri, d_sa + field.distance[x] - second.distance[x]);
    tri = std::min(tri, field.distance[x] + second.distance[x] - d_sa);
  };
  visit(s);  // degenerate pair (s, s)
  for (int i = 0; i < n_pairs; ++i) visit(static_cast<std::size_t>(rng.uniform() * n));
  r.pairs = static_cast<std::size_t>(n_pairs) + 1;
  r.worst_lower_bound_margin = lower;
  r.worst_triangle_margin = tri;
  r.ok = lower >= -r.eps_grid && tri >= -r.eps_grid && r.symmetry_gap <= 2.0 * r.eps_grid;
  return r;
}

}  // namespace kexit
