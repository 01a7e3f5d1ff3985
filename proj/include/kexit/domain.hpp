#pragma once

// Box-shaped basins and their boundary decomposition.

#include <kexit/common.hpp>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace kexit {

/// One face of an axis-aligned box: coordinate `axis` pinned at its lower
/// (side = -1) or upper (side = +1) bound.
struct Face {
  int axis = 0;
  int side = 1;

  friend bool operator==(const Face&, const Face&) = default;

  std::string name() const {
    static constexpr char kAxes[] = {'x', 'y', 'z'};
    return std::string(1, kAxes[axis]) + (side > 0 ? "+" : "-");
  }

  static Face parse(const std::string& s) {
    if (s.size() == 2 && (s[1] == '+' || s[1] == '-')) {
      const int axis = s[0] == 'x' ? 0 : s[0] == 'y' ? 1 : s[0] == 'z' ? 2 : -1;
      if (axis >= 0) return {axis, s[1] == '+' ? 1 : -1};
    }
    throw InvalidArgument("bad face id '" + s + "' (expected x-, x+, y-, y+, z-, z+)");
  }
};

struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() < 1 || lower.size() > kMaxDim)
      throw InvalidArgument("box bounds must have matching dimension in [1, 3]");
    for (int a = 0; a < dim(); ++a)
      if (!(upper[a] > lower[a])) throw InvalidArgument("box upper bound must exceed lower bound");
  }

  int dim() const { return static_cast<int>(lower.size()); }
  double extent(int axis) const { return upper[axis] - lower[axis]; }
  double min_extent() const { return (upper - lower).minCoeff(); }
  double diameter() const { return (upper - lower).norm(); }

  std::vector<Face> faces() const {
    std::vector<Face> fs;
    for (int a = 0; a < dim(); ++a) {
      fs.push_back({a, -1});
      fs.push_back({a, 1});
    }
    return fs;
  }

  double face_value(const Face& f) const { return f.side > 0 ? upper[f.axis] : lower[f.axis]; }

  Vec outward_normal(const Face& f) const {
    Vec n = Vec::Zero(dim());
    n[f.axis] = f.side;
    return n;
  }

  bool contains(const Vec& x, double tol = 0.0) const {
    for (int a = 0; a < dim(); ++a)
      if (x[a] < lower[a] - tol || x[a] > upper[a] + tol) return false;
    return true;
  }

  bool strictly_inside(const Vec& x, double margin = 0.0) const {
    for (int a = 0; a < dim(); ++a)
      if (!(x[a] > lower[a] + margin && x[a] < upper[a] - margin)) return false;
    return true;
  }

  bool on_face(const Vec& x, const Face& f, double tol) const {
    return std::abs(x[f.axis] - face_value(f)) <= tol && contains(x, tol);
  }
};

/// Exit patch Sigma_z: points of `face` within open distance `radius` of `center`.
struct SigmaPatch {
  std::string label;
  Face face;
  Vec center;
  double radius = 0.0;
};

/// Region Gamma_z of the boundary attached to a saddle. The default is the
/// open face holding the saddle; an explicit extent is a closed rectangle.
struct GammaPatch {
  std::string label;
  Face face;
  Vec lower;
  Vec upper;
  bool open = true;
};

struct DomainSpec {
  Box box;
  std::vector<SigmaPatch> sigma;
  std::vector<GammaPatch> gamma;
  // Corners and edges of the box are kept as is; they only touch high-energy
  // regions of the landscapes considered here.
  bool corners_smoothed = false;

  int dim() const { return box.dim(); }

  static bool in_sigma(const Box& box, const SigmaPatch& p, const Vec& x, double tol) {
    return box.on_face(x, p.face, tol) && (x - p.center).norm() < p.radius;
  }

  static bool in_gamma(const Box& box, const GammaPatch& g, const Vec& x, double tol) {
    if (!box.on_face(x, g.face, tol)) return false;
    for (int a = 0; a < box.dim(); ++a) {
      if (a == g.face.axis) continue;
      if (g.open) {
        if (!(x[a] > g.lower[a] + tol && x[a] < g.upper[a] - tol)) return false;
      } else if (x[a] < g.lower[a] - tol || x[a] > g.upper[a] + tol) {
        return false;
      }
    }
    return true;
  }

  /// Index of the Sigma patch containing boundary point x, if any.
  std::optional<std::size_t> sigma_at(const Vec& x, double tol = 1e-9) const {
    for (std::size_t k = 0; k < sigma.size(); ++k)
      if (in_sigma(box, sigma[k], x, tol)) return k;
    return std::nullopt;
  }

  const SigmaPatch* find_sigma(const std::string& label) const {
    for (const auto& s : sigma)
      if (s.label == label) return &s;
    return nullptr;
  }

  /// Gamma region for a label: the declared one, or the open face of the
  /// Sigma patch with the same label.
  GammaPatch gamma_for(const std::string& label) const {
    for (const auto& g : gamma)
      if (g.label == label) return g;
    const SigmaPatch* s = find_sigma(label);
    if (!s) throw InvalidArgument("no Sigma or Gamma patch labelled '" + label + "'");
    return full_face(s->label, s->face);
  }

  GammaPatch full_face(const std::string& label, const Face& f) const {
    return {label, f, box.lower, box.upper, true};
  }

  /// Checks patch geometry: centers on their faces, Sigma within Gamma,
  /// Sigma patches pairwise disjoint, labels unique.
  void validate() const {
    const double tol = 1e-9 * std::max(1.0, box.diameter());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
      const auto& p = sigma[i];
      if (p.center.size() != dim()) throw InvalidArgument("patch '" + p.label + "' dimension");
      if (p.face.axis >= dim()) throw InvalidArgument("patch '" + p.label + "' face axis");
      if (!(p.radius > 0.0)) throw InvalidArgument("patch '" + p.label + "' needs radius > 0");
      if (!box.on_face(p.center, p.face, tol))
        throw InvalidArgument("patch '" + p.label + "' center is not on face " + p.face.name());
      const GammaPatch g = gamma_for(p.label);
      if (!(g.face == p.face))
        throw InvalidArgument("patch '" + p.label + "' lies on a different face than its Gamma");
      for (int a = 0; a < dim(); ++a) {
        if (a == p.face.axis) continue;
        const double lo = std::max(p.center[a] - p.radius, box.lower[a]);
        const double hi = std::min(p.center[a] + p.radius, box.upper[a]);
        if (lo < g.lower[a] - tol || hi > g.upper[a] + tol)
          throw InvalidArgument("patch '" + p.label + "' is not contained in its Gamma region");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (sigma[j].label == p.label) throw InvalidArgument("duplicate patch label " + p.label);
        if (overlap(sigma[j], p)) {
          throw InvalidArgument("patches '" + sigma[j].label + "' and '" + p.label +
                                "' overlap");
        }
      }
    }
  }

 private:
  bool overlap(const SigmaPatch& a, const SigmaPatch& b) const {
    if (a.face == b.face) return (a.center - b.center).norm() < a.radius + b.radius;
    if (a.face.axis == b.face.axis) return false;
    // Faces meet along an edge (a corner in 2D); sample it.
    const int d = dim();
    Vec x = box.lower;
    x[a.face.axis] = box.face_value(a.face);
    x[b.face.axis] = box.face_value(b.face);
    int free_axis = -1;
    for (int k = 0; k < d; ++k)
      if (k != a.face.axis && k != b.face.axis) free_axis = k;
    const int samples = free_axis < 0 ? 1 : 401;
    for (int s = 0; s < samples; ++s) {
      if (free_axis >= 0)
        x[free_axis] = box.lower[free_axis] + box.extent(free_axis) * s / (samples - 1);
      if ((x - a.center).norm() < a.radius && (x - b.center).norm() < b.radius) return true;
    }
    return false;
  }
};

}  // namespace kexit
