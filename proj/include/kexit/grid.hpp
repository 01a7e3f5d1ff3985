#pragma once

// Regular node lattices over a box, shared by the graph and generator discretizations.

#include <kexit/domain.hpp>

#include <array>
#include <cstddef>

namespace kexit {

class Grid {
 public:
  Grid() = default;

  /// `nodes[a]` points along axis a, endpoints included.
  Grid(Box box, std::array<int, kMaxDim> nodes) : box_(std::move(box)), n_(nodes) {
    std::size_t stride = 1;
    for (int a = box_.dim() - 1; a >= 0; --a) {
      if (n_[a] < 2) throw InvalidArgument("grid needs at least 2 nodes per axis");
      spacing_[a] = box_.extent(a) / (n_[a] - 1);
      stride_[a] = stride;
      stride *= static_cast<std::size_t>(n_[a]);
    }
    size_ = stride;
  }

  const Box& box() const { return box_; }
  int dim() const { return box_.dim(); }
  std::size_t size() const { return size_; }
  int nodes(int axis) const { return n_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  std::size_t stride(int axis) const { return stride_[axis]; }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= spacing_[a];
    return v;
  }

  std::array<int, kMaxDim> coords(std::size_t idx) const {
    std::array<int, kMaxDim> c{};
    for (int a = 0; a < dim(); ++a) {
      c[a] = static_cast<int>(idx / stride_[a]);
      idx %= stride_[a];
    }
    return c;
  }

  std::size_t index(const std::array<int, kMaxDim>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx += static_cast<std::size_t>(c[a]) * stride_[a];
    return idx;
  }

  Vec position(std::size_t idx) const {
    const auto c = coords(idx);
    Vec x(dim());
    for (int a = 0; a < dim(); ++a)
      x[a] = c[a] == n_[a] - 1 ? box_.upper[a] : box_.lower[a] + c[a] * spacing_[a];
    return x;
  }

  bool on_boundary(std::size_t idx) const {
    const auto c = coords(idx);
    for (int a = 0; a < dim(); ++a)
      if (c[a] == 0 || c[a] == n_[a] - 1) return true;
    return false;
  }

  bool on_face(std::size_t idx, const Face& f) const {
    const int c = coords(idx)[f.axis];
    return f.side > 0 ? c == n_[f.axis] - 1 : c == 0;
  }

  std::size_t nearest(const Vec& x) const {
    std::array<int, kMaxDim> c{};
    for (int a = 0; a < dim(); ++a) {
      const double t = (x[a] - box_.lower[a]) / spacing_[a];
      c[a] = std::clamp(static_cast<int>(std::lround(t)), 0, n_[a] - 1);
    }
    return index(c);
  }

 private:
  Box box_;
  std::array<int, kMaxDim> n_{};
  std::array<double, kMaxDim> spacing_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

}  // namespace kexit
