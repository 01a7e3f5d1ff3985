#pragma once

// Energy landscapes f: R^d -> R with first and second derivatives.

#include <kexit/common.hpp>

#include <algorithm>
#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kexit {

struct EvalResult {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

/// f(x, y) = -cos(pi x) - c cos(pi y). Minima on the even lattice, saddles on
/// the half-odd edges; c = 1 is the fully symmetric landscape.
struct CosineLattice {
  double c = 1.0;
};

struct Monomial {
  double coef = 0.0;
  std::array<int, kMaxDim> powers{};
};

/// Sum of monomials in `dim` variables. An empty term list is the zero potential.
struct Polynomial {
  int dim = 1;
  std::vector<Monomial> terms;
};

namespace detail {

inline double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

/// Nodal first derivatives of the natural cubic spline through (x_i, y_i).
inline std::vector<double> spline_slopes(const std::vector<double>& x,
                                         const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);  // second derivatives, natural ends
  if (n > 2) {
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      r[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < n; ++i) {  // Thomas sweep
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
  }
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = x[i + 1] - x[i];
    s[i] = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
  }
  const double h = x[n - 1] - x[n - 2];
  s[n - 1] = (y[n - 1] - y[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
  return s;
}

// Cubic Hermite basis: values at t of (h00, h10, h01, h11).
inline std::array<double, 4> hermite(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return {2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t, -2 * t3 + 3 * t2, t3 - t2};
}

}  // namespace detail

/// Values on a rectilinear grid in one or two dimensions, interpolated by the
/// tensor-product natural cubic spline (C^2, so Newton sees continuous Hessians).
/// Values are stored with the last axis varying fastest.
class Tabulated {
 public:
  Tabulated(std::vector<std::vector<double>> axes, std::vector<double> values)
      : axes_(std::move(axes)), f_(std::move(values)) {
    if (axes_.empty() || axes_.size() > 2)
      throw InvalidArgument("tabulated potential supports 1 or 2 dimensions");
    std::size_t total = 1;
    for (const auto& ax : axes_) {
      if (ax.size() < 3) throw InvalidArgument("tabulated axis needs at least 3 nodes");
      for (std::size_t i = 1; i < ax.size(); ++i)
        if (!(ax[i] > ax[i - 1])) throw InvalidArgument("tabulated axis must increase");
      total *= ax.size();
    }
    if (f_.size() != total) throw InvalidArgument("tabulated value count does not match grid");
    build_derivatives();
  }

  int dim() const { return static_cast<int>(axes_.size()); }
  const std::vector<std::vector<double>>& axes() const { return axes_; }

  double extent() const {
    double e = 0.0;
    for (const auto& ax : axes_) e = std::max(e, ax.back() - ax.front());
    return e;
  }

  double value(const Vec& x) const {
    if (dim() == 1) {
      const auto& ax = axes_[0];
      const std::size_t i = cell(ax, x[0]);
      const double h = ax[i + 1] - ax[i];
      const auto b = detail::hermite((x[0] - ax[i]) / h);
      return b[0] * f_[i] + b[1] * h * fx_[i] + b[2] * f_[i + 1] + b[3] * h * fx_[i + 1];
    }
    const auto& ax = axes_[0];
    const auto& ay = axes_[1];
    const std::size_t i = cell(ax, x[0]), j = cell(ay, x[1]);
    const double hx = ax[i + 1] - ax[i], hy = ay[j + 1] - ay[j];
    const auto bt = detail::hermite((x[0] - ax[i]) / hx);
    const auto bs = detail::hermite((x[1] - ay[j]) / hy);
    double v = 0.0;
    for (int p = 0; p < 2; ++p) {
      for (int q = 0; q < 2; ++q) {
        const std::size_t k = (i + p) * ay.size() + (j + q);
        const double t0 = bt[2 * p], t1 = bt[2 * p + 1];
        const double s0 = bs[2 * q], s1 = bs[2 * q + 1];
        v += f_[k] * t0 * s0 + fx_[k] * hx * t1 * s0 + fy_[k] * hy * t0 * s1 +
             fxy_[k] * hx * hy * t1 * s1;
      }
    }
    return v;
  }

 private:
  static std::size_t cell(const std::vector<double>& ax, double x) {
    auto it = std::upper_bound(ax.begin(), ax.end(), x);
    std::size_t i = it == ax.begin() ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
    return std::min(i, ax.size() - 2);
  }

  void build_derivatives() {
    if (dim() == 1) {
      fx_ = detail::spline_slopes(axes_[0], f_);
      return;
    }
    const std::size_t nx = axes_[0].size(), ny = axes_[1].size();
    fx_.assign(f_.size(), 0.0);
    fy_.assign(f_.size(), 0.0);
    fxy_.assign(f_.size(), 0.0);
    std::vector<double> line;
    for (std::size_t j = 0; j < ny; ++j) {  // d/dx along each row of constant y
      line.resize(nx);
      for (std::size_t i = 0; i < nx; ++i) line[i] = f_[i * ny + j];
      const auto s = detail::spline_slopes(axes_[0], line);
      for (std::size_t i = 0; i < nx; ++i) fx_[i * ny + j] = s[i];
    }
    for (std::size_t i = 0; i < nx; ++i) {  // d/dy of f and of f_x
      std::vector<double> col(f_.begin() + static_cast<long>(i * ny),
                              f_.begin() + static_cast<long>((i + 1) * ny));
      const auto s = detail::spline_slopes(axes_[1], col);
      std::vector<double> colx(fx_.begin() + static_cast<long>(i * ny),
                               fx_.begin() + static_cast<long>((i + 1) * ny));
      const auto sx = detail::spline_slopes(axes_[1], colx);
      for (std::size_t j = 0; j < ny; ++j) {
        fy_[i * ny + j] = s[j];
        fxy_[i * ny + j] = sx[j];
      }
    }
  }

  std::vector<std::vector<double>> axes_;
  std::vector<double> f_, fx_, fy_, fxy_;
};

/// A landscape: one of the supported families plus an optional linear tilt.
/// Cheap to copy; evaluation is pure and reentrant.
class Potential {
 public:
  enum class Family { CosineLattice, Polynomial, External };

  static Potential cosine_lattice(double c) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw InvalidArgument("cosine lattice requires c > 0");
    return Potential(CosineLattice{c}, 2);
  }

  static Potential polynomial(Polynomial poly) {
    if (poly.dim < 1 || poly.dim > kMaxDim)
      throw InvalidArgument("polynomial dimension must be in [1, 3]");
    for (const auto& t : poly.terms) {
      for (int k = 0; k < kMaxDim; ++k) {
        if (t.powers[k] < 0) throw InvalidArgument("negative monomial power");
        if (k >= poly.dim && t.powers[k] != 0)
          throw InvalidArgument("monomial uses a variable beyond the dimension");
      }
    }
    const int d = poly.dim;
    return Potential(std::move(poly), d);
  }

  static Potential external(Tabulated table) {
    const int d = table.dim();
    return Potential(std::make_shared<const Tabulated>(std::move(table)), d);
  }

  /// Adds tilt . x to the energy.
  Potential with_tilt(const Vec& tilt) const {
    if (tilt.size() != dim_) throw InvalidArgument("tilt dimension mismatch");
    Potential p = *this;
    p.tilt_ = tilt;
    return p;
  }

  int dimension() const { return dim_; }
  Family family() const { return static_cast<Family>(impl_.index()); }

  std::string_view family_name() const {
    switch (family()) {
      case Family::CosineLattice: return "cosine_lattice";
      case Family::Polynomial: return "polynomial";
      case Family::External: return "external";
    }
    return "";
  }

  const Vec& tilt() const { return tilt_; }

  /// Finite-difference step used for External families.
  double fd_step() const { return fd_step_; }
  void set_fd_step(double step) {
    if (!(step > 0.0)) throw InvalidArgument("finite-difference step must be positive");
    fd_step_ = step;
  }

  double value(const Vec& x) const {
    double v = std::visit([&](const auto& fam) { return value_of(fam, x); }, impl_);
    if (tilt_.size()) v += tilt_.dot(x);
    return v;
  }

  Vec gradient(const Vec& x) const {
    Vec g = std::visit([&](const auto& fam) { return gradient_of(fam, x); }, impl_);
    if (tilt_.size()) g += tilt_;
    return g;
  }

  Mat hessian(const Vec& x) const {
    return std::visit([&](const auto& fam) { return hessian_of(fam, x); }, impl_);
  }

  EvalResult evaluate(const Vec& x) const {
    if (x.size() != dim_)
      throw InvalidArgument("dimension mismatch: potential has d=" + std::to_string(dim_) +
                            ", point has " + std::to_string(x.size()));
    if (!all_finite(x)) throw InvalidArgument("non-finite evaluation point");
    return {value(x), gradient(x), hessian(x)};
  }

 private:
  using Impl = std::variant<CosineLattice, Polynomial, std::shared_ptr<const Tabulated>>;

  Potential(Impl impl, int dim) : impl_(std::move(impl)), dim_(dim) {
    if (const auto* t = std::get_if<2>(&impl_)) fd_step_ = 1e-5 * (*t)->extent();
  }

  static double value_of(const CosineLattice& p, const Vec& x) {
    return -std::cos(kPi * x[0]) - p.c * std::cos(kPi * x[1]);
  }
  static Vec gradient_of(const CosineLattice& p, const Vec& x) {
    Vec g(2);
    g[0] = kPi * std::sin(kPi * x[0]);
    g[1] = p.c * kPi * std::sin(kPi * x[1]);
    return g;
  }
  static Mat hessian_of(const CosineLattice& p, const Vec& x) {
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = kPi * kPi * std::cos(kPi * x[0]);
    h(1, 1) = p.c * kPi * kPi * std::cos(kPi * x[1]);
    return h;
  }

  static double value_of(const Polynomial& p, const Vec& x) {
    double v = 0.0;
    for (const auto& t : p.terms) {
      double m = t.coef;
      for (int k = 0; k < p.dim; ++k) m *= detail::ipow(x[k], t.powers[k]);
      v += m;
    }
    return v;
  }
  static Vec gradient_of(const Polynomial& p, const Vec& x) {
    Vec g = Vec::Zero(p.dim);
    for (const auto& t : p.terms) {
      for (int a = 0; a < p.dim; ++a) {
        if (t.powers[a] == 0) continue;
        double m = t.coef * t.powers[a];
        for (int k = 0; k < p.dim; ++k)
          m *= detail::ipow(x[k], t.powers[k] - (k == a ? 1 : 0));
        g[a] += m;
      }
    }
    return g;
  }
  static Mat hessian_of(const Polynomial& p, const Vec& x) {
    Mat h = Mat::Zero(p.dim, p.dim);
    for (const auto& t : p.terms) {
      for (int a = 0; a < p.dim; ++a) {
        for (int b = a; b < p.dim; ++b) {
          std::array<int, kMaxDim> pw = t.powers;
          double m = t.coef * pw[a];
          --pw[a];
          m *= pw[b];
          --pw[b];
          if (m == 0.0) continue;
          for (int k = 0; k < p.dim; ++k) m *= detail::ipow(x[k], pw[k]);
          h(a, b) += m;
        }
      }
    }
    for (int a = 0; a < p.dim; ++a)
      for (int b = 0; b < a; ++b) h(a, b) = h(b, a);
    return h;
  }

  double value_of(const std::shared_ptr<const Tabulated>& t, const Vec& x) const {
    return t->value(x);
  }
  Vec gradient_of(const std::shared_ptr<const Tabulated>& t, const Vec& x) const {
    Vec g(dim_);
    for (int a = 0; a < dim_; ++a) {
      Vec xp = x, xm = x;
      xp[a] += fd_step_;
      xm[a] -= fd_step_;
      g[a] = (t->value(xp) - t->value(xm)) / (2.0 * fd_step_);
    }
    return g;
  }
  Mat hessian_of(const std::shared_ptr<const Tabulated>& t, const Vec& x) const {
    const double s = fd_step_;
    Mat h(dim_, dim_);
    const double f0 = t->value(x);
    for (int a = 0; a < dim_; ++a) {
      Vec xp = x, xm = x;
      xp[a] += s;
      xm[a] -= s;
      h(a, a) = (t->value(xp) - 2.0 * f0 + t->value(xm)) / (s * s);
      for (int b = 0; b < a; ++b) {
        Vec pp = x, pm = x, mp = x, mm = x;
        pp[a] += s; pp[b] += s;
        pm[a] += s; pm[b] -= s;
        mp[a] -= s; mp[b] += s;
        mm[a] -= s; mm[b] -= s;
        h(a, b) = h(b, a) =
            (t->value(pp) - t->value(pm) - t->value(mp) + t->value(mm)) / (4.0 * s * s);
      }
    }
    return h;
  }

  Impl impl_;
  int dim_;
  Vec tilt_;
  double fd_step_ = 1e-5;
};

struct DerivativeReport {
  double grad_err = 0.0;
  double hess_err = 0.0;
};

/// Maximum relative deviation of the reported gradient and Hessian from
/// central differences (of the value, respectively of the gradient) at x.
inline DerivativeReport verify_derivatives(const Potential& p, const Vec& x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("step must be positive");
  const EvalResult e = p.evaluate(x);
  const int d = p.dimension();
  Vec g_fd(d);
  Mat h_fd(d, d);
  for (int a = 0; a < d; ++a) {
    Vec xp = x, xm = x;
    xp[a] += step;
    xm[a] -= step;
    g_fd[a] = (p.value(xp) - p.value(xm)) / (2.0 * step);
    h_fd.col(a) = (p.gradient(xp) - p.gradient(xm)) / (2.0 * step);
  }
  DerivativeReport r;
  r.grad_err = (e.gradient - g_fd).cwiseAbs().maxCoeff() /
               std::max(1.0, e.gradient.cwiseAbs().maxCoeff());
  r.hess_err = (e.hessian - h_fd).cwiseAbs().maxCoeff() /
               std::max(1.0, e.hessian.cwiseAbs().maxCoeff());
  return r;
}

}  // namespace kexit
