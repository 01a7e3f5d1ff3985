#pragma once

// Closed-form harmonic (Eyring-Kramers) asymptotics built from a saddle table.
// All exponentials carry the energies explicitly; log_* variants are provided
// where values over- or underflow at small h.

#include <kexit/landscape.hpp>

#include <cmath>
#include <vector>

namespace kexit {

namespace detail {
inline void require_positive_h(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("temperature h must be positive");
}
}  // namespace detail

/// Harmonic prefactor |mu_z| sqrt(det Hess f(x0)) / (pi sqrt|det Hess f(z)|).
inline double ek_prefactor(const SaddleTable& t, std::size_t k) {
  const auto& s = t.at(k);
  if (!(t.det_hess_x0 > 0.0) || !(s.abs_det_hess > 0.0))
    throw InvalidArgument("non-positive Hessian determinant magnitude");
  return s.abs_mu * std::sqrt(t.det_hess_x0) / (kPi * std::sqrt(s.abs_det_hess));
}

inline double ek_rate(const SaddleTable& t, std::size_t k, double h) {
  detail::require_positive_h(h);
  return ek_prefactor(t, k) * std::exp(-2.0 * t.barrier(k) / h);
}

/// Sum of the lowest-level rates: the leading behaviour of the principal eigenvalue.
inline double lambda_h_asymptotic(const SaddleTable& t, double h) {
  detail::require_positive_h(h);
  double sum = 0.0;
  for (std::size_t k = 0; k < t.n0; ++k) sum += ek_prefactor(t, k);
  return sum * std::exp(-2.0 * t.barrier(0) / h);
}

struct ExitProbabilities {
  std::vector<double> leading;     // per saddle, unnormalized asymptotic form
  std::vector<double> normalized;  // per saddle, sums to 1
  double other = 0.0;              // 1 - sum(leading), clamped at 0
};

inline ExitProbabilities exit_probabilities(const SaddleTable& t, double h) {
  detail::require_positive_h(h);
  std::vector<double> a(t.size());
  double low = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    a[k] = t.saddles[k].abs_mu / std::sqrt(t.saddles[k].abs_det_hess);
    if (k < t.n0) low += a[k];
  }
  ExitProbabilities p;
  const double f1 = t.saddles.front().value;
  double sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    double v = a[k] / low;
    if (k >= t.n0) v *= std::exp(-2.0 * (t.saddles[k].value - f1) / h);
    p.leading.push_back(v);
    sum += v;
  }
  p.other = std::max(0.0, 1.0 - sum);
  for (double v : p.leading) p.normalized.push_back(v / sum);
  return p;
}

/// log of (pi h)^{d/4} det(Hess f(x0))^{-1/4} e^{-f(x0)/h}: mass of the
/// L^2(e^{-2f/h})-normalized principal eigenfunction.
inline double log_mass_asymptotic(const SaddleTable& t, double h) {
  detail::require_positive_h(h);
  const double d = t.dim;
  return 0.25 * d * std::log(kPi * h) - 0.25 * std::log(t.det_hess_x0) - t.f_x0 / h;
}

inline double mass_asymptotic(const SaddleTable& t, double h) {
  return std::exp(log_mass_asymptotic(t, h));
}

/// log of the weighted normal flux of the normalized eigenfunction through
/// Sigma_k. The coefficient 2|mu| det0^{1/4} pi^{(d-4)/4} |det_z|^{-1/2} is the
/// one for which (h/2) flux / mass equals ek_rate.
inline double log_flux_asymptotic(const SaddleTable& t, std::size_t k, double h) {
  detail::require_positive_h(h);
  const auto& s = t.at(k);
  const double d = t.dim;
  return std::log(2.0 * s.abs_mu) + 0.25 * std::log(t.det_hess_x0) +
         0.25 * (d - 4.0) * std::log(kPi) - 0.5 * std::log(s.abs_det_hess) +
         (0.25 * d - 1.0) * std::log(h) - (2.0 * s.value - t.f_x0) / h;
}

inline double flux_asymptotic(const SaddleTable& t, std::size_t k, double h) {
  return std::exp(log_flux_asymptotic(t, k, h));
}

/// Same flux with the pi^{-3d/4} coefficient; kept only for numerical
/// comparison, it agrees with log_flux_asymptotic when d = 1.
inline double log_flux_asymptotic_pi3d4(const SaddleTable& t, std::size_t k, double h) {
  const double d = t.dim;
  return log_flux_asymptotic(t, k, h) - 0.25 * (d - 4.0) * std::log(kPi) -
         0.75 * d * std::log(kPi);
}

/// 2 |mu_z| sqrt(det Hess f(x0)) / (pi sqrt|det Hess f(z)|) = 2 P_z.
inline double mixed_constant(const SaddleTable& t, std::size_t k) {
  return 2.0 * ek_prefactor(t, k);
}

/// Principal eigenvalue of the Witten Laplacian on a subdomain absorbing only
/// near saddle k (reflecting elsewhere): A h e^{-2 (f(z_k) - f(x0)) / h}.
inline double mixed_eigenvalue_asymptotic(const SaddleTable& t, std::size_t k, double h) {
  detail::require_positive_h(h);
  return mixed_constant(t, k) * h * std::exp(-2.0 * t.barrier(k) / h);
}

inline double kappa_x0(const SaddleTable& t) {
  return std::pow(kPi, 0.5 * t.dim) / std::sqrt(t.det_hess_x0);
}

inline double mixed_flux_constant(const SaddleTable& t, std::size_t k) {
  return std::sqrt(mixed_constant(t, k) * kappa_x0(t));
}

/// Magnitude b_k h^{d/4 - 1/2} e^{-f(z_k)/h} of the boundary flux of the mixed eigenform.
inline double mixed_flux_asymptotic(const SaddleTable& t, std::size_t k, double h) {
  detail::require_positive_h(h);
  return mixed_flux_constant(t, k) * std::pow(h, 0.25 * t.dim - 0.5) *
         std::exp(-t.at(k).value / h);
}

/// Rescales an exit time observed at temperature h_hi to h_lo through the
/// ratio of harmonic rates for saddle k.
inline double tad_extrapolate(const SaddleTable& t, std::size_t k, double t_hi, double h_hi,
                              double h_lo) {
  if (!(h_lo > 0.0) || h_hi < h_lo)
    throw InvalidArgument("temperature extrapolation needs h_hi >= h_lo > 0");
  return t_hi * std::exp(2.0 * t.barrier(k) * (1.0 / h_lo - 1.0 / h_hi));
}

struct RatePrediction {
  double h = 0.0;
  std::vector<double> barrier, prefactor, rate, mixed_eigenvalue;
  double lambda = 0.0;
  ExitProbabilities probabilities;
  double log_mass = 0.0;
  std::vector<double> log_flux;
};

inline RatePrediction predict(const SaddleTable& t, double h) {
  RatePrediction r;
  r.h = h;
  for (std::size_t k = 0; k < t.size(); ++k) {
    r.barrier.push_back(t.barrier(k));
    r.prefactor.push_back(ek_prefactor(t, k));
    r.rate.push_back(ek_rate(t, k, h));
    r.mixed_eigenvalue.push_back(mixed_eigenvalue_asymptotic(t, k, h));
    r.log_flux.push_back(log_flux_asymptotic(t, k, h));
  }
  r.lambda = lambda_h_asymptotic(t, h);
  r.probabilities = exit_probabilities(t, h);
  r.log_mass = log_mass_asymptotic(t, h);
  return r;
}

}  // namespace kexit
