#pragma once

// Euler-Maruyama integration of dX = -grad f(X) dt + sqrt(h) dW, first exit
// from a box, burn-in towards the quasi-stationary law and exit statistics.

#include <kexit/domain.hpp>
#include <kexit/potential.hpp>
#include <kexit/random.hpp>
#include <kexit/stats.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace kexit {

struct SimConfig {
  double h = 0.5;
  double dt = 1e-3;
  long max_steps = 100'000'000;
  std::uint64_t seed = 0;
  Vec start;
  double burn_in = 0.0;  // T_b; 0 disables
  bool record_path = false;
  // Each increment is the normalized sum of this many Gaussian draws, so a run
  // at dt with refinement 2 sees the same Brownian path as a run at dt / 2.
  int noise_refinement = 1;
  // Shift faces inward by 0.5826 sqrt(h dt) when detecting exits; corrects the
  // O(sqrt(dt)) bias from crossings missed between steps.
  bool boundary_shift = true;

  void validate(int dim) const {
    if (!(h >= 0.0) || !std::isfinite(h)) throw InvalidArgument("h must be >= 0");
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (max_steps < 1) throw InvalidArgument("max_steps must be >= 1");
    if (!(burn_in >= 0.0)) throw InvalidArgument("burn-in time must be >= 0");
    if (noise_refinement < 1) throw InvalidArgument("noise_refinement must be >= 1");
    if (start.size() != dim) throw InvalidArgument("start point dimension mismatch");
  }
};

inline constexpr double kBoundaryShiftConstant = 0.5826;

/// Partial time is available when the step budget runs out before exit.
class StepBudgetExceeded : public NumericalError {
 public:
  StepBudgetExceeded(const std::string& what, double partial_time)
      : NumericalError(what), partial_time(partial_time) {}
  double partial_time;
};

/// One Euler-Maruyama step; h = 0 is the explicit Euler gradient flow.
inline Vec step(const Vec& x, const Potential& p, double h, double dt, CounterRng& rng,
                int noise_refinement = 1) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  Vec next = x - dt * p.gradient(x);
  if (h > 0.0) {
    const double scale = std::sqrt(h * dt / noise_refinement);
    for (int r = 0; r < noise_refinement; ++r)
      for (Eigen::Index a = 0; a < x.size(); ++a) next[a] += scale * rng.normal();
  }
  return next;
}

struct ExitSample {
  double tau = 0.0;
  Vec exit_point;
  std::string patch;  // Sigma label or "other"
  int patch_index = -1;
  long restarts = 0;
  long steps = 0;
  std::vector<Vec> path;
};

inline const std::string kOtherPatch = "other";

namespace detail {

// Fraction s in (0, 1] of the segment a -> b at which it leaves [lo, hi], and
// the axis and side crossed first.
inline double crossing_fraction(const Vec& a, const Vec& b, const Vec& lo, const Vec& hi,
                                int& axis, int& side) {
  double best = 1.0;
  axis = -1;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    double s = 2.0;
    int sd = 0;
    if (b[k] > hi[k]) {
      s = (hi[k] - a[k]) / (b[k] - a[k]);
      sd = 1;
    } else if (b[k] < lo[k]) {
      s = (lo[k] - a[k]) / (b[k] - a[k]);
      sd = -1;
    }
    if (sd != 0 && (axis < 0 || s < best)) {
      best = std::clamp(s, 0.0, 1.0);
      axis = static_cast<int>(k);
      side = sd;
    }
  }
  return best;
}

}  // namespace detail

/// Trajectory `index` of the stream keyed by cfg.seed: burn-in with
/// restart-on-exit, then integration until the first exit.
inline ExitSample simulate_exit(const SimConfig& cfg, const Potential& p, const DomainSpec& dom,
                                std::uint64_t index = 0) {
  const int d = dom.dim();
  cfg.validate(d);
  if (p.dimension() != d) throw InvalidArgument("potential and domain dimensions differ");
  if (!dom.box.strictly_inside(cfg.start))
    throw InvalidArgument("start point must lie strictly inside the box");
  const double shift =
      cfg.boundary_shift ? kBoundaryShiftConstant * std::sqrt(cfg.h * cfg.dt) : 0.0;
  const Vec lo = dom.box.lower.array() + shift;
  const Vec hi = dom.box.upper.array() - shift;
  if ((hi - lo).minCoeff() <= 0.0) throw InvalidArgument("time step too large for the box");

  CounterRng rng(cfg.seed, index, Substream::kNoise);
  ExitSample out;
  long total_steps = 0;
  auto inside = [&](const Vec& x) {
    for (int a = 0; a < d; ++a)
      if (!(x[a] >= lo[a] && x[a] <= hi[a])) return false;
    return true;
  };
  auto advance = [&](const Vec& x) {
    Vec y = step(x, p, cfg.h, cfg.dt, rng, cfg.noise_refinement);
    ++total_steps;
    if (!all_finite(y))
      throw NumericalError("diverged: non-finite state at step " + std::to_string(total_steps));
    return y;
  };

  Vec x = cfg.start;
  if (cfg.burn_in > 0.0) {
    const long burn_steps = static_cast<long>(std::ceil(cfg.burn_in / cfg.dt));
    for (long k = 0; k < burn_steps;) {
      if (total_steps >= cfg.max_steps)
        throw StepBudgetExceeded("step budget exhausted during burn-in", 0.0);
      x = advance(x);
      ++k;
      if (!inside(x)) {
        ++out.restarts;
        x = cfg.start;
        k = 0;
      }
    }
  }

  if (cfg.record_path) out.path.push_back(x);
  long k = 0;
  while (true) {
    if (total_steps >= cfg.max_steps)
      throw StepBudgetExceeded("no exit within max_steps", k * cfg.dt);
    Vec y = advance(x);
    ++k;
    if (cfg.record_path) out.path.push_back(y);
    if (inside(y)) {
      x = std::move(y);
      continue;
    }
    int axis = 0, side = 1;
    const double s = detail::crossing_fraction(x, y, lo, hi, axis, side);
    out.tau = (k - 1 + s) * cfg.dt;
    Vec e = x + s * (y - x);
    for (int a = 0; a < d; ++a) e[a] = std::clamp(e[a], dom.box.lower[a], dom.box.upper[a]);
    e[axis] = side > 0 ? dom.box.upper[axis] : dom.box.lower[axis];
    out.exit_point = e;
    break;
  }
  if (!(out.tau > 0.0)) out.tau = std::numeric_limits<double>::min();
  out.steps = total_steps;
  if (auto idx = dom.sigma_at(out.exit_point)) {
    out.patch_index = static_cast<int>(*idx);
    out.patch = dom.sigma[*idx].label;
  } else {
    out.patch = kOtherPatch;
  }
  return out;
}

struct ExitStatistics {
  std::size_t n = 0;
  double mean_tau = 0.0;
  double lambda = 0.0;
  double lambda_se = 0.0;
  std::vector<std::string> labels;  // Sigma labels followed by "other"
  std::vector<std::size_t> counts;
  std::vector<double> frequencies;
  std::vector<double> frequency_sigma;  // binomial standard deviation
  std::vector<double> rates;            // frequency / mean tau
  double ks_stat = 0.0;
  double ks_critical = 0.0;
  ChiSquare tau_patch_chi2;
  long restarts = 0;
  std::vector<ExitSample> samples;
};

/// n independent exits, trajectory i on noise stream (seed, i). The result
/// does not depend on `workers`.
inline ExitStatistics estimate(const SimConfig& cfg, const Potential& p, const DomainSpec& dom,
                               std::size_t n, unsigned workers = 1) {
  if (n < 100) throw InvalidArgument("estimate needs n >= 100");
  cfg.validate(dom.dim());
  if (!(cfg.h > 0.0)) throw InvalidArgument("estimate needs h > 0");
  std::vector<ExitSample> samples(n);
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < n; i += workers) samples[i] = simulate_exit(cfg, p, dom, i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExitStatistics s;
  s.n = n;
  const std::size_t np = dom.sigma.size();
  for (const auto& patch : dom.sigma) s.labels.push_back(patch.label);
  s.labels.push_back(kOtherPatch);
  s.counts.assign(np + 1, 0);
  std::vector<double> taus(n);
  std::vector<int> bins(n);
  for (std::size_t i = 0; i < n; ++i) {
    taus[i] = samples[i].tau;
    bins[i] = samples[i].patch_index < 0 ? static_cast<int>(np) : samples[i].patch_index;
    ++s.counts[static_cast<std::size_t>(bins[i])];
    s.restarts += samples[i].restarts;
  }
  const MeanSe m = mean_se(taus);
  s.mean_tau = m.mean;
  s.lambda = 1.0 / m.mean;
  s.lambda_se = s.lambda * (m.sd / m.mean) / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k <= np; ++k) {
    const double f = static_cast<double>(s.counts[k]) / static_cast<double>(n);
    s.frequencies.push_back(f);
    s.frequency_sigma.push_back(binomial_sigma(f, n));
    s.rates.push_back(static_cast<double>(s.counts[k]) / (static_cast<double>(n) * m.mean));
  }
  s.ks_stat = ks_exponential(taus, s.lambda);
  s.ks_critical = ks_critical_1pct(n);
  s.tau_patch_chi2 = chi2_independence(quartile_bins(taus), 4, bins, static_cast<int>(np + 1));
  s.samples = std::move(samples);
  return s;
}

}  // namespace kexit
