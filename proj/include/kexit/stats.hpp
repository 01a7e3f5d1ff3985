#pragma once

// Goodness-of-fit and independence statistics for exit samples.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace kexit {

/// One-sample Kolmogorov-Smirnov statistic of `samples` against Exponential(rate).
inline double ks_exponential(std::vector<double> samples, double rate) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = -std::expm1(-rate * samples[i]);
    d = std::max({d, (i + 1) / n - cdf, cdf - i / n});
  }
  return d;
}

/// Asymptotic 1% critical value of the KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square test of independence for two categorical labelings.
/// Empty rows and columns are dropped before counting degrees of freedom.
inline ChiSquare chi2_independence(const std::vector<int>& a, int na, const std::vector<int>& b,
                                   int nb) {
  std::vector<double> table(static_cast<std::size_t>(na * nb), 0.0), ra(na, 0.0), cb(nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[static_cast<std::size_t>(a[i] * nb + b[i])] += 1.0;
    ra[a[i]] += 1.0;
    cb[b[i]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  ChiSquare r;
  for (int i = 0; i < na; ++i) {
    if (ra[i] == 0.0) continue;
    for (int j = 0; j < nb; ++j) {
      if (cb[j] == 0.0) continue;
      const double e = ra[i] * cb[j] / n;
      const double o = table[static_cast<std::size_t>(i * nb + j)];
      r.statistic += (o - e) * (o - e) / e;
    }
  }
  const int rows = static_cast<int>(std::count_if(ra.begin(), ra.end(), [](double v) { return v > 0; }));
  const int cols = static_cast<int>(std::count_if(cb.begin(), cb.end(), [](double v) { return v > 0; }));
  r.dof = (rows - 1) * (cols - 1);
  r.p_value = r.dof > 0 ? boost::math::gamma_q(0.5 * r.dof, 0.5 * r.statistic) : 1.0;
  return r;
}

/// Quartile index (0..3) of each sample by rank.
inline std::vector<int> quartile_bins(const std::vector<double>& samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return samples[i] < samples[j]; });
  std::vector<int> bins(samples.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    bins[order[r]] = static_cast<int>(4 * r / order.size());
  return bins;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe m;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.sd = xs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  m.se = m.sd / std::sqrt(n);
  return m;
}

inline double binomial_sigma(double p, std::size_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace kexit
