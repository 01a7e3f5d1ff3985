#pragma once

// Kinetic Monte Carlo exit events: tau ~ Exponential(K), label ~ k_z / K,
// drawn from disjoint substreams so the two are independent.

#include <kexit/random.hpp>
#include <kexit/rates.hpp>
#include <kexit/stats.hpp>

#include <string>
#include <vector>

namespace kexit {

struct KMCModel {
  std::vector<std::string> labels;
  std::vector<double> rates;

  double total() const {
    double k = 0.0;
    for (double r : rates) k += r;
    return k;
  }

  void validate() const {
    if (labels.size() != rates.size()) throw InvalidArgument("kMC labels and rates differ in size");
    for (double r : rates)
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("kMC rates must be finite and >= 0");
    if (!(total() > 0.0)) throw InvalidArgument("no exit channel: total kMC rate is zero");
  }

  /// Harmonic rates of every saddle at temperature h.
  static KMCModel from_table(const SaddleTable& t, double h) {
    KMCModel m;
    for (std::size_t k = 0; k < t.size(); ++k) {
      m.labels.push_back(t.saddles[k].label);
      m.rates.push_back(ek_rate(t, k, h));
    }
    return m;
  }
};

struct ExitEvent {
  double tau = 0.0;
  std::size_t label = 0;
};

/// Event `index` of the stream keyed by `seed`.
inline ExitEvent sample_exit(const KMCModel& m, std::uint64_t seed, std::uint64_t index) {
  const double total = m.total();
  if (!(total > 0.0)) throw InvalidArgument("no exit channel: total kMC rate is zero");
  CounterRng time_rng(seed, index, Substream::kExitTime);
  CounterRng label_rng(seed, index, Substream::kExitLabel);
  ExitEvent e;
  e.tau = -std::log(time_rng.uniform_open_closed()) / total;
  const double target = label_rng.uniform() * total;
  double acc = 0.0;
  e.label = m.rates.size() - 1;
  for (std::size_t z = 0; z < m.rates.size(); ++z) {
    acc += m.rates[z];
    if (target < acc) {
      e.label = z;
      break;
    }
  }
  while (m.rates[e.label] == 0.0) --e.label;  // rounding at the top of the cumulative sum
  return e;
}

struct KMCSummary {
  double mean_tau = 0.0;
  double total_rate = 0.0;
  std::vector<double> label_freqs;
  ChiSquare tau_label_chi2;
  double ks_stat = 0.0;  // K tau against Exponential(1)
};

struct KMCBatch {
  std::vector<ExitEvent> events;
  KMCSummary summary;
};

inline KMCBatch batch_sample(const KMCModel& m, std::size_t n, std::uint64_t seed) {
  m.validate();
  if (n < 1) throw InvalidArgument("batch size must be >= 1");
  KMCBatch b;
  b.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.events.push_back(sample_exit(m, seed, i));
  auto& s = b.summary;
  s.total_rate = m.total();
  s.label_freqs.assign(m.rates.size(), 0.0);
  std::vector<double> taus(n);
  std::vector<int> labels(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    taus[i] = b.events[i].tau;
    labels[i] = static_cast<int>(b.events[i].label);
    sum += taus[i];
    s.label_freqs[b.events[i].label] += 1.0;
  }
  for (double& f : s.label_freqs) f /= static_cast<double>(n);
  s.mean_tau = sum / static_cast<double>(n);
  s.tau_label_chi2 =
      chi2_independence(quartile_bins(taus), 4, labels, static_cast<int>(m.rates.size()));
  s.ks_stat = ks_exponential(taus, s.total_rate);
  return b;
}

}  // namespace kexit
