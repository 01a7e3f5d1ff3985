// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <kexit/harness.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

using namespace kexit;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(KEXIT_SOURCE_DIR) / "configs";

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail, double seconds) {
  if (!ok) ++failures;
  std::printf("%s criterion %d: %s | %s [%.1f s]\n", ok ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

double patch_rate(const ExitAnalysis& a, const std::string& label) {
  for (const auto& p : a.patches)
    if (p.label == label) return p.rate;
  throw InvalidArgument("missing patch " + label);
}

}  // namespace

int main() {
  const auto cl2 = load_config(kConfigs / "cl2.cfg");
  const auto aniso = load_config(kConfigs / "aniso2.cfg");
  const LandscapeStage L = build_landscape(cl2);
  const LandscapeStage A = build_landscape(aniso);
  const double delta = 0.01;

  // Spectral sweep on the symmetric lattice, shared by criteria 1-4 and 10.
  Timer t_sweep;
  std::vector<SpectralRun> runs;
  for (double h : {0.25, 0.3, 0.35, 0.4, 0.5})
    runs.push_back(run_spectral(L, h, delta, cl2.spectral, h == 0.3));
  const double sweep_seconds = t_sweep.seconds();

  {
    std::vector<double> hs, ls;
    for (const auto& r : runs) {
      hs.push_back(r.h);
      ls.push_back(r.solution.lambda);
    }
    const double slope = arrhenius_slope(hs, ls);
    report(1, std::abs(slope / -4.0 - 1.0) <= 0.02 && sweep_seconds <= 60.0,
           "exponent law, slope of log lambda vs 1/h",
           "slope " + num(slope, 6) + " vs -4 (2%), sweep " + num(sweep_seconds, 3) + " s",
           sweep_seconds);
  }

  {
    auto ratio = [](const SpectralRun& r) {
      return r.solution.lambda * std::exp(4.0 / r.h) / (4.0 * kPi);
    };
    const double r25 = ratio(runs.front()), r50 = ratio(runs.back());
    bool flux_ok = true, printed_off = true;
    double worst_flux = 1.0, printed = 0.0;
    for (const auto& r : runs) {
      for (const auto& pf : r.exits.patches) {
        const auto k = *L.table.find(pf.label);
        const double fr = std::exp(pf.log_flux - log_flux_asymptotic(L.table, k, r.h));
        const double pr = std::exp(pf.log_flux - log_flux_asymptotic_pi3d4(L.table, k, r.h));
        flux_ok = flux_ok && fr >= 0.5 && fr <= 1.5;
        if (std::abs(fr - 1.0) > std::abs(worst_flux - 1.0)) worst_flux = fr;
        printed = pr / fr;
        printed_off = printed_off && (pr < 0.5 || pr > 1.5) && std::abs(pr / fr / kPi - 1.0) < 0.05;
      }
    }
    const bool ok = r25 >= 0.5 && r25 <= 1.5 && std::abs(r25 - 1.0) < std::abs(r50 - 1.0) &&
                    flux_ok && printed_off;
    report(2, ok, "prefactor trend and flux coefficient",
           "ratio " + num(r25) + " at h=0.25, " + num(r50) + " at h=0.5; worst flux ratio " +
               num(worst_flux) + "; printed variant off by " + num(printed),
           sweep_seconds);
  }

  // Anisotropic sweep for criterion 7; its identities also count for 3.
  Timer t_aniso;
  std::vector<SpectralRun> aruns;
  for (double h : {0.5, 0.4, 0.3}) aruns.push_back(run_spectral(A, h, delta, aniso.spectral, false));
  const double aniso_seconds = t_aniso.seconds();

  {
    double worst = 0.0;
    for (const auto* set : {&runs, &aruns})
      for (const auto& r : *set) worst = std::max(worst, r.exits.identity_rel_err);
    report(3, worst <= 1e-10, "exact discrete rate identity",
           "max relative error " + num(worst, 3) + " over " + std::to_string(runs.size() + aruns.size()) +
               " runs",
           0.0);
  }

  // Monte Carlo at h = 0.5, shared by criteria 4-6.
  Timer t_mc;
  SimConfig sim = sim_config(cl2, L.table);
  sim.noise_refinement = 2;  // same Brownian path as the dt / 2 run below
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  const auto mc = estimate(sim, L.potential, L.domain, 2000, workers);
  const double mc_seconds = t_mc.seconds();

  {
    double worst_spectral = 0.0;
    for (const auto& r : runs)
      for (const auto& p : r.exits.patches)
        worst_spectral = std::max(worst_spectral, std::abs(p.rate / r.exits.lambda - 0.25));
    const double sigma = binomial_sigma(0.25, mc.n);
    bool mc_ok = mc.counts.back() == 0;
    double worst_mc = 0.0;
    for (std::size_t k = 0; k + 1 < mc.frequencies.size(); ++k) {
      worst_mc = std::max(worst_mc, std::abs(mc.frequencies[k] - 0.25));
      mc_ok = mc_ok && std::abs(mc.frequencies[k] - 0.25) <= 3.0 * sigma;
    }
    report(4, worst_spectral <= 1e-6 && mc_ok && mc_seconds <= 600.0, "exit-distribution symmetry",
           "spectral max |p - 1/4| " + num(worst_spectral, 3) + "; MC max |f - 1/4| " + num(worst_mc, 3) +
               " vs 3 sigma " + num(3.0 * sigma, 3),
           mc_seconds);
  }

  report(5, mc.ks_stat <= mc.ks_critical && mc.tau_patch_chi2.p_value > 0.01,
         "exponential exit time independent of exit patch",
         "KS " + num(mc.ks_stat) + " vs " + num(mc.ks_critical) + "; chi2 p " +
             num(mc.tau_patch_chi2.p_value),
         mc_seconds);

  {
    const SpectralRun& ref = runs.back();  // h = 0.5
    Timer t_half;
    SimConfig half = sim;
    half.dt = 0.5 * sim.dt;
    half.noise_refinement = 1;
    const auto mc_half = estimate(half, L.potential, L.domain, 2000, workers);
    const double z = (mc.lambda - ref.solution.lambda) / mc.lambda_se;
    const double shift = (mc_half.lambda - mc.lambda) / mc.lambda_se;
    report(6, std::abs(z) <= 3.0 && std::abs(shift) < 1.0, "Monte Carlo rate against spectral rate",
           "lambda_mc " + num(mc.lambda) + " +- " + num(mc.lambda_se, 3) + ", spectral " +
               num(ref.solution.lambda) + " (z " + num(z, 3) + "); dt-halving shift " +
               num(shift, 3) + " se",
           mc_seconds + t_half.seconds());
  }

  {
    auto ratio = [&](const SpectralRun& r) {
      const double low = 0.5 * (patch_rate(r.exits, "east") + patch_rate(r.exits, "west"));
      const double high = 0.5 * (patch_rate(r.exits, "north") + patch_rate(r.exits, "south"));
      return high / low / (1.5 * std::exp(-2.0 / r.h));
    };
    const double r50 = ratio(aruns.front()), r30 = ratio(aruns.back());
    report(7, r30 >= 0.6 && r30 <= 1.6 && std::abs(r30 - 1.0) < std::abs(r50 - 1.0),
           "higher-saddle suppression",
           "ratio " + num(r50) + " at h=0.5, " + num(ratio(aruns[1])) + " at h=0.4, " + num(r30) +
               " at h=0.3",
           aniso_seconds);
  }

  {
    Timer t;
    const auto mixed = run_mixed(cl2, L);
    const double secs = t.seconds();
    const double r25 = mixed[0].ratio, r35 = mixed[1].ratio;
    report(8, r25 >= 0.5 && r25 <= 1.5 && r35 >= 0.5 && r35 <= 1.5 &&
                  std::abs(r25 - 1.0) < std::abs(r35 - 1.0) && secs <= 30.0,
           "mixed-eigenvalue law",
           "ratio " + num(r25) + " at h=0.25, " + num(r35) + " at h=0.35, " + num(secs, 3) + " s",
           secs);
  }

  {
    Timer t;
    const Vec origin = Vec::Zero(2);
    const auto field = agmon_field(L.potential, L.domain, origin, 0.005);
    const double d = field.at(make_vec({1, 0}));
    const auto props = check_agmon_properties(L.potential, L.domain, field, 1000, cl2.seed);
    const bool ok = std::abs(d / 2.0 - 1.0) <= 0.02 && props.worst_lower_bound_margin >= -props.eps_grid &&
                    props.worst_triangle_margin >= -props.eps_grid && props.ok;
    report(9, ok, "Agmon distance",
           "d_a((0,0),(1,0)) " + num(d, 6) + "; margins lower " + num(props.worst_lower_bound_margin, 3) +
               ", triangle " + num(props.worst_triangle_margin, 3) + " vs -eps_grid " +
               num(-props.eps_grid, 3) + " on " + std::to_string(props.pairs) + " pairs",
           t.seconds());
  }

  {
    Timer t;
    const int small = runs[1].small_eig_count;  // h = 0.3
    auto hypo2 = [](const ExperimentConfig& c, const LandscapeStage& S) {
      const auto a = run_agmon(c, S);
      return *a.hypotheses;
    };
    const auto h1 = hypo2(cl2, L), h2 = hypo2(aniso, A);
    const bool ok = L.counts.total == std::vector<int>{1, 4, 4} && small == 1 && h1.hypo2_ok &&
                    h2.hypo2_ok && std::abs(h1.hypo2_lhs - 2.0) < 1e-9 &&
                    std::abs(h1.hypo2_rhs) < 1e-9 && std::abs(h2.hypo2_lhs - 2.0) < 1e-9 &&
                    std::abs(h2.hypo2_rhs - 1.0) < 1e-9;
    report(10, ok, "generalized counts and barrier hypotheses",
           "m = (" + std::to_string(L.counts.total[0]) + ", " + std::to_string(L.counts.total[1]) +
               ", " + std::to_string(L.counts.total[2]) + "); small eigenvalues at h=0.3: " +
               std::to_string(small) + "; hypo2 " + num(h1.hypo2_lhs) + " > " + num(h1.hypo2_rhs) +
               " and " + num(h2.hypo2_lhs) + " > " + num(h2.hypo2_rhs),
           t.seconds());
  }

  std::printf("summary: %d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
