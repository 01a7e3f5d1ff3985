#pragma once

// Experiment orchestration: runs the stages named in a configuration in
// dependency order (landscape, agmon, rates, then spectral / mixed / langevin /
// kmc) and assembles a comparison report in which every number carries the
// tag of the method that produced it.

#include <kexit/agmon.hpp>
#include <kexit/config.hpp>
#include <kexit/kmc.hpp>
#include <kexit/landscape.hpp>
#include <kexit/langevin.hpp>
#include <kexit/rates.hpp>
#include <kexit/spectral.hpp>

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace kexit {

using json = nlohmann::ordered_json;

namespace source {
inline constexpr const char* kEk = "ek";
inline constexpr const char* kSpectral = "spectral";
inline constexpr const char* kMc = "mc";
inline constexpr const char* kAnalytic = "analytic";
}  // namespace source

/// A tagged numeric cell; non-finite values become null.
inline json cell(double v, const char* src) {
  json j;
  j["value"] = std::isfinite(v) ? json(v) : json(nullptr);
  j["source"] = src;
  return j;
}

struct Assertion {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Failure inside a stage; the message carries the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage(stage) {}
  std::string stage;
};

struct LandscapeStage {
  Potential potential = Potential::cosine_lattice(1.0);
  DomainSpec domain;
  CriticalSearch search;
  SaddleTable table;
  GeneralizedCounts counts;
  AssumptionReport assumptions;
  double rho = 0.0;
};

struct SpectralRun {
  double h = 0.0;
  double delta = 0.0;
  SpectralSolution solution;
  ExitAnalysis exits;
  double normalization_error = 0.0;
  int small_eig_count = -1;
  double seconds = 0.0;
};

struct MixedRun {
  double h = 0.0;
  MixedEigenvalue value;
  double predicted_witten = 0.0;
  double ratio = 0.0;
};

struct Report {
  json doc;
  std::vector<Assertion> assertions;

  void check(const std::string& name, bool ok, const std::string& detail = "") {
    assertions.push_back({name, ok, detail});
  }
  bool passed() const {
    for (const auto& a : assertions)
      if (!a.passed) return false;
    return true;
  }
  json finalize() {
    json list = json::array();
    for (const auto& a : assertions)
      list.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
    doc["assertions"] = list;
    doc["passed"] = passed();
    return doc;
  }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::string csv_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

template <class F>
auto run_stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Index of the saddle whose Sigma patch is `label`.
inline std::optional<std::size_t> saddle_for_patch(const SaddleTable& t, const std::string& label) {
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t.saddles[k].sigma_label == label) return k;
  return std::nullopt;
}

}  // namespace detail

inline LandscapeStage build_landscape(const ExperimentConfig& c) {
  LandscapeStage s;
  s.potential = make_potential(c);
  const Box box = make_box(c.domain);
  if (s.potential.dimension() != box.dim())
    throw ConfigError("potential dimension " + std::to_string(s.potential.dimension()) +
                      " does not match the domain dimension " + std::to_string(box.dim()));
  s.domain.box = box;
  s.domain.sigma = c.domain.patches;
  s.domain.gamma = c.domain.gammas;
  s.domain.validate();
  s.search = find_critical_points(s.potential, s.domain, c.critical.seeds_per_axis, c.critical.tol);
  s.counts = count_generalized(s.search.points, box.dim(), c.critical.grad_tol);
  s.assumptions = check_assumptions(s.potential, s.domain, s.search.points,
                                    c.critical.boundary_samples, 1e-9, c.critical.grad_tol);
  s.table = build_saddle_table(s.search.points, s.domain, c.critical.grad_tol);
  if (c.domain.auto_patches) {
    s.rho = c.domain.rho > 0.0 ? c.domain.rho : default_patch_radius(s.table, box);
    s.domain = with_saddle_patches(s.domain, s.table, s.rho);
  } else {
    s.rho = c.domain.rho;
  }
  return s;
}

inline json landscape_json(const LandscapeStage& s) {
  json j;
  j["family"] = std::string(s.potential.family_name());
  j["dim"] = s.table.dim;
  j["seeds"] = s.search.seeds;
  j["unconverged_seeds"] = s.search.unconverged;
  json pts = json::array();
  for (const auto& cp : s.search.points) {
    json p{{"location", detail::vec_json(cp.location)},
           {"value", cell(cp.value, source::kAnalytic)},
           {"kind", cp.kind == PointKind::Interior ? "interior" : "boundary"},
           {"index", cp.index},
           {"hess_eigs", detail::vec_json(cp.hess_eigs)},
           {"patch", cp.patch}};
    if (cp.boundary) {
      p["face"] = cp.boundary->face.name();
      p["mu"] = cell(cp.boundary->mu, source::kAnalytic);
      p["normal_derivative"] = cell(cp.boundary->normal_derivative, source::kAnalytic);
      p["restricted_index"] = cp.boundary->restricted_index;
    }
    pts.push_back(p);
  }
  j["critical_points"] = pts;
  j["minimum"] = {{"location", detail::vec_json(s.table.x0)},
                  {"value", cell(s.table.f_x0, source::kAnalytic)},
                  {"det_hess", cell(s.table.det_hess_x0, source::kAnalytic)}};
  json sad = json::array();
  for (std::size_t k = 0; k < s.table.size(); ++k) {
    const auto& z = s.table.saddles[k];
    sad.push_back({{"label", z.label},
                   {"location", detail::vec_json(z.location)},
                   {"face", z.face.name()},
                   {"value", cell(z.value, source::kAnalytic)},
                   {"barrier", cell(s.table.barrier(k), source::kAnalytic)},
                   {"abs_mu", cell(z.abs_mu, source::kAnalytic)},
                   {"abs_det_hess", cell(z.abs_det_hess, source::kAnalytic)},
                   {"prefactor", cell(ek_prefactor(s.table, k), source::kEk)},
                   {"patch", z.sigma_label}});
  }
  j["saddles"] = sad;
  j["n0"] = s.table.n0;
  j["rho"] = s.rho;
  j["counts"] = {{"interior", s.counts.interior},
                 {"boundary_outward", s.counts.boundary1},
                 {"boundary_saddle", s.counts.boundary2},
                 {"total", s.counts.total}};
  j["assumptions"] = {{"ok", s.assumptions.ok},
                      {"normal_derivative_ok", s.assumptions.normal_derivative_ok},
                      {"boundary_minima_ok", s.assumptions.boundary_minima_ok},
                      {"unique_minimum_ok", s.assumptions.unique_minimum_ok},
                      {"min_normal_derivative",
                       cell(s.assumptions.min_normal_derivative, source::kAnalytic)},
                      {"violations", s.assumptions.violations.size()}};
  return j;
}

inline void write_critical_csv(const LandscapeStage& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  const int d = s.table.dim;
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  for (int a = 0; a < d; ++a) out << kAxes[a] << ",";
  out << "value,kind,index,face,mu,normal_derivative,restricted_index,patch\n";
  for (const auto& cp : s.search.points) {
    for (int a = 0; a < d; ++a) out << detail::csv_num(cp.location[a]) << ",";
    out << detail::csv_num(cp.value) << ","
        << (cp.kind == PointKind::Interior ? "interior" : "boundary") << "," << cp.index << ",";
    if (cp.boundary) {
      out << cp.boundary->face.name() << "," << detail::csv_num(cp.boundary->mu) << ","
          << detail::csv_num(cp.boundary->normal_derivative) << ","
          << cp.boundary->restricted_index;
    } else {
      out << ",,,";
    }
    out << "," << cp.patch << "\n";
  }
}

struct AgmonStage {
  std::vector<std::string> source_labels;
  std::vector<AgmonField> fields;
  std::optional<HypothesisReport> hypotheses;
  std::optional<AgmonPropertyReport> properties;
};

inline AgmonStage run_agmon(const ExperimentConfig& c, const LandscapeStage& L) {
  AgmonStage a;
  std::vector<Vec> sources;
  if (c.agmon.sources == "saddles") {
    for (const auto& z : L.table.saddles) {
      sources.push_back(z.location);
      a.source_labels.push_back(z.label);
    }
  } else if (c.agmon.sources == "minimum") {
    sources.push_back(L.table.x0);
    a.source_labels.push_back("minimum");
  } else {
    for (const auto& pt : detail::split(c.agmon.sources, ";")) {
      const auto xs = detail::parse_list("agmon.sources", pt);
      if (static_cast<int>(xs.size()) != L.table.dim)
        throw ConfigError("agmon.sources: point '" + pt + "' has the wrong dimension");
      sources.push_back(detail::to_vec(xs));
      a.source_labels.push_back(detail::trim(pt));
    }
  }
  for (const auto& s : sources)
    a.fields.push_back(agmon_field(L.potential, L.domain, s, c.agmon.delta));
  if (c.agmon.sources == "saddles") a.hypotheses = check_hypotheses(L.table, L.domain, a.fields);
  if (!a.fields.empty())
    a.properties = check_agmon_properties(L.potential, L.domain, a.fields.front(), c.agmon.pairs,
                                          child_seed(c.seed, 0xa9));
  return a;
}

inline json agmon_json(const AgmonStage& a, const SaddleTable& t) {
  json j;
  j["sources"] = a.source_labels;
  if (!a.fields.empty()) j["eps_grid"] = a.fields.front().eps_grid;
  if (a.hypotheses) {
    const auto& h = *a.hypotheses;
    json per = json::array();
    for (std::size_t k = 0; k < h.hypo1_ok.size(); ++k)
      per.push_back({{"saddle", t.saddles[k].label},
                     {"hypo1", h.hypo1_ok[k]},
                     {"margin", cell(h.hypo1_margin[k], source::kAnalytic)},
                     {"eps_grid", h.hypo1_eps_grid[k]}});
    j["hypo1"] = per;
    j["hypo2"] = {{"ok", h.hypo2_ok},
                  {"lhs", cell(h.hypo2_lhs, source::kAnalytic)},
                  {"rhs", cell(h.hypo2_rhs, source::kAnalytic)}};
    json bis = json::array();
    for (std::size_t k = 0; k < h.hypo2_bis_ok.size(); ++k)
      bis.push_back({{"saddle", t.saddles[t.n0 + k].label},
                     {"ok", h.hypo2_bis_ok[k]},
                     {"margin", cell(h.hypo2_bis_margin[k], source::kAnalytic)}});
    j["hypo2_bis"] = bis;
  }
  if (a.properties) {
    const auto& p = *a.properties;
    j["properties"] = {{"pairs", p.pairs},
                       {"lower_bound_margin", p.worst_lower_bound_margin},
                       {"triangle_margin", p.worst_triangle_margin},
                       {"symmetry_gap", p.symmetry_gap},
                       {"ok", p.ok}};
  }
  return j;
}

inline json rates_json(const SaddleTable& t, const std::vector<double>& hs) {
  json rows = json::array();
  for (double h : hs) {
    const RatePrediction r = predict(t, h);
    json row{{"h", h}, {"lambda", cell(r.lambda, source::kEk)}};
    json per = json::array();
    for (std::size_t k = 0; k < t.size(); ++k)
      per.push_back({{"saddle", t.saddles[k].label},
                     {"rate", cell(r.rate[k], source::kEk)},
                     {"probability", cell(r.probabilities.normalized[k], source::kEk)},
                     {"mixed_eigenvalue", cell(r.mixed_eigenvalue[k], source::kEk)},
                     {"log_flux", cell(r.log_flux[k], source::kEk)}});
    row["saddles"] = per;
    row["log_mass"] = cell(r.log_mass, source::kEk);
    rows.push_back(row);
  }
  return rows;
}

inline void write_rates_csv(const SaddleTable& t, const std::vector<double>& hs,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "h,saddle,barrier,prefactor,rate,probability,lambda\n";
  for (double h : hs) {
    const RatePrediction r = predict(t, h);
    for (std::size_t k = 0; k < t.size(); ++k)
      out << detail::csv_num(h) << "," << t.saddles[k].label << ","
          << detail::csv_num(r.barrier[k]) << "," << detail::csv_num(r.prefactor[k]) << ","
          << detail::csv_num(r.rate[k]) << "," << detail::csv_num(r.probabilities.normalized[k])
          << "," << detail::csv_num(r.lambda) << "\n";
  }
}

inline SpectralRun run_spectral(const LandscapeStage& L, double h, double delta,
                                const SpectralConfig& sc, bool count_small) {
  const auto t0 = std::chrono::steady_clock::now();
  SpectralRun r;
  r.h = h;
  r.delta = delta;
  const auto gen = assemble_dirichlet(L.potential, L.domain.box, h, delta);
  SolverOptions opt;
  opt.tol = sc.tol;
  opt.max_iters = sc.max_iters;
  r.solution = principal_eigenpair(gen, opt);
  r.exits = exit_analysis(gen, r.solution, L.domain);
  r.normalization_error = std::abs(gen.dot(r.solution.u, r.solution.u) * gen.grid().cell_volume() - 1.0);
  if (count_small) r.small_eig_count = small_eig_count(gen, sc.threshold_factor * h);
  r.seconds = detail::seconds_since(t0);
  return r;
}

inline json spectral_json(const SpectralRun& r, const SaddleTable& t) {
  json j{{"h", r.h},
         {"delta", r.delta},
         {"lambda", cell(r.solution.lambda, source::kSpectral)},
         {"lambda_ek", cell(lambda_h_asymptotic(t, r.h), source::kEk)},
         {"mass", cell(r.exits.mass, source::kSpectral)},
         {"log_mass", cell(r.exits.log_mass, source::kSpectral)},
         {"log_mass_ek", cell(log_mass_asymptotic(t, r.h), source::kEk)},
         {"iterations", r.solution.iterations},
         {"inner_iterations", r.solution.inner_iterations},
         {"residual", cell(r.solution.residual, source::kSpectral)},
         {"residual_floor", cell(r.solution.residual_floor, source::kSpectral)},
         {"normalization_error", cell(r.normalization_error, source::kSpectral)},
         {"identity_rel_err", cell(r.exits.identity_rel_err, source::kSpectral)},
         {"other_rate", cell(r.exits.other_rate, source::kSpectral)},
         {"seconds", r.seconds}};
  j["lambda_rel_err_ek"] =
      cell(lambda_h_asymptotic(t, r.h) / r.solution.lambda - 1.0, source::kEk);
  if (r.small_eig_count >= 0) j["small_eig_count"] = r.small_eig_count;
  // Rate of the patch attached to the lowest saddle, the reference for the
  // suppression of higher saddles.
  double low_rate = 0.0;
  for (const auto& pf : r.exits.patches)
    if (auto k = detail::saddle_for_patch(t, pf.label); k && *k == 0) low_rate = pf.rate;
  json per = json::array();
  for (const auto& pf : r.exits.patches) {
    json p{{"patch", pf.label},
           {"rate", cell(pf.rate, source::kSpectral)},
           {"probability", cell(pf.rate / r.exits.lambda, source::kSpectral)},
           {"log_flux", cell(pf.log_flux, source::kSpectral)}};
    if (auto k = detail::saddle_for_patch(t, pf.label)) {
      p["rate_ek"] = cell(ek_rate(t, *k, r.h), source::kEk);
      p["log_flux_ek"] = cell(log_flux_asymptotic(t, *k, r.h), source::kEk);
      p["flux_ratio_ek"] = cell(std::exp(pf.log_flux - log_flux_asymptotic(t, *k, r.h)), source::kEk);
      p["flux_ratio_printed"] =
          cell(std::exp(pf.log_flux - log_flux_asymptotic_pi3d4(t, *k, r.h)), source::kEk);
      if (*k >= t.n0 && low_rate > 0.0)
        p["suppression_ratio"] =
            cell(pf.rate / low_rate / (ek_rate(t, *k, r.h) / ek_rate(t, 0, r.h)), source::kSpectral);
    }
    per.push_back(p);
  }
  j["patches"] = per;
  return j;
}

inline void check_spectral(Report& rep, const SpectralRun& r) {
  const std::string tag = "spectral h=" + detail::csv_num(r.h) + " delta=" + detail::csv_num(r.delta);
  rep.check(tag + ": rate identity", r.exits.identity_rel_err <= 1e-10,
            "relative error " + detail::csv_num(r.exits.identity_rel_err));
  rep.check(tag + ": weighted normalization", r.normalization_error <= 1e-12,
            "error " + detail::csv_num(r.normalization_error));
}

inline void write_field_csv(const LandscapeStage& L, const SpectralRun& r,
                            const std::filesystem::path& path) {
  const auto gen = assemble_dirichlet(L.potential, L.domain.box, r.h, r.delta);
  std::ofstream out(path);
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  for (int a = 0; a < gen.dim(); ++a) out << kAxes[a] << ",";
  out << "u,qsd\n";
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const Vec x = gen.grid().position(gen.node(i));
    for (int a = 0; a < gen.dim(); ++a) out << detail::csv_num(x[a]) << ",";
    out << detail::csv_num(r.solution.u[i]) << "," << detail::csv_num(r.exits.qsd[i]) << "\n";
  }
}

inline SimConfig sim_config(const ExperimentConfig& c, const SaddleTable& t) {
  SimConfig s;
  s.h = c.langevin.h;
  s.dt = c.langevin.dt;
  s.max_steps = c.langevin.max_steps;
  s.seed = child_seed(c.seed, 0x1a);
  s.start = c.langevin.start.empty() ? t.x0 : detail::to_vec(c.langevin.start);
  s.burn_in = c.langevin.burn_in >= 0.0 ? c.langevin.burn_in : 20.0 / t.min_hess_eig_x0;
  s.noise_refinement = c.langevin.noise_refinement;
  s.boundary_shift = c.langevin.boundary_shift;
  return s;
}

inline json langevin_json(const ExitStatistics& s, const SimConfig& cfg, const SaddleTable& t,
                          const SpectralRun* ref) {
  json j{{"h", cfg.h},
         {"dt", cfg.dt},
         {"n", s.n},
         {"burn_in", cfg.burn_in},
         {"restarts", s.restarts},
         {"lambda", cell(s.lambda, source::kMc)},
         {"lambda_se", cell(s.lambda_se, source::kMc)},
         {"mean_tau", cell(s.mean_tau, source::kMc)},
         {"ks_stat", cell(s.ks_stat, source::kMc)},
         {"ks_critical", cell(s.ks_critical, source::kAnalytic)},
         {"chi2", cell(s.tau_patch_chi2.statistic, source::kMc)},
         {"chi2_dof", s.tau_patch_chi2.dof},
         {"chi2_p", cell(s.tau_patch_chi2.p_value, source::kMc)},
         {"lambda_ek", cell(lambda_h_asymptotic(t, cfg.h), source::kEk)}};
  if (ref) {
    j["lambda_spectral"] = cell(ref->solution.lambda, source::kSpectral);
    j["z_spectral"] = cell((s.lambda - ref->solution.lambda) / s.lambda_se, source::kMc);
  }
  const auto probs = exit_probabilities(t, cfg.h);
  json per = json::array();
  for (std::size_t k = 0; k < s.labels.size(); ++k) {
    json p{{"patch", s.labels[k]},
           {"count", s.counts[k]},
           {"frequency", cell(s.frequencies[k], source::kMc)},
           {"frequency_sigma", cell(s.frequency_sigma[k], source::kMc)},
           {"rate", cell(s.rates[k], source::kMc)}};
    if (auto z = detail::saddle_for_patch(t, s.labels[k])) {
      p["probability_ek"] = cell(probs.normalized[*z], source::kEk);
      p["rate_ek"] = cell(ek_rate(t, *z, cfg.h), source::kEk);
    }
    if (ref) {
      for (const auto& pf : ref->exits.patches)
        if (pf.label == s.labels[k]) {
          p["probability_spectral"] = cell(pf.rate / ref->exits.lambda, source::kSpectral);
          p["rate_spectral"] = cell(pf.rate, source::kSpectral);
        }
      if (s.labels[k] == kOtherPatch)
        p["probability_spectral"] =
            cell(ref->exits.other_rate / ref->exits.lambda, source::kSpectral);
    }
    per.push_back(p);
  }
  j["patches"] = per;
  return j;
}

inline void check_langevin(Report& rep, const ExitStatistics& s, const SpectralRun* ref) {
  rep.check("langevin: KS against Exponential(lambda_hat)", s.ks_stat <= s.ks_critical,
            detail::csv_num(s.ks_stat) + " vs " + detail::csv_num(s.ks_critical));
  rep.check("langevin: exit time independent of exit patch", s.tau_patch_chi2.p_value > 0.01,
            "p = " + detail::csv_num(s.tau_patch_chi2.p_value));
  if (ref)
    rep.check("langevin: rate within 3 se of the spectral rate",
              std::abs(s.lambda - ref->solution.lambda) <= 3.0 * s.lambda_se,
              detail::csv_num(s.lambda) + " vs " + detail::csv_num(ref->solution.lambda) +
                  " (se " + detail::csv_num(s.lambda_se) + ")");
}

inline void write_exits_csv(const ExitStatistics& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  static constexpr const char* kAxes[] = {"x", "y", "z"};
  out << "index,tau,";
  const int d = s.samples.empty() ? 0 : static_cast<int>(s.samples.front().exit_point.size());
  for (int a = 0; a < d; ++a) out << kAxes[a] << ",";
  out << "patch,restarts\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto& e = s.samples[i];
    out << i << "," << detail::csv_num(e.tau) << ",";
    for (int a = 0; a < d; ++a) out << detail::csv_num(e.exit_point[a]) << ",";
    out << e.patch << "," << e.restarts << "\n";
  }
}

inline json kmc_json(const KMCModel& m, const KMCBatch& b, double h) {
  json j{{"h", h},
         {"n", b.events.size()},
         {"total_rate", cell(b.summary.total_rate, source::kEk)},
         {"mean_tau", cell(b.summary.mean_tau, source::kMc)},
         {"ks_stat", cell(b.summary.ks_stat, source::kMc)},
         {"ks_critical", cell(ks_critical_1pct(b.events.size()), source::kAnalytic)},
         {"chi2_p", cell(b.summary.tau_label_chi2.p_value, source::kMc)}};
  json per = json::array();
  for (std::size_t k = 0; k < m.labels.size(); ++k)
    per.push_back({{"saddle", m.labels[k]},
                   {"rate", cell(m.rates[k], source::kEk)},
                   {"probability", cell(m.rates[k] / m.total(), source::kEk)},
                   {"frequency", cell(b.summary.label_freqs[k], source::kMc)}});
  j["channels"] = per;
  return j;
}

inline void write_kmc_csv(const KMCModel& m, const KMCBatch& b, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "index,tau,label\n";
  for (std::size_t i = 0; i < b.events.size(); ++i)
    out << i << "," << detail::csv_num(b.events[i].tau) << "," << m.labels[b.events[i].label]
        << "\n";
}

inline std::vector<MixedRun> run_mixed(const ExperimentConfig& c, const LandscapeStage& L) {
  const Box sub(detail::to_vec(c.mixed.lower), detail::to_vec(c.mixed.upper));
  const Face face = Face::parse(c.mixed.face);
  // Harmonic data of the saddle on the absorbing face, from the sub-box itself.
  DomainSpec sub_dom{sub, {}, {}};
  const auto pts = find_critical_points(L.potential, sub_dom, 8, 1e-10);
  std::vector<CriticalPoint> kept;
  for (const auto& cp : pts.points)
    if (cp.kind == PointKind::Interior || (is_boundary_saddle(cp, 1e-8) && cp.boundary->face == face))
      kept.push_back(cp);
  const SaddleTable t = build_saddle_table(kept, sub_dom);
  std::vector<MixedRun> runs;
  for (double h : c.mixed.h) {
    MixedRun r;
    r.h = h;
    r.value = mixed_eigenvalue(L.potential, sub, face, h, c.mixed.delta);
    r.predicted_witten = mixed_eigenvalue_asymptotic(t, 0, h);
    r.ratio = r.value.lambda_witten / r.predicted_witten;
    runs.push_back(r);
  }
  return runs;
}

inline json mixed_json(const std::vector<MixedRun>& runs, const ExperimentConfig& c) {
  json rows = json::array();
  for (const auto& r : runs)
    rows.push_back({{"h", r.h},
                    {"delta", c.mixed.delta},
                    {"face", c.mixed.face},
                    {"mu_gen", cell(r.value.mu_gen, source::kSpectral)},
                    {"lambda_witten", cell(r.value.lambda_witten, source::kSpectral)},
                    {"lambda_witten_ek", cell(r.predicted_witten, source::kEk)},
                    {"ratio", cell(r.ratio, source::kSpectral)},
                    {"min_reflecting_normal_derivative",
                     cell(r.value.min_neumann_normal_derivative, source::kAnalytic)}});
  return rows;
}

/// Least-squares slope of log y against 1 / h.
inline double arrhenius_slope(const std::vector<double>& h, const std::vector<double>& y) {
  const std::size_t n = h.size();
  if (n < 2) throw InvalidArgument("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 1.0 / h[i], v = std::log(y[i]);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Runs every enabled stage. Stage failures carry the stage name; the partial
/// report is available through `partial` when an exception escapes.
inline Report run(const ExperimentConfig& c, json* partial = nullptr,
                  const std::filesystem::path& out_dir = {}) {
  validate(c);
  Report rep;
  auto& doc = rep.doc;
  doc["seed"] = c.seed;
  doc["config"] = render_config(c);
  const bool write = !out_dir.empty();
  if (write) std::filesystem::create_directories(out_dir);
  auto keep = [&] {
    if (partial) *partial = rep.finalize();
  };
  try {
    const LandscapeStage L = detail::run_stage("landscape", [&] { return build_landscape(c); });
    doc["landscape"] = landscape_json(L);
    rep.check("landscape: unique interior minimum", L.assumptions.unique_minimum_ok);
    if (write) write_critical_csv(L, out_dir / "critical_points.csv");
    keep();

    if (c.stage_enabled("agmon")) {
      const auto A = detail::run_stage("agmon", [&] { return run_agmon(c, L); });
      doc["agmon"] = agmon_json(A, L.table);
      if (A.properties)
        rep.check("agmon: lower bound, triangle and symmetry properties", A.properties->ok);
      keep();
    }

    if (c.stage_enabled("rates")) {
      doc["rates"] = detail::run_stage("rates", [&] { return rates_json(L.table, c.rates.h); });
      if (write) write_rates_csv(L.table, c.rates.h, out_dir / "rates.csv");
      keep();
    }

    std::vector<SpectralRun> spectral;
    if (c.stage_enabled("spectral")) {
      json rows = json::array();
      for (double h : c.rates.h) {
        for (double delta : c.spectral.delta) {
          auto r = detail::run_stage("spectral", [&] {
            return run_spectral(L, h, delta, c.spectral, delta == c.spectral.delta.front());
          });
          rows.push_back(spectral_json(r, L.table));
          check_spectral(rep, r);
          if (write && c.spectral.dump_field)
            write_field_csv(L, r, out_dir / ("field_h" + detail::csv_num(h) + "_d" +
                                             detail::csv_num(delta) + ".csv"));
          spectral.push_back(std::move(r));
          doc["spectral"] = rows;
          keep();
        }
      }
      if (c.rates.h.size() >= 2) {
        std::vector<double> hs, ls;
        for (const auto& r : spectral)
          if (r.delta == c.spectral.delta.front()) {
            hs.push_back(r.h);
            ls.push_back(r.solution.lambda);
          }
        doc["spectral_slope"] = cell(arrhenius_slope(hs, ls), source::kSpectral);
        doc["ek_slope"] = cell(-2.0 * L.table.barrier(0), source::kEk);
      }
    }

    if (c.stage_enabled("mixed")) {
      const auto runs = detail::run_stage("mixed", [&] { return run_mixed(c, L); });
      doc["mixed"] = mixed_json(runs, c);
      keep();
    }

    if (c.stage_enabled("langevin")) {
      const SimConfig sim = sim_config(c, L.table);
      const SpectralRun* ref = nullptr;
      for (const auto& r : spectral)
        if (std::abs(r.h - sim.h) <= 1e-12 && r.delta == c.spectral.delta.front()) ref = &r;
      const auto stats = detail::run_stage(
          "langevin", [&] { return estimate(sim, L.potential, L.domain, c.langevin.n, c.langevin.workers); });
      doc["langevin"] = langevin_json(stats, sim, L.table, ref);
      check_langevin(rep, stats, ref);
      if (write) write_exits_csv(stats, out_dir / "exits.csv");
      keep();
    }

    if (c.stage_enabled("kmc")) {
      const auto model = KMCModel::from_table(L.table, c.kmc.h);
      const auto batch = detail::run_stage(
          "kmc", [&] { return batch_sample(model, c.kmc.n, child_seed(c.seed, 0x6c)); });
      doc["kmc"] = kmc_json(model, batch, c.kmc.h);
      if (c.kmc.n >= 100) {
        rep.check("kmc: KS against Exponential(K)",
                  batch.summary.ks_stat <= ks_critical_1pct(c.kmc.n));
        rep.check("kmc: exit time independent of channel", batch.summary.tau_label_chi2.p_value > 0.01);
      }
      if (write) write_kmc_csv(model, batch, out_dir / "kmc_events.csv");
      keep();
    }

    // Three-way rows: one per temperature that has a spectral solution.
    json cmp = json::array();
    for (const auto& r : spectral) {
      if (r.delta != c.spectral.delta.front()) continue;
      json row{{"h", r.h},
               {"lambda_ek", cell(lambda_h_asymptotic(L.table, r.h), source::kEk)},
               {"lambda_spectral", cell(r.solution.lambda, source::kSpectral)}};
      if (doc.contains("langevin") && std::abs(doc["langevin"]["h"].get<double>() - r.h) <= 1e-12) {
        row["lambda_mc"] = doc["langevin"]["lambda"];
        row["lambda_mc_se"] = doc["langevin"]["lambda_se"];
      }
      const auto probs = exit_probabilities(L.table, r.h);
      json per = json::array();
      for (const auto& pf : r.exits.patches) {
        json p{{"patch", pf.label},
               {"probability_spectral", cell(pf.rate / r.exits.lambda, source::kSpectral)},
               {"flux_spectral", cell(pf.log_flux, source::kSpectral)}};
        if (auto k = detail::saddle_for_patch(L.table, pf.label)) {
          p["probability_ek"] = cell(probs.normalized[*k], source::kEk);
          p["flux_ek"] = cell(log_flux_asymptotic(L.table, *k, r.h), source::kEk);
        }
        if (row.contains("lambda_mc"))
          for (const auto& m : doc["langevin"]["patches"])
            if (m["patch"] == pf.label) p["probability_mc"] = m["frequency"];
        per.push_back(p);
      }
      row["patches"] = per;
      if (r.small_eig_count >= 0) row["small_eig_count"] = r.small_eig_count;
      cmp.push_back(row);
    }
    doc["comparison"] = cmp;
  } catch (...) {
    keep();
    throw;
  }
  rep.finalize();
  return rep;
}

enum class SweepAxis { H, Delta, Dt };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "h") return SweepAxis::H;
  if (s == "delta") return SweepAxis::Delta;
  if (s == "dt") return SweepAxis::Dt;
  throw ConfigError("sweep axis must be h, delta or dt");
}

struct SweepResult {
  json doc;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Reruns the stage that depends on `axis` for each value. h and delta sweep
/// the spectral solver (at the first delta, respectively the first h); dt
/// sweeps the Langevin estimator with coupled noise across time steps.
inline SweepResult sweep(const ExperimentConfig& c, SweepAxis axis, std::vector<double> values) {
  validate(c);
  if (values.empty()) throw InvalidArgument("sweep needs at least one value");
  for (double v : values)
    if (!(v > 0.0)) throw InvalidArgument("sweep values must be positive");
  const LandscapeStage L = detail::run_stage("landscape", [&] { return build_landscape(c); });
  SweepResult out;
  json rows = json::array();
  if (axis == SweepAxis::H || axis == SweepAxis::Delta) {
    out.header = {"h", "delta", "lambda", "lambda_ek", "prefactor_ratio", "identity_rel_err", "seconds"};
    std::vector<double> hs, ls;
    for (double v : values) {
      const double h = axis == SweepAxis::H ? v : c.rates.h.front();
      const double delta = axis == SweepAxis::Delta ? v : c.spectral.delta.front();
      const auto r = detail::run_stage("spectral", [&] { return run_spectral(L, h, delta, c.spectral, false); });
      const double ek = lambda_h_asymptotic(L.table, h);
      out.rows.push_back({h, delta, r.solution.lambda, ek, r.solution.lambda / ek,
                          r.exits.identity_rel_err, r.seconds});
      rows.push_back({{"h", h},
                      {"delta", delta},
                      {"lambda", cell(r.solution.lambda, source::kSpectral)},
                      {"lambda_ek", cell(ek, source::kEk)},
                      {"prefactor_ratio", cell(r.solution.lambda / ek, source::kSpectral)},
                      {"identity_rel_err", cell(r.exits.identity_rel_err, source::kSpectral)}});
      hs.push_back(h);
      ls.push_back(r.solution.lambda);
    }
    if (axis == SweepAxis::H && values.size() >= 2) {
      out.doc["slope"] = cell(arrhenius_slope(hs, ls), source::kSpectral);
      out.doc["slope_ek"] = cell(-2.0 * L.table.barrier(0), source::kEk);
    }
    if (axis == SweepAxis::Delta && values.size() >= 3) {
      json conv = json::array();
      for (std::size_t i = 2; i < ls.size(); ++i)
        conv.push_back(cell((ls[i - 2] - ls[i - 1]) / (ls[i - 1] - ls[i]), source::kSpectral));
      out.doc["difference_ratios"] = conv;
    }
  } else {
    out.header = {"dt", "lambda", "lambda_se", "shift_in_se"};
    const double dt_min = *std::min_element(values.begin(), values.end());
    double base = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      SimConfig sim = sim_config(c, L.table);
      sim.dt = values[i];
      const double ratio = values[i] / dt_min;
      const double rounded = std::round(ratio);
      sim.noise_refinement =
          c.langevin.noise_refinement * (std::abs(ratio - rounded) < 1e-9 ? static_cast<int>(rounded) : 1);
      const auto s = detail::run_stage(
          "langevin", [&] { return estimate(sim, L.potential, L.domain, c.langevin.n, c.langevin.workers); });
      if (i == 0) base = s.lambda;
      const double shift = (s.lambda - base) / s.lambda_se;
      out.rows.push_back({values[i], s.lambda, s.lambda_se, shift});
      rows.push_back({{"dt", values[i]},
                      {"noise_refinement", sim.noise_refinement},
                      {"lambda", cell(s.lambda, source::kMc)},
                      {"lambda_se", cell(s.lambda_se, source::kMc)},
                      {"shift_in_se", cell(shift, source::kMc)}});
    }
  }
  out.doc["rows"] = rows;
  return out;
}

inline void write_table_csv(const std::vector<std::string>& header,
                            const std::vector<std::vector<double>>& rows,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << detail::csv_num(r[i]);
    out << "\n";
  }
}

inline void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace kexit
