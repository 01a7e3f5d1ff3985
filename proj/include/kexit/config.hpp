#pragma once

// Experiment configuration: a sectioned key = value file. Every key has an
// explicit default, unknown sections and keys are rejected.

#include <kexit/domain.hpp>
#include <kexit/potential.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace kexit {

struct PotentialConfig {
  std::string family = "cosine_lattice";
  double c = 1.0;
  int dim = 2;                  // polynomial only
  std::vector<Monomial> terms;  // polynomial only
  std::string table;            // external only: CSV of x[,y],f on a full grid
  std::vector<double> tilt;
};

struct DomainConfig {
  std::vector<double> lower{-1.0, -1.0};
  std::vector<double> upper{1.0, 1.0};
  double rho = 0.0;  // 0 selects a fifth of the minimal saddle separation
  bool auto_patches = true;
  std::vector<SigmaPatch> patches;
  std::vector<GammaPatch> gammas;
};

struct CriticalConfig {
  int seeds_per_axis = 16;
  double tol = 1e-10;
  double grad_tol = 1e-8;
  int boundary_samples = 400;
};

struct RatesConfig {
  std::vector<double> h{0.5, 0.4, 0.35, 0.3, 0.25};
};

struct SpectralConfig {
  std::vector<double> delta{0.01};
  double tol = 1e-12;
  int max_iters = 200;
  double threshold_factor = 0.1;  // small-eigenvalue threshold = factor * h
  bool dump_field = false;
};

struct MixedConfig {
  bool enabled = false;
  std::vector<double> lower{-0.6, -0.6};
  std::vector<double> upper{1.0, 0.6};
  std::string face = "x+";
  double delta = 0.005;
  std::vector<double> h{0.25, 0.35};
};

struct LangevinConfig {
  double h = 0.5;
  double dt = 1e-3;
  std::size_t n = 2000;
  double burn_in = -1.0;  // negative selects 20 / (smallest Hessian eigenvalue at the minimum)
  long max_steps = 100'000'000;
  int noise_refinement = 1;
  bool boundary_shift = true;
  unsigned workers = 1;
  std::vector<double> start;  // empty selects the minimum
};

struct KmcConfig {
  double h = 0.5;
  std::size_t n = 10000;
};

struct AgmonConfig {
  double delta = 0.01;
  std::string sources = "saddles";  // "saddles", "minimum" or "x y; x y; ..."
  int pairs = 1000;
};

struct OutputConfig {
  std::string dir = "out";
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::vector<std::string> stages{"critical", "agmon", "rates", "spectral", "langevin", "kmc"};
  PotentialConfig potential;
  DomainConfig domain;
  CriticalConfig critical;
  RatesConfig rates;
  SpectralConfig spectral;
  MixedConfig mixed;
  LangevinConfig langevin;
  KmcConfig kmc;
  AgmonConfig agmon;
  OutputConfig output;
  std::filesystem::path base_dir = ".";

  bool stage_enabled(const std::string& s) const {
    return std::find(stages.begin(), stages.end(), s) != stages.end();
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& s) {
  std::size_t cut = std::string::npos;
  for (const char* mark : {" ;", " #", "\t;", "\t#"}) cut = std::min(cut, s.find(mark));
  return trim(cut == std::string::npos ? s : s.substr(0, cut));
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& tok : split(v, " ,\t")) out.push_back(parse_double(key, tok));
  return out;
}

// Shortest text that reads back to the same double.
inline std::string fmt(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? " " : "") + fmt(xs[i]);
  return out;
}

inline Vec to_vec(const std::vector<double>& xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

// "coef:p1,p2,p3" separated by whitespace or ';'.
inline std::vector<Monomial> parse_terms(const std::string& key, const std::string& v, int dim) {
  std::vector<Monomial> terms;
  for (const auto& tok : split(v, " ;\t")) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) throw ConfigError(key + ": term '" + tok + "' lacks ':'");
    Monomial m;
    m.coef = parse_double(key, tok.substr(0, colon));
    const auto pw = split(tok.substr(colon + 1), ",");
    if (static_cast<int>(pw.size()) != dim)
      throw ConfigError(key + ": term '" + tok + "' needs " + std::to_string(dim) + " powers");
    for (int k = 0; k < dim; ++k) m.powers[k] = static_cast<int>(parse_long(key, pw[k]));
    terms.push_back(m);
  }
  return terms;
}

inline std::string format_terms(const std::vector<Monomial>& terms, int dim) {
  std::string s;
  for (const auto& t : terms) {
    if (!s.empty()) s += " ";
    s += fmt(t.coef) + ":";
    for (int k = 0; k < dim; ++k) s += (k ? "," : "") + std::to_string(t.powers[k]);
  }
  return s;
}

}  // namespace detail

/// Reads a tabulated potential: CSV rows x[,y],f covering a full rectilinear
/// grid in any order; a non-numeric first line is taken as a header.
inline Tabulated read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open potential table " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = detail::split(line, ",");
    std::vector<double> row;
    try {
      for (const auto& c : cols) row.push_back(std::stod(c));
    } catch (const std::exception&) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("potential table: bad row '" + line + "'");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("potential table: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("potential table is empty");
  const std::size_t d = rows.front().size() - 1;
  if (d < 1 || d > 2) throw ConfigError("potential table needs 2 or 3 columns");
  std::vector<std::vector<double>> axes(d);
  for (std::size_t a = 0; a < d; ++a) {
    std::set<double> u;
    for (const auto& r : rows) u.insert(r[a]);
    axes[a].assign(u.begin(), u.end());
  }
  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.size();
  if (total != rows.size()) throw ConfigError("potential table does not cover a full grid");
  std::vector<double> values(total, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < d; ++a) {
      const auto it = std::lower_bound(axes[a].begin(), axes[a].end(), r[a]);
      idx = idx * axes[a].size() + static_cast<std::size_t>(it - axes[a].begin());
    }
    values[idx] = r[d];
  }
  for (double v : values)
    if (std::isnan(v)) throw ConfigError("potential table has duplicate grid points");
  try {
    return Tabulated(std::move(axes), std::move(values));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("potential table: ") + e.what());
  }
}

/// Builds the landscape named by the configuration.
inline Potential make_potential(const ExperimentConfig& cfg) {
  const auto& pc = cfg.potential;
  Potential p = [&] {
    if (pc.family == "cosine_lattice") return Potential::cosine_lattice(pc.c);
    if (pc.family == "polynomial") return Potential::polynomial({pc.dim, pc.terms});
    if (pc.family == "external") {
      std::filesystem::path path = pc.table;
      if (path.is_relative()) path = cfg.base_dir / path;
      return Potential::external(read_table(path));
    }
    throw ConfigError("unknown potential family '" + pc.family + "'");
  }();
  if (!pc.tilt.empty()) p = p.with_tilt(detail::to_vec(pc.tilt));
  return p;
}

inline Box make_box(const DomainConfig& dc) {
  return Box(detail::to_vec(dc.lower), detail::to_vec(dc.upper));
}

/// Semantic checks that do not need any computation.
inline void validate(const ExperimentConfig& c) {
  static const std::set<std::string> kStages{"critical", "agmon",    "rates", "spectral",
                                             "mixed",    "langevin", "kmc"};
  static const std::set<std::string> kFamilies{"cosine_lattice", "polynomial", "external"};
  for (const auto& s : c.stages)
    if (!kStages.count(s)) throw ConfigError("run.stages: unknown stage '" + s + "'");
  if (!kFamilies.count(c.potential.family))
    throw ConfigError("potential.family: unknown family '" + c.potential.family + "'");
  if (c.potential.family == "cosine_lattice" && !(c.potential.c > 0.0))
    throw ConfigError("potential.c must be positive");
  if (c.potential.family == "polynomial" && (c.potential.dim < 1 || c.potential.dim > kMaxDim))
    throw ConfigError("potential.dim must be in [1, 3]");
  if (c.potential.family == "external" && c.potential.table.empty())
    throw ConfigError("potential.table is required for the external family");
  const std::size_t d = c.domain.lower.size();
  if (d < 1 || d > kMaxDim || c.domain.upper.size() != d)
    throw ConfigError("domain.lower and domain.upper need matching dimension in [1, 3]");
  if (!c.potential.tilt.empty() && c.potential.tilt.size() != d)
    throw ConfigError("potential.tilt dimension mismatch");
  for (std::size_t a = 0; a < d; ++a)
    if (!(c.domain.upper[a] > c.domain.lower[a]))
      throw ConfigError("domain.upper must exceed domain.lower");
  if (c.domain.rho < 0.0) throw ConfigError("domain.rho must be >= 0");
  for (const auto& p : c.domain.patches)
    if (p.center.size() != static_cast<Eigen::Index>(d) || p.face.axis >= static_cast<int>(d))
      throw ConfigError("patch '" + p.label + "' dimension mismatch");
  for (const auto& g : c.domain.gammas) {
    bool found = false;
    for (const auto& p : c.domain.patches) found = found || p.label == g.label;
    if (!found) throw ConfigError("gamma '" + g.label + "' does not name a declared patch");
  }
  auto positive = [](const std::string& key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key + " must be positive");
  };
  for (double h : c.rates.h) positive("rates.h", h);
  for (double dl : c.spectral.delta) positive("spectral.delta", dl);
  positive("spectral.tol", c.spectral.tol);
  positive("spectral.threshold_factor", c.spectral.threshold_factor);
  if (c.spectral.max_iters < 1) throw ConfigError("spectral.max_iters must be >= 1");
  positive("langevin.h", c.langevin.h);
  positive("langevin.dt", c.langevin.dt);
  if (c.langevin.n < 100) throw ConfigError("langevin.n must be >= 100");
  if (c.langevin.noise_refinement < 1) throw ConfigError("langevin.noise_refinement must be >= 1");
  if (c.langevin.workers < 1) throw ConfigError("langevin.workers must be >= 1");
  if (!c.langevin.start.empty() && c.langevin.start.size() != d)
    throw ConfigError("langevin.start dimension mismatch");
  positive("kmc.h", c.kmc.h);
  if (c.kmc.n < 1) throw ConfigError("kmc.n must be >= 1");
  positive("agmon.delta", c.agmon.delta);
  if (c.agmon.pairs < 100) throw ConfigError("agmon.pairs must be >= 100");
  positive("mixed.delta", c.mixed.delta);
  for (double h : c.mixed.h) positive("mixed.h", h);
  Face::parse(c.mixed.face);
  if (c.rates.h.empty() && (c.stage_enabled("rates") || c.stage_enabled("spectral")))
    throw ConfigError("rates.h must list at least one temperature");
  if (c.spectral.delta.empty() && c.stage_enabled("spectral"))
    throw ConfigError("spectral.delta must list at least one spacing");
}

inline ExperimentConfig parse_config(std::istream& in,
                                     const std::filesystem::path& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.mixed.enabled = false;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  std::map<std::string, std::map<std::string, Setter>> keys;
  auto num = [](double& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_double(k, v); };
  };
  auto list = [](std::vector<double>& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_list(k, v); };
  };
  auto flag = [](bool& dst) {
    return [&dst](const std::string& k, const std::string& v) { dst = detail::parse_bool(k, v); };
  };
  auto str = [](std::string& dst) {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };
  auto integer = [](auto& dst) {
    return [&dst](const std::string& k, const std::string& v) {
      const long x = detail::parse_long(k, v);
      if (x < 0) throw ConfigError(k + " must be >= 0");
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(x);
    };
  };
  std::string terms_text;
  keys["run"] = {{"seed", integer(c.seed)},
                 {"stages", [&](const std::string&, const std::string& v) {
                    c.stages = detail::split(v, " ,\t");
                  }}};
  keys["potential"] = {{"family", str(c.potential.family)},
                       {"c", num(c.potential.c)},
                       {"dim", integer(c.potential.dim)},
                       {"terms", str(terms_text)},
                       {"table", str(c.potential.table)},
                       {"tilt", list(c.potential.tilt)}};
  keys["domain"] = {{"lower", list(c.domain.lower)},
                    {"upper", list(c.domain.upper)},
                    {"rho", num(c.domain.rho)},
                    {"auto_patches", flag(c.domain.auto_patches)}};
  keys["critical"] = {{"seeds_per_axis", integer(c.critical.seeds_per_axis)},
                      {"tol", num(c.critical.tol)},
                      {"grad_tol", num(c.critical.grad_tol)},
                      {"boundary_samples", integer(c.critical.boundary_samples)}};
  keys["rates"] = {{"h", list(c.rates.h)}};
  keys["spectral"] = {{"delta", list(c.spectral.delta)},
                      {"tol", num(c.spectral.tol)},
                      {"max_iters", integer(c.spectral.max_iters)},
                      {"threshold_factor", num(c.spectral.threshold_factor)},
                      {"dump_field", flag(c.spectral.dump_field)}};
  keys["mixed"] = {{"lower", list(c.mixed.lower)},
                   {"upper", list(c.mixed.upper)},
                   {"face", str(c.mixed.face)},
                   {"delta", num(c.mixed.delta)},
                   {"h", list(c.mixed.h)}};
  keys["langevin"] = {{"h", num(c.langevin.h)},
                      {"dt", num(c.langevin.dt)},
                      {"n", integer(c.langevin.n)},
                      {"burn_in", num(c.langevin.burn_in)},
                      {"max_steps", integer(c.langevin.max_steps)},
                      {"noise_refinement", integer(c.langevin.noise_refinement)},
                      {"boundary_shift", flag(c.langevin.boundary_shift)},
                      {"workers", integer(c.langevin.workers)},
                      {"start", list(c.langevin.start)}};
  keys["kmc"] = {{"h", num(c.kmc.h)}, {"n", integer(c.kmc.n)}};
  keys["agmon"] = {{"delta", num(c.agmon.delta)},
                   {"sources", str(c.agmon.sources)},
                   {"pairs", integer(c.agmon.pairs)}};
  keys["output"] = {{"dir", str(c.output.dir)}};

  std::vector<std::pair<std::string, std::string>> patch_lines, gamma_lines;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' outside of a section");
    auto it = keys.find(section);
    if (it == keys.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      const std::string value = detail::strip_comment(node.data());
      const std::string full = section + "." + key;
      if (section == "domain" && key.rfind("patch_", 0) == 0) {
        patch_lines.emplace_back(key.substr(6), value);
        continue;
      }
      if (section == "domain" && key.rfind("gamma_", 0) == 0) {
        gamma_lines.emplace_back(key.substr(6), value);
        continue;
      }
      auto kt = it->second.find(key);
      if (kt == it->second.end()) throw ConfigError("unknown key " + full);
      kt->second(full, value);
    }
    if (section == "mixed") c.mixed.enabled = true;
  }
  if (!terms_text.empty())
    c.potential.terms = detail::parse_terms("potential.terms", terms_text, c.potential.dim);

  const int d = static_cast<int>(c.domain.lower.size());
  for (const auto& [label, value] : patch_lines) {
    // face c_1 .. c_d radius
    const auto tok = detail::split(value, " \t");
    if (static_cast<int>(tok.size()) != d + 2)
      throw ConfigError("domain.patch_" + label + ": expected 'face c1 .. cd radius'");
    SigmaPatch p;
    p.label = label;
    try {
      p.face = Face::parse(tok[0]);
    } catch (const InvalidArgument& e) {
      throw ConfigError("domain.patch_" + label + ": " + e.what());
    }
    p.center.resize(d);
    for (int a = 0; a < d; ++a) p.center[a] = detail::parse_double("domain.patch_" + label, tok[a + 1]);
    p.radius = detail::parse_double("domain.patch_" + label, tok[d + 1]);
    c.domain.patches.push_back(p);
  }
  for (const auto& [label, value] : gamma_lines) {
    // face lo_1 .. lo_d hi_1 .. hi_d  (closed rectangle on the face)
    const auto tok = detail::split(value, " \t");
    if (static_cast<int>(tok.size()) != 2 * d + 1)
      throw ConfigError("domain.gamma_" + label + ": expected 'face lo1 .. lod hi1 .. hid'");
    GammaPatch g;
    g.label = label;
    g.face = Face::parse(tok[0]);
    g.lower.resize(d);
    g.upper.resize(d);
    for (int a = 0; a < d; ++a) {
      g.lower[a] = detail::parse_double("domain.gamma_" + label, tok[1 + a]);
      g.upper[a] = detail::parse_double("domain.gamma_" + label, tok[1 + d + a]);
    }
    g.open = false;
    c.domain.gammas.push_back(g);
  }
  if (c.mixed.enabled && !c.stage_enabled("mixed")) c.stages.push_back("mixed");
  if (c.stage_enabled("mixed")) c.mixed.enabled = true;
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path().empty() ? "." : path.parent_path());
}

/// The configuration with every default spelled out; parses back to itself.
inline std::string render_config(const ExperimentConfig& c) {
  using detail::fmt;
  using detail::join;
  std::ostringstream os;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[run]\nseed = " << c.seed << "\nstages =";
  for (const auto& s : c.stages)
    if (s != "mixed") os << " " << s;
  os << "\n\n[potential]\nfamily = " << c.potential.family << "\nc = " << fmt(c.potential.c)
     << "\ndim = " << c.potential.dim
     << "\nterms = " << detail::format_terms(c.potential.terms, c.potential.dim)
     << "\ntable = " << c.potential.table << "\ntilt = " << join(c.potential.tilt)
     << "\n\n[domain]\nlower = " << join(c.domain.lower) << "\nupper = " << join(c.domain.upper)
     << "\nrho = " << fmt(c.domain.rho) << "\nauto_patches = " << b(c.domain.auto_patches) << "\n";
  for (const auto& p : c.domain.patches) {
    os << "patch_" << p.label << " = " << p.face.name();
    for (Eigen::Index a = 0; a < p.center.size(); ++a) os << " " << fmt(p.center[a]);
    os << " " << fmt(p.radius) << "\n";
  }
  for (const auto& g : c.domain.gammas) {
    os << "gamma_" << g.label << " = " << g.face.name();
    for (Eigen::Index a = 0; a < g.lower.size(); ++a) os << " " << fmt(g.lower[a]);
    for (Eigen::Index a = 0; a < g.upper.size(); ++a) os << " " << fmt(g.upper[a]);
    os << "\n";
  }
  os << "\n[critical]\nseeds_per_axis = " << c.critical.seeds_per_axis
     << "\ntol = " << fmt(c.critical.tol) << "\ngrad_tol = " << fmt(c.critical.grad_tol)
     << "\nboundary_samples = " << c.critical.boundary_samples << "\n\n[rates]\nh = "
     << join(c.rates.h) << "\n\n[spectral]\ndelta = " << join(c.spectral.delta)
     << "\ntol = " << fmt(c.spectral.tol) << "\nmax_iters = " << c.spectral.max_iters
     << "\nthreshold_factor = " << fmt(c.spectral.threshold_factor)
     << "\ndump_field = " << b(c.spectral.dump_field) << "\n";
  if (c.mixed.enabled) {
    os << "\n[mixed]\nlower = " << join(c.mixed.lower) << "\nupper = " << join(c.mixed.upper)
       << "\nface = " << c.mixed.face << "\ndelta = " << fmt(c.mixed.delta)
       << "\nh = " << join(c.mixed.h) << "\n";
  }
  os << "\n[langevin]\nh = " << fmt(c.langevin.h) << "\ndt = " << fmt(c.langevin.dt)
     << "\nn = " << c.langevin.n << "\nburn_in = " << fmt(c.langevin.burn_in)
     << "\nmax_steps = " << c.langevin.max_steps
     << "\nnoise_refinement = " << c.langevin.noise_refinement
     << "\nboundary_shift = " << b(c.langevin.boundary_shift)
     << "\nworkers = " << c.langevin.workers << "\nstart = " << join(c.langevin.start)
     << "\n\n[kmc]\nh = " << fmt(c.kmc.h) << "\nn = " << c.kmc.n << "\n\n[agmon]\ndelta = "
     << fmt(c.agmon.delta) << "\nsources = " << c.agmon.sources << "\npairs = " << c.agmon.pairs
     << "\n\n[output]\ndir = " << c.output.dir << "\n";
  return os.str();
}

}  // namespace kexit
