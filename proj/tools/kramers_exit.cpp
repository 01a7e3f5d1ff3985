// kramers-exit: command-line front end to the exit-rate library.

#include <kexit/harness.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace kexit;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  validate(c);
  return c;
}

std::filesystem::path out_dir(const Common& o, const ExperimentConfig& c) {
  return o.out.empty() ? std::filesystem::path(c.output.dir) : std::filesystem::path(o.out);
}

void print_assertions(const Report& rep) {
  for (const auto& a : rep.assertions)
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name
              << (a.detail.empty() ? "" : " (" + a.detail + ")") << "\n";
}

// Runs the given stages and writes <name>.json. Returns the process exit code.
int run_stages(const Common& o, const std::string& name,
               const std::function<void(ExperimentConfig&)>& select) {
  ExperimentConfig c = load(o);
  select(c);
  const auto dir = out_dir(o, c);
  json partial;
  try {
    Report rep = run(c, &partial, dir);
    write_json(rep.doc, dir / (name + ".json"));
    print_assertions(rep);
    std::cout << "wrote " << (dir / (name + ".json")).string() << "\n";
    return rep.passed() ? 0 : 1;
  } catch (const StageError& e) {
    std::filesystem::create_directories(dir);
    partial["error"] = e.what();
    write_json(partial, dir / (name + ".partial.json"));
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eyring-Kramers exit rates, kinetic Monte Carlo, spectral and Langevin checks"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  std::string print_from;
  app.add_flag("--print-config", print_config, "print the configuration with all defaults and exit");
  app.add_option("--config", print_from, "configuration to print with --print-config");

  Common o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "configuration file")->required();
    sub->add_option("--out", o.out, "output directory (default: output.dir)");
    sub->add_option("--seed", o.seed, "top-level seed, overrides run.seed");
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"critical", "critical points, saddle table, generalized counts, assumptions"},
           {"rates", "harmonic exit rates and probabilities for each h"},
           {"agmon", "Agmon distance fields, hypothesis checks, metric properties"},
           {"kmc", "kinetic Monte Carlo exit events"},
           {"simulate", "Langevin exit campaign with comparison columns"},
           {"spectrum", "principal eigenpair, exit rates and fluxes of the discrete generator"},
           {"verify", "all configured stages and their assertions"},
           {"sweep", "convergence table along h, delta or dt"}}) {
    subs[name] = app.add_subcommand(name, help);
    add_common(subs[name]);
  }
  std::string axis = "h";
  std::vector<double> values;
  subs["sweep"]->add_option("--axis", axis, "h, delta or dt")->check(CLI::IsMember({"h", "delta", "dt"}));
  subs["sweep"]->add_option("--values", values, "values (default: from the configuration)")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_config) {
      ExperimentConfig c = print_from.empty() ? ExperimentConfig{} : load_config(print_from);
      std::cout << render_config(c);
      return 0;
    }
    auto only = [](std::vector<std::string> stages) {
      return [stages](ExperimentConfig& c) {
        std::vector<std::string> keep;
        for (const auto& s : stages)
          if (s != "mixed" || c.mixed.enabled) keep.push_back(s);
        c.stages = keep;
      };
    };
    if (subs["critical"]->parsed()) return run_stages(o, "critical", only({"critical"}));
    if (subs["rates"]->parsed()) return run_stages(o, "rates", only({"rates"}));
    if (subs["agmon"]->parsed()) return run_stages(o, "agmon", only({"agmon"}));
    if (subs["kmc"]->parsed()) return run_stages(o, "kmc", only({"kmc"}));
    if (subs["simulate"]->parsed())
      return run_stages(o, "simulate", [](ExperimentConfig& c) {
        c.rates.h = {c.langevin.h};
        c.spectral.delta.resize(1);
        c.stages = {"rates", "spectral", "langevin"};
      });
    if (subs["spectrum"]->parsed()) return run_stages(o, "spectrum", only({"rates", "spectral", "mixed"}));
    if (subs["verify"]->parsed()) return run_stages(o, "verify", [](ExperimentConfig&) {});
    if (subs["sweep"]->parsed()) {
      ExperimentConfig c = load(o);
      const SweepAxis ax = parse_axis(axis);
      if (values.empty()) {
        values = ax == SweepAxis::H       ? c.rates.h
                 : ax == SweepAxis::Delta ? c.spectral.delta
                                          : std::vector<double>{c.langevin.dt, 0.5 * c.langevin.dt};
      }
      const auto dir = out_dir(o, c);
      std::filesystem::create_directories(dir);
      const auto res = sweep(c, ax, values);
      write_table_csv(res.header, res.rows, dir / ("sweep_" + axis + ".csv"));
      write_json(res.doc, dir / ("sweep_" + axis + ".json"));
      for (const auto& row : res.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
          std::cout << (i ? "," : "") << res.header[i] << "=" << row[i];
        std::cout << "\n";
      }
      if (res.doc.contains("slope"))
        std::cout << "slope=" << res.doc["slope"]["value"] << " expected="
                  << res.doc["slope_ek"]["value"] << "\n";
      return 0;
    }
    std::cout << app.help();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
