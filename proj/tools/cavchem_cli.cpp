#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "cavchem/errors.hpp"
#include "cavchem/runner.hpp"

using nlohmann::json;

namespace {

json range_json(const std::string& text, bool integers = false) {
  json a = json::array();
  for (double v : cavchem::parse_range(text)) {
    if (integers) a.push_back(static_cast<long long>(std::llround(v)));
    else a.push_back(v);
  }
  return a;
}

const char* describe(const std::string& name) {
  if (name == "bo-scan") return "electronic surfaces, dipoles, polarizability and vibrational levels";
  if (name == "quantum-rate") return "exact flux-flux thermal rate at one coupling and temperature";
  if (name == "arrhenius") return "rates over the temperature list and Arrhenius fits per coupling";
  if (name == "rate-vs-frequency") return "on/off cavity rate ratio across cavity frequencies";
  if (name == "cboa") return "cavity Born-Oppenheimer surface, minimum path and critical points";
  if (name == "barriers") return "quantum and CBOA barrier and rate ratios per coupling";
  if (name == "pert") return "second-order barrier change against the exact CBOA change";
  if (name == "scan-analyze") return "cavity-modified barriers of a tabulated reaction scan";
  if (name == "npom-sweep") return "nanoparticle-on-mirror image energies and effective couplings per gap";
  if (name == "collective") return "ensemble energies and barrier shifts around a nanosphere";
  return "regenerate the data behind a figure id";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity-modified ground-state chemistry: Shin-Metiu rates, CBOA surfaces, nanocavity electrostatics"};
  app.require_subcommand(0, 1);

  cavchem::RunOverrides ov;
  std::string config_path, out_dir, cache_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "JSON run configuration (strict schema)");
  app.add_option("--seed", seed, "base random seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--cache-dir", cache_dir, "eigen-data cache directory (empty disables)");
  app.add_option("--set", sets, "override a config value: dotted.key=json");
  bool print_defaults = false;
  app.add_flag("--print-default-config", print_defaults, "print the default configuration and exit");

  json user = json::object();
  std::vector<std::string> positional;
  std::string lambdas, omega_ratios, temperatures, gaps, dipole_source, n_list, shell, scan_path;
  double lambda = NAN, omega_ratio = NAN, T = NAN, radius = NAN, sphere = NAN, height = NAN;
  int seeds = 0;

  for (const auto& name : cavchem::subcommands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->fallthrough();
    if (name == "reproduce") {
      sub->add_option("figure", positional, "figure id: fig1 fig2 fig3c fig4 fig5 fig6 fig7 fig8")->required();
    }
    if (name == "scan-analyze") sub->add_option("scan", scan_path, "scan CSV");
    if (name == "quantum-rate" || name == "cboa") {
      sub->add_option("--lambda", lambda, "coupling strength (a.u.)");
      sub->add_option("--omega-ratio", omega_ratio, "cavity frequency in units of the vibrational frequency");
    }
    if (name == "arrhenius" || name == "rate-vs-frequency" || name == "barriers" || name == "pert")
      sub->add_option("--lambdas", lambdas, "coupling list or range");
    if (name == "scan-analyze") sub->add_option("--lambdas", lambdas, "coupling list or range");
    if (name == "rate-vs-frequency") sub->add_option("--omega-ratios", omega_ratios, "frequency ratios, list or range");
    if (name == "arrhenius") sub->add_option("--temperatures", temperatures, "temperatures (K), list or range");
    if (name == "quantum-rate" || name == "rate-vs-frequency" || name == "barriers") sub->add_option("--T", T, "temperature (K)");
    if (name == "npom-sweep") {
      sub->add_option("--radius-nm", radius, "sphere radius (nm)");
      sub->add_option("--gaps-nm", gaps, "gap list or range (nm)");
      sub->add_option("--dipole-source", dipole_source, "electronic-structure table providing the dipoles");
      sub->add_option("--height-fraction", height, "molecule height above the mirror as a fraction of the gap");
    }
    if (name == "collective") {
      sub->add_option("--n", n_list, "molecule counts, list or range (e.g. 100:6000:log)");
      sub->add_option("--seeds", seeds, "number of realizations");
      sub->add_option("--sphere-nm", sphere, "sphere diameter (nm)");
      sub->add_option("--shell-nm", shell, "inner:outer distance from the sphere surface (nm)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (print_defaults) {
    std::cout << cavchem::default_config().dump(2) << "\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << "a subcommand is required; run with --help for the list\n";
    return 2;
  }

  try {
    if (!std::isnan(lambda)) user["cavity"]["lambda"] = lambda;
    if (!std::isnan(omega_ratio)) user["cavity"]["omega_ratio"] = omega_ratio;
    if (!std::isnan(T)) user["rates"]["T"] = T;
    const auto* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    if (!lambdas.empty()) {
      if (name == "scan-analyze") user["scan"]["lambdas"] = range_json(lambdas);
      else user["sweep"]["lambdas"] = range_json(lambdas);
    }
    if (!omega_ratios.empty()) user["sweep"]["omega_ratios"] = range_json(omega_ratios);
    if (!temperatures.empty()) user["rates"]["temperatures"] = range_json(temperatures);
    if (!std::isnan(radius)) user["npom"]["radius_nm"] = radius;
    if (!gaps.empty()) user["npom"]["gaps_nm"] = range_json(gaps);
    if (!dipole_source.empty()) user["npom"]["dipole_source"] = dipole_source;
    if (!std::isnan(height)) user["npom"]["height_fraction"] = height;
    if (!n_list.empty()) user["collective"]["N"] = range_json(n_list, true);
    if (seeds > 0) user["collective"]["seeds"] = seeds;
    if (!std::isnan(sphere)) user["collective"]["sphere_diameter_nm"] = sphere;
    if (!shell.empty()) {
      const auto v = cavchem::parse_range(shell.find(':') == std::string::npos ? shell : shell.substr(0, shell.find(':')) + "," + shell.substr(shell.find(':') + 1));
      if (v.size() != 2) throw cavchem::ValidationError("--shell-nm expects inner:outer");
      user["collective"]["shell_nm"] = v;
    }
    if (!scan_path.empty()) positional.push_back(scan_path);

    if (!config_path.empty()) ov.config_path = config_path;
    if (app.count("--seed")) ov.seed = seed;
    if (app.count("--threads")) ov.threads = threads;
    if (!out_dir.empty()) ov.out_dir = out_dir;
    if (app.count("--cache-dir")) ov.cache_dir = cache_dir;
    ov.set = sets;
    return cavchem::run(name, positional, user, ov);
  } catch (const cavchem::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  }
}
