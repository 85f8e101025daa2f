#include "cavchem/runner.hpp"

#include <zlib.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cavchem/collective.hpp"
#include "cavchem/npom.hpp"
#include "cavchem/numerics.hpp"
#include "cavchem/parallel.hpp"
#include "cavchem/perturbation.hpp"
#include "cavchem/scan.hpp"
#include "cavchem/table_io.hpp"
#include "cavchem/units.hpp"

namespace cavchem {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  const auto temps = default_temperatures();
  std::vector<double> ratios;
  for (int i = 0; i < 13; ++i) ratios.push_back(0.2 * std::pow(25.0, i / 12.0));
  std::vector<double> gaps;
  for (int i = 0; i <= 45; ++i) gaps.push_back(0.5 + 0.1 * i);
  return {
      {"model", to_json(ShinMetiuParams{})},
      {"grids", {{"x", to_json(default_electron_grid)}, {"R", to_json(default_nuclear_grid)}}},
      {"electronic_states", default_electronic_states},
      {"table", {{"path", ""}}},
      {"basis", {{"n_electronic", 3}, {"e_cut", nullptr}, {"e_cut_margin", 10.0 * nominal_omega_nu},
                 {"max_dimension", default_max_dimension}}},
      {"cavity", {{"omega_c", nullptr}, {"omega_ratio", 1.0}, {"lambda", 0.0}, {"n_fock", nullptr},
                  {"dipole_self_energy", false}}},
      {"rates", {{"T", 300.0}, {"temperatures", temps}, {"t_f_fs", 35.0}, {"t_max_fs", 50.0}, {"dt_fs", 0.25},
                 {"flux_form", "commutator"}, {"discard_tolerance", 1e-6}, {"window_kT", 50.0}}},
      {"sweep", {{"lambdas", {0.0, 0.01, 0.02, 0.035}}, {"omega_ratios", ratios}, {"n_fock_min", 8},
                 {"fock_window_kT", 16.0}}},
      {"cboa", {{"n_q", 64}, {"n_states", default_electronic_states}, {"branch", "connected"}, {"h_R", 1e-3},
                {"h_q_scale", 1e-3}}},
      {"scan", {{"path", ""}, {"lambdas", {0.01, 0.05}}, {"axis", 2}, {"T", 300.0}, {"omega_c", nullptr}}},
      {"npom", {{"radius_nm", 20.0}, {"gaps_nm", gaps}, {"height_fraction", 0.5}, {"tol", 1e-10},
                {"max_images", 10000}, {"dipole_source", ""}}},
      {"collective", {{"N", {100, 200, 500, 1000, 2000, 3000, 4000, 5000, 6000}}, {"seeds", 10},
                      {"sphere_diameter_nm", 8.0}, {"shell_nm", {1.0, 16.0}}, {"min_dist_nm", 1.5},
                      {"orientation", "aligned"}, {"omega0_eV", 3.0}, {"T", 300.0}}},
      {"seed", 0},
      {"threads", 1},
      {"out_dir", "out"},
      {"cache_dir", ""},
  };
}

namespace {

const char* type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

void overlay(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ValidationError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ValidationError("config: unknown key '" + p + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, p);
      continue;
    }
    const bool nullable = slot.is_null();
    const bool ok = (nullable && (value.is_null() || value.is_number())) ||
                    (slot.is_number() && value.is_number()) || (slot.is_boolean() && value.is_boolean()) ||
                    (slot.is_string() && value.is_string()) || (slot.is_array() && value.is_array());
    if (!ok)
      throw ValidationError("config: '" + p + "' expects " + (nullable ? "number or null" : type_name(slot)) +
                            ", got " + type_name(value));
    if (slot.is_number_integer() && !value.is_number_integer())
      throw ValidationError("config: '" + p + "' expects an integer");
    slot = value;
  }
}

}  // namespace

json resolve_config(const json& user) {
  json base = default_config();
  if (!user.is_null()) overlay(base, user, "");
  return base;
}

std::string config_hash(const json& resolved) {
  json j = resolved;
  for (const char* k : {"threads", "out_dir", "cache_dir"}) j.erase(k);
  return content_hash(j);
}

std::vector<double> parse_range(const std::string& text) {
  auto num = [&](const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw ValidationError("range: malformed number '" + s + "' in '" + text + "'");
    return v;
  };
  std::vector<double> out;
  if (text.find(':') == std::string::npos) {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(num(tok));
  } else {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts.size() < 3 || parts.size() > 4) throw ValidationError("range: expected a:b:step or a:b:log[:n], got '" + text + "'");
    const double a = num(parts[0]), b = num(parts[1]);
    if (parts[2] == "log") {
      const int n = parts.size() == 4 ? static_cast<int>(num(parts[3])) : 10;
      if (!(a > 0.0) || !(b > a) || n < 2) throw ValidationError("range: log range needs 0 < a < b and n >= 2");
      for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, static_cast<double>(i) / (n - 1)));
    } else {
      if (parts.size() != 3) throw ValidationError("range: linear range takes exactly a:b:step");
      const double step = num(parts[2]);
      if (!(step > 0.0) || b < a) throw ValidationError("range: need step > 0 and b >= a");
      const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
      for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    }
  }
  if (out.empty()) throw ValidationError("range: '" + text + "' is empty");
  return out;
}

Workspace::Workspace(json resolved)
    : config_(std::move(resolved)), hash_(config_hash(config_)), cache_(config_.at("cache_dir").get<std::string>()) {}

int Workspace::threads() const { return std::max(1, config_.at("threads").get<int>()); }

ShinMetiuParams Workspace::params() const { return params_from_json(config_.at("model")); }
GridSpec Workspace::x_grid() const { return grid_from_json(config_.at("grids").at("x")); }
GridSpec Workspace::R_grid() const { return grid_from_json(config_.at("grids").at("R")); }

MolecularBasisOptions Workspace::basis_options() const {
  const auto& b = config_.at("basis");
  MolecularBasisOptions o;
  o.n_electronic = b.at("n_electronic").get<int>();
  if (!b.at("e_cut").is_null()) o.e_cut = b.at("e_cut").get<double>();
  o.e_cut_margin = b.at("e_cut_margin").get<double>();
  o.threads = threads();
  return o;
}

RateOptions Workspace::rate_options() const {
  const auto& r = config_.at("rates");
  RateOptions o;
  o.t_f = units::from_fs(r.at("t_f_fs").get<double>());
  o.t_max = units::from_fs(r.at("t_max_fs").get<double>());
  o.dt = units::from_fs(r.at("dt_fs").get<double>());
  const auto form = r.at("flux_form").get<std::string>();
  if (form == "commutator") o.form = FluxForm::commutator;
  else if (form == "symmetrized_delta") o.form = FluxForm::symmetrized_delta;
  else throw ValidationError("config: rates.flux_form must be 'commutator' or 'symmetrized_delta'");
  o.discard_tolerance = r.at("discard_tolerance").get<double>();
  o.window_kT = r.at("window_kT").get<double>();
  if (!(o.dt > 0.0) || !(o.t_f > 0.0) || o.t_max < o.t_f) throw ValidationError("config: need dt > 0 and 0 < t_f <= t_max");
  return o;
}

NewtonOptions Workspace::newton_options() const {
  NewtonOptions o;
  o.h_R = config_.at("cboa").at("h_R").get<double>();
  o.h_q_scale = config_.at("cboa").at("h_q_scale").get<double>();
  return o;
}

const ElectronicStructureTable& Workspace::table() {
  if (table_) return *table_;
  const auto path = config_.at("table").at("path").get<std::string>();
  if (!path.empty()) {
    table_ = load_table(path);
    return *table_;
  }
  const int n = config_.at("electronic_states").get<int>();
  const json key = {{"kind", "table"}, {"params", to_json(params())}, {"x_grid", to_json(x_grid())},
                    {"R_grid", to_json(R_grid())}, {"n_states", n}};
  const auto dir = config_.at("cache_dir").get<std::string>();
  const fs::path file = dir.empty() ? fs::path() : fs::path(dir) / ("table-" + content_hash(key) + ".csv");
  if (!dir.empty() && fs::exists(file)) {
    table_ = load_table(file.string());
    return *table_;
  }
  table_ = bo_scan(params(), x_grid(), R_grid(), n, threads());
  if (!dir.empty()) {
    fs::create_directories(dir);
    const auto tmp = file.string() + ".tmp";
    save_table(*table_, tmp);
    fs::rename(tmp, file);
  }
  return *table_;
}

std::shared_ptr<const MolecularBasis> Workspace::basis() {
  if (basis_) return basis_;
  const auto opts = basis_options();
  const auto key = basis_key(params(), x_grid(), R_grid(), opts);
  if (auto b = cache_.load_basis(key)) {
    basis_ = std::make_shared<const MolecularBasis>(std::move(*b));
    return basis_;
  }
  auto b = std::make_shared<const MolecularBasis>(molecular_eigenbasis(params(), x_grid(), R_grid(), opts));
  cache_.store_basis(key, *b);
  basis_ = b;
  return basis_;
}

double Workspace::omega_nu() {
  if (!omega_nu_) omega_nu_ = harmonic_fit(table(), params().M, Well::left).omega_nu;
  return *omega_nu_;
}

CavityMode Workspace::cavity_mode(std::optional<double> lambda, std::optional<double> omega_c) {
  const auto& c = config_.at("cavity");
  CavityMode m;
  if (omega_c) m.omega_c = *omega_c;
  else if (!c.at("omega_c").is_null()) m.omega_c = c.at("omega_c").get<double>();
  else m.omega_c = c.at("omega_ratio").get<double>() * omega_nu();
  m.lambda = lambda ? *lambda : c.at("lambda").get<double>();
  m.n_fock = c.at("n_fock").is_null() ? config_.at("sweep").at("n_fock_min").get<int>() : c.at("n_fock").get<int>();
  m.dipole_self_energy = c.at("dipole_self_energy").get<bool>();
  m.validate();
  return m;
}

std::shared_ptr<const CoupledEigensystem> Workspace::coupled(const CavityMode& requested) {
  const auto b = basis();
  CavityMode mode = requested;
  if (config_.at("cavity").at("n_fock").is_null()) {
    // Cover the hottest temperature the run can ask for.
    const auto& r = config_.at("rates");
    double T = r.at("T").get<double>();
    for (const auto& t : r.at("temperatures")) T = std::max(T, t.get<double>());
    FrequencyScanOptions fo;
    fo.n_fock_min = config_.at("sweep").at("n_fock_min").get<int>();
    fo.fock_window_kT = config_.at("sweep").at("fock_window_kT").get<double>();
    mode.n_fock = std::max(mode.n_fock, adaptive_n_fock(*b, mode.lambda, mode.omega_c, T, fo));
  }
  const auto key = coupled_key(basis_key(params(), x_grid(), R_grid(), basis_options()), mode);
  if (auto s = cache_.load_coupled(key, b)) return std::make_shared<const CoupledEigensystem>(std::move(*s));
  auto s = std::make_shared<const CoupledEigensystem>(
      solve_coupled(b, mode, config_.at("basis").at("max_dimension").get<Eigen::Index>()));
  cache_.store_coupled(key, *s);
  return s;
}

CboaModel Workspace::cboa_model(const CavityMode& mode) {
  return CboaModel(params(), x_grid(), mode, config_.at("cboa").at("n_states").get<int>());
}

std::vector<CouplingRow> coupling_sweep(Workspace& ws, const std::vector<double>& lambdas,
                                        const std::vector<double>& temperatures, double T_ref) {
  if (lambdas.empty()) throw ValidationError("coupling_sweep: empty lambda list");
  if (temperatures.empty()) throw ValidationError("coupling_sweep: empty temperature list");
  const auto ropt = ws.rate_options();
  const auto& table = ws.table();
  const double M = ws.params().M;
  const auto bare_model = ws.cboa_model(ws.cavity_mode(0.0));
  const double Eb0 = critical_points(bare_model, table, ws.newton_options()).barrier;
  const double k0 = quantum_rate(*ws.coupled(ws.cavity_mode(0.0)), T_ref, ropt).k;

  std::vector<CouplingRow> rows;
  for (double lam : lambdas) {
    CouplingRow r;
    r.lambda = lam;
    const auto mode = ws.cavity_mode(lam);
    const auto sys = ws.coupled(mode);
    r.k = quantum_rate(*sys, T_ref, ropt).k;
    r.ratio_quantum = r.k / k0;
    const auto res = quantum_rates(*sys, temperatures, ropt, ws.threads());
    std::vector<double> ks;
    for (const auto& c : res) ks.push_back(c.k);
    r.fit = arrhenius_fit(temperatures, ks);
    const auto report = critical_points(ws.cboa_model(mode), table, ws.newton_options());
    r.E_b_cboa = report.barrier;
    r.dE_b_cboa = report.barrier - Eb0;
    r.ratio_tst = tst_rate_ratio(report.barrier, Eb0, T_ref);
    r.zpe_correction = zero_point_correction(report, M);
    rows.push_back(r);
  }
  return rows;
}

std::vector<PerturbationRow> perturbation_comparison(Workspace& ws, const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw ValidationError("perturbation_comparison: empty lambda list");
  const auto& table = ws.table();
  const double M = ws.params().M;
  const auto left = harmonic_fit(table, M, Well::left);
  const auto top = barrier_top(table);
  const double mu_ts = build_grid(table.R_grid_spec).interpolate(table.dipole(0, 0), top.R);
  const double Eb0 = critical_points(ws.cboa_model(ws.cavity_mode(0.0)), table, ws.newton_options()).barrier;
  return parallel_map<PerturbationRow>(lambdas.size(), ws.threads(), [&](std::size_t i) {
    PerturbationRow r;
    r.lambda = lambdas[i];
    r.dE_b_pert = 0.5 * r.lambda * r.lambda * (left.mu0 * left.mu0 - mu_ts * mu_ts);
    const auto rep = critical_points(ws.cboa_model(ws.cavity_mode(r.lambda)), table, ws.newton_options());
    r.dE_b_exact = rep.barrier - Eb0;
    r.ratio = r.dE_b_exact != 0.0 ? r.dE_b_pert / r.dE_b_exact : 1.0;
    return r;
  });
}

namespace {

// Partial failure: outputs are written, exit status is numerical.
struct PartialFailure : NumericalError {
  using NumericalError::NumericalError;
};

std::string fmt(double v) { return exact(v); }

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <class... T>
  void add(T... v) {
    std::vector<std::string> row;
    (row.push_back(cell(v)), ...);
    rows.push_back(std::move(row));
  }
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(unsigned long v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c == '\n' ? ' ' : c);
    return q + "\"";
  }
  static std::string cell(const char* s) { return cell(std::string(s)); }

  std::string text(const std::string& hash) const {
    std::ostringstream os;
    os << "# config_hash=" << hash << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    }
    return os.str();
  }
};

class Sink {
 public:
  Sink(fs::path dir, std::string hash, json config)
      : dir_(std::move(dir)), hash_(std::move(hash)), config_(std::move(config)) {}
  void csv(const std::string& name, const Csv& c) const { write(name + ".csv", c.text(hash_)); }
  void csv_gz(const std::string& name, const Csv& c) const {
    fs::create_directories(dir_);
    const auto path = (dir_ / (name + ".csv.gz")).string();
    const auto tmp = path + ".tmp";
    gzFile f = gzopen(tmp.c_str(), "wb");
    if (!f) throw NumericalError("cannot write " + path);
    const auto text = c.text(hash_);
    const int written = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    gzclose(f);
    if (written != static_cast<int>(text.size())) throw NumericalError("short write to " + path);
    fs::rename(tmp, path);
  }
  void summary(const std::string& name, json results) const {
    json j = {{"config_hash", hash_}, {"config", config_}, {"results", std::move(results)}};
    write(name + ".json", j.dump(2) + "\n");
  }
  const fs::path& dir() const { return dir_; }
  const std::string& hash() const { return hash_; }

 private:
  void write(const std::string& file, const std::string& text) const {
    fs::create_directories(dir_);
    const auto path = dir_ / file;
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary);
      if (!os) throw NumericalError("cannot write " + path.string());
      os << text;
    }
    fs::rename(tmp, path);
  }
  fs::path dir_;
  std::string hash_;
  json config_;
};

std::vector<double> numbers(const json& j, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.empty()) throw ValidationError(std::string("config: ") + what + " is empty");
  return v;
}

json fit_json(const ArrheniusFit& f) {
  return {{"E_b_eff_hartree", f.E_b_eff}, {"E_b_eff_eV", units::ev(f.E_b_eff)}, {"prefactor", f.prefactor},
          {"r_squared", f.r_squared}, {"rms_residual", f.rms_residual}, {"linear", f.linear},
          {"T_min", f.T_min}, {"T_max", f.T_max}};
}

void cmd_bo_scan(Workspace& ws, const Sink& out) {
  const auto& t = ws.table();
  const double M = ws.params().M;
  fs::create_directories(out.dir());
  save_table(t, (out.dir() / "bo_scan_table.csv").string(), {{"config_hash", out.hash()}});
  Csv c;
  const int shown = std::min(4, t.n_states());
  c.header = {"R_bohr", "R_nm"};
  for (int i = 0; i < shown; ++i) {
    c.header.push_back("V" + std::to_string(i) + "_hartree");
    c.header.push_back("V" + std::to_string(i) + "_eV");
  }
  c.header.insert(c.header.end(), {"mu00_au", "alpha0_au"});
  const Eigen::VectorXd mu = t.dipole(0, 0);
  for (Eigen::Index k = 0; k < t.R.size(); ++k) {
    std::vector<std::string> row = {fmt(t.R(k)), fmt(units::nm(t.R(k)))};
    for (int i = 0; i < shown; ++i) {
      row.push_back(fmt(t.V(k, i)));
      row.push_back(fmt(units::ev(t.V(k, i))));
    }
    row.push_back(fmt(mu(k)));
    row.push_back(fmt(t.alpha0(k)));
    c.rows.push_back(row);
  }
  out.csv("bo_scan", c);
  const auto left = harmonic_fit(t, M, Well::left), right = harmonic_fit(t, M, Well::right);
  const auto top = barrier_top(t);
  const auto levels = vibrational_levels(t, M, 10);
  auto hj = [](const HarmonicFit& h) {
    return json{{"R0_bohr", h.R0}, {"V0_hartree", h.V0}, {"omega_nu_hartree", h.omega_nu},
                {"omega_nu_meV", units::mev(h.omega_nu)}, {"mu0_au", h.mu0}, {"dmu_dR_au", h.dmu},
                {"alpha0_au", h.alpha0}};
  };
  std::vector<double> lv_ev;
  for (Eigen::Index i = 0; i < levels.energies.size(); ++i) lv_ev.push_back(units::ev(levels.energies(i) - levels.energies(0)));
  out.summary("bo_scan", {{"left", hj(left)}, {"right", hj(right)},
                          {"barrier_top", {{"R_bohr", top.R}, {"V_hartree", top.V},
                                           {"E_b_hartree", top.V - left.V0}, {"E_b_eV", units::ev(top.V - left.V0)}}},
                          {"vibrational_levels_eV", lv_ev}});
}

void cmd_quantum_rate(Workspace& ws, const Sink& out) {
  const auto mode = ws.cavity_mode();
  const auto sys = ws.coupled(mode);
  const double T = ws.config().at("rates").at("T").get<double>();
  const auto r = quantum_rate(*sys, T, ws.rate_options());
  Csv c;
  c.header = {"t_au", "t_fs", "C_ff"};
  for (Eigen::Index i = 0; i < r.times.size(); ++i) c.add(r.times(i), units::fs(r.times(i)), r.C_ff(i));
  out.csv("quantum_rate_cff", c);
  out.summary("quantum_rate", {{"T_K", T}, {"omega_c_hartree", mode.omega_c}, {"omega_c_eV", units::ev(mode.omega_c)},
                               {"lambda_au", mode.lambda}, {"n_fock", sys->mode.n_fock}, {"dimension", sys->size()},
                               {"k_au", r.k}, {"k_per_fs", r.k * units::fs_au}, {"Q_r", r.Q_r},
                               {"t_f_fs", units::fs(r.t_f)}});
}

void cmd_arrhenius(Workspace& ws, const Sink& out) {
  const auto lambdas = numbers(ws.config().at("sweep").at("lambdas"), "sweep.lambdas");
  const auto temps = numbers(ws.config().at("rates").at("temperatures"), "rates.temperatures");
  const auto ropt = ws.rate_options();
  Csv c;
  c.header = {"lambda_au", "T_K", "inv_T", "k_au", "k_per_fs", "ln_k_over_T"};
  json fits = json::array();
  for (double lam : lambdas) {
    const auto sys = ws.coupled(ws.cavity_mode(lam));
    const auto res = quantum_rates(*sys, temps, ropt, ws.threads());
    std::vector<double> ks;
    for (std::size_t i = 0; i < temps.size(); ++i) {
      ks.push_back(res[i].k);
      c.add(lam, temps[i], 1.0 / temps[i], res[i].k, res[i].k * units::fs_au, std::log(res[i].k / temps[i]));
    }
    auto f = fit_json(arrhenius_fit(temps, ks));
    f["lambda_au"] = lam;
    fits.push_back(f);
  }
  out.csv("arrhenius", c);
  out.summary("arrhenius", {{"fits", fits}});
}

bool frequency_sweep(Workspace& ws, const Sink& out, const std::vector<double>& lambdas, const std::string& name) {
  const auto ratios = numbers(ws.config().at("sweep").at("omega_ratios"), "sweep.omega_ratios");
  const double T = ws.config().at("rates").at("T").get<double>();
  FrequencyScanOptions fo;
  fo.rate = ws.rate_options();
  fo.n_fock_min = ws.config().at("sweep").at("n_fock_min").get<int>();
  fo.fock_window_kT = ws.config().at("sweep").at("fock_window_kT").get<double>();
  fo.max_dimension = ws.config().at("basis").at("max_dimension").get<Eigen::Index>();
  fo.threads = ws.threads();
  const double wv = ws.omega_nu();
  std::vector<double> omegas;
  for (double r : ratios) omegas.push_back(r * wv);
  Csv c;
  c.header = {"lambda_au", "omega_c_hartree", "omega_c_eV", "omega_c_over_omega_nu", "n_fock", "k_au", "ratio", "ok", "status"};
  json summary = json::array();
  bool all_ok = true;
  for (double lam : lambdas) {
    const auto pts = rate_vs_frequency(ws.basis(), lam, omegas, T, fo);
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : pts) {
      c.add(lam, p.omega_c, units::ev(p.omega_c), p.omega_c / wv, p.n_fock, p.k, p.ratio, p.ok, p.status);
      all_ok = all_ok && p.ok;
      if (p.ok) {
        lo = std::min(lo, p.ratio);
        hi = std::max(hi, p.ratio);
      }
    }
    summary.push_back({{"lambda_au", lam}, {"min_ratio", lo}, {"max_ratio", hi},
                       {"relative_modulation", std::isfinite(lo) ? (hi - lo) / hi : NAN}});
  }
  out.csv(name, c);
  out.summary(name, {{"T_K", T}, {"omega_nu_hartree", wv}, {"per_lambda", summary}});
  return all_ok;
}

void cmd_cboa(Workspace& ws, const Sink& out) {
  const auto mode = ws.cavity_mode();
  const auto& t = ws.table();
  const auto& cb = ws.config().at("cboa");
  const auto q = default_q_grid(t, mode, cb.at("n_q").get<int>());
  const auto surf = cboa_surface(t, mode, q, cb.at("n_states").get<int>(), ws.threads());
  const auto branch = cb.at("branch").get<std::string>();
  if (branch != "connected" && branch != "global") throw ValidationError("config: cboa.branch must be 'connected' or 'global'");
  const auto path = minimum_path(surf, t, branch == "connected" ? BranchPolicy::connected : BranchPolicy::global);
  Csv c;
  c.header = {"R_bohr", "R_nm", "q_au", "V_hartree", "V_eV"};
  for (Eigen::Index i = 0; i < surf.R.size(); ++i)
    for (Eigen::Index j = 0; j < surf.q.size(); ++j)
      c.add(surf.R(i), units::nm(surf.R(i)), surf.q(j), surf.V(i, j), units::ev(surf.V(i, j)));
  out.csv_gz("cboa_surface", c);
  Csv p;
  p.header = {"R_bohr", "R_nm", "q_m_au", "V_hartree", "V_eV"};
  for (Eigen::Index i = 0; i < path.R.size(); ++i) p.add(path.R(i), units::nm(path.R(i)), path.q_m(i), path.V(i), units::ev(path.V(i)));
  out.csv("cboa_minimum_path", p);
  out.summary("cboa", {{"lambda_au", mode.lambda}, {"omega_c_hartree", mode.omega_c}, {"n_states", surf.n_states},
                       {"branch", branch}, {"warnings", path.warnings}});
}

void cmd_barriers(Workspace& ws, const Sink& out) {
  const auto lambdas = numbers(ws.config().at("sweep").at("lambdas"), "sweep.lambdas");
  const double T = ws.config().at("rates").at("T").get<double>();
  const auto& t = ws.table();
  const double M = ws.params().M;
  Csv c;
  c.header = {"lambda_au", "kind", "R_bohr", "q_au", "V_hartree", "V_eV", "converged", "omega_plus_eV", "omega_minus_eV", "Omega_R_eV"};
  json rows = json::array();
  double Eb0 = NAN;
  bool all_ok = true;
  for (double lam : lambdas) {
    const auto mode = ws.cavity_mode(lam);
    const auto rep = critical_points(ws.cboa_model(mode), t, ws.newton_options());
    if (std::isnan(Eb0)) Eb0 = lam == 0.0 ? rep.barrier : critical_points(ws.cboa_model(ws.cavity_mode(0.0)), t, ws.newton_options()).barrier;
    auto emit = [&](const CriticalPoint& p, const char* kind) {
      double wp = NAN, wm = NAN, wr = NAN;
      if (p.kind == PointKind::minimum) {
        const auto nm = hessian_normal_modes(p, M, mode.omega_c);
        wp = units::ev(nm.omega_plus);
        wm = units::ev(nm.omega_minus);
        wr = units::ev(nm.Omega_R);
      }
      all_ok = all_ok && p.converged;
      c.add(lam, kind, p.R, p.q, p.V, units::ev(p.V), p.converged, wp, wm, wr);
    };
    for (const auto& p : rep.minima) emit(p, "minimum");
    for (const auto& p : rep.saddles) emit(p, "saddle");
    for (const auto& p : rep.others) emit(p, "other");
    double zpe = NAN;
    try {
      zpe = zero_point_correction(rep, M);
    } catch (const NumericalError&) {
      all_ok = false;
    }
    rows.push_back({{"lambda_au", lam}, {"E_b_hartree", rep.barrier}, {"E_b_eV", units::ev(rep.barrier)},
                    {"dE_b_eV", units::ev(rep.barrier - Eb0)}, {"tst_rate_ratio", tst_rate_ratio(rep.barrier, Eb0, T)},
                    {"zpe_correction_eV", units::ev(zpe)}, {"warnings", rep.warnings}});
  }
  out.csv("barriers_critical_points", c);
  out.summary("barriers", {{"T_K", T}, {"per_lambda", rows}});
  if (!all_ok) throw PartialFailure("barriers: some critical points did not converge or classify");
}

void cmd_pert(Workspace& ws, const Sink& out) {
  const auto lambdas = numbers(ws.config().at("sweep").at("lambdas"), "sweep.lambdas");
  const auto rows = perturbation_comparison(ws, lambdas);
  Csv c;
  c.header = {"lambda_au", "dE_b_pert_hartree", "dE_b_exact_hartree", "dE_b_pert_eV", "dE_b_exact_eV", "pert_over_exact"};
  for (const auto& r : rows) c.add(r.lambda, r.dE_b_pert, r.dE_b_exact, units::ev(r.dE_b_pert), units::ev(r.dE_b_exact), r.ratio);
  out.csv("pert", c);
  // Perturbative surface along the path for plotting.
  const auto& t = ws.table();
  const double w = ws.cavity_mode().omega_c;
  Csv s;
  s.header = {"lambda_au", "R_bohr", "V0_hartree", "path_hartree", "path_eV", "q_min_au", "omega_eff_hartree"};
  for (double lam : lambdas) {
    PerturbativeSurface ps(t.surface(0), t.dipole(0, 0), t.alpha0, lam, w);
    for (Eigen::Index i = 0; i < ps.size(); ++i)
      s.add(lam, t.R(i), t.V(i, 0), ps.path(i), units::ev(ps.path(i)), ps.q_min(i), ps.effective_frequency(i));
  }
  out.csv("pert_surfaces", s);
  json j = json::array();
  for (const auto& r : rows) j.push_back({{"lambda_au", r.lambda}, {"pert_over_exact", r.ratio}});
  out.summary("pert", {{"omega_c_hartree", w}, {"per_lambda", j}});
}

void cmd_scan_analyze(Workspace& ws, const Sink& out, const std::vector<std::string>& positional) {
  const auto& sc = ws.config().at("scan");
  std::string path = sc.at("path").get<std::string>();
  if (!positional.empty()) path = positional.front();
  if (path.empty()) throw ValidationError("scan-analyze: no scan file (scan.path or positional argument)");
  const auto scan = load_scan(path);
  ScanOptions o;
  o.axis = sc.at("axis").get<int>();
  o.T = sc.at("T").get<double>();
  if (!sc.at("omega_c").is_null()) o.omega_c = sc.at("omega_c").get<double>();
  const auto rep = scan_analysis(scan, numbers(sc.at("lambdas"), "scan.lambdas"), o);
  Csv c;
  c.header = {"lambda_au", "pair", "from_bare", "to_bare", "from_shifted", "to_shifted", "E_bare_hartree", "E_cavity_hartree",
              "E_bare_eV", "E_cavity_eV", "tst_rate_ratio"};
  for (const auto& lr : rep.per_lambda)
    for (const auto& b : lr.barriers)
      c.add(lr.lambda, b.pair.label, b.pair.from, b.pair.to, b.from_shifted, b.to_shifted, b.E_bare, b.E_cavity,
            units::ev(b.E_bare), units::ev(b.E_cavity), b.tst_ratio);
  out.csv("scan_barriers", c);
  out.summary("scan_analyze", to_json(rep));
}

void cmd_npom(Workspace& ws, const Sink& out) {
  const auto& np = ws.config().at("npom");
  const auto src = np.at("dipole_source").get<std::string>();
  const auto dip = critical_dipoles(src.empty() ? ws.table() : load_table(src));
  NpomGeometry g;
  g.sphere_radius = units::from_nm(np.at("radius_nm").get<double>());
  g.height_fraction = np.at("height_fraction").get<double>();
  std::vector<double> gaps;
  for (double v : numbers(np.at("gaps_nm"), "npom.gaps_nm")) gaps.push_back(units::from_nm(v));
  const auto rows = npom_barrier_sweep(dip, gaps, g, np.at("tol").get<double>(),
                                       np.at("max_images").get<std::size_t>(), ws.threads());
  Csv c;
  c.header = {"gap_bohr", "gap_nm", "U_hartree", "U_eV", "dE_b_hartree", "dE_b_eV", "lambda_eff_au", "V_eff_bohr3",
              "V_eff_nm3", "images", "residual", "ok", "status"};
  bool ok = true;
  for (const auto& r : rows) {
    c.add(r.gap, units::nm(r.gap), r.U, units::ev(r.U), r.delta_Eb, units::ev(r.delta_Eb), r.lambda_eff, r.V_eff,
          r.V_eff * std::pow(units::bohr_nm, 3), r.images, r.residual, r.ok, r.status);
    ok = ok && r.ok;
  }
  out.csv("npom_sweep", c);
  out.summary("npom_sweep", {{"mu_min_au", dip.mu_min}, {"mu_ts_au", dip.mu_ts}, {"radius_nm", np.at("radius_nm")},
                             {"height_fraction", g.height_fraction}});
  if (!ok) throw PartialFailure("npom-sweep: some gaps failed, see the status column");
}

CollectiveOptions collective_options(Workspace& ws, ShinMetiuDipoles& dip) {
  const auto& co = ws.config().at("collective");
  const auto shell = co.at("shell_nm").get<std::vector<double>>();
  if (shell.size() != 2) throw ValidationError("config: collective.shell_nm needs [inner, outer] distances from the surface");
  const double a = units::from_nm(0.5 * co.at("sphere_diameter_nm").get<double>());
  CollectiveOptions o;
  o.shell = {a + units::from_nm(shell[0]), a + units::from_nm(shell[1]), units::from_nm(co.at("min_dist_nm").get<double>())};
  o.sphere = sphere_mode_drude(std::sqrt(3.0) * units::from_ev(co.at("omega0_eV").get<double>()), a);
  const auto orient = co.at("orientation").get<std::string>();
  if (orient == "aligned") o.orientation = Orientation::aligned;
  else if (orient == "mirror_paired") o.orientation = Orientation::mirror_paired;
  else if (orient == "isotropic") o.orientation = Orientation::isotropic;
  else throw ValidationError("config: collective.orientation must be aligned, mirror_paired or isotropic");
  dip = shin_metiu_dipoles(ws.table());
  o.dipoles = dip.forward();
  o.T = co.at("T").get<double>();
  o.threads = ws.threads();
  return o;
}

std::vector<std::uint64_t> seed_list(Workspace& ws) {
  const int n = ws.config().at("collective").at("seeds").get<int>();
  if (n < 1) throw ValidationError("config: collective.seeds must be >= 1");
  const auto base = ws.config().at("seed").get<std::uint64_t>();
  std::vector<std::uint64_t> s;
  for (int i = 0; i < n; ++i) s.push_back(base + static_cast<std::uint64_t>(i));
  return s;
}

void cmd_collective(Workspace& ws, const Sink& out) {
  ShinMetiuDipoles dip;
  const auto opt = collective_options(ws, dip);
  std::vector<Eigen::Index> N;
  for (double v : numbers(ws.config().at("collective").at("N"), "collective.N")) N.push_back(static_cast<Eigen::Index>(std::llround(v)));
  const auto rep = energy_decomposition(N, seed_list(ws), opt);
  Csv c;
  c.header = {"seed", "N", "E_ds_hartree", "E_dd_hartree", "E_tot_hartree", "E_ds_eV", "E_dd_eV", "E_tot_eV", "alignment",
              "reacting", "lambda_reacting_au", "dE_b_ds_eV", "dE_b_dd_eV", "rate_factor"};
  for (const auto& r : rep.rows)
    c.add(static_cast<unsigned long>(r.seed), static_cast<long>(r.N), r.E_ds, r.E_dd, r.E_tot, units::ev(r.E_ds),
          units::ev(r.E_dd), units::ev(r.E_tot), r.alignment, static_cast<long>(r.reacting), r.lambda_reacting,
          units::ev(r.dEb_ds), units::ev(r.dEb_dd), r.rate_factor);
  out.csv("collective_realizations", c);
  Eigen::VectorXd n(static_cast<Eigen::Index>(rep.N.size()));
  for (std::size_t i = 0; i < rep.N.size(); ++i) n(static_cast<Eigen::Index>(i)) = static_cast<double>(rep.N[i]);
  json means = json::array();
  for (Eigen::Index i = 0; i < n.size(); ++i)
    means.push_back({{"N", rep.N[static_cast<std::size_t>(i)]}, {"E_ds_eV", units::ev(rep.mean_E_ds(i))},
                     {"E_dd_eV", units::ev(rep.mean_E_dd(i))}, {"E_tot_eV", units::ev(rep.mean_E_tot(i))},
                     {"dE_b_ds_eV", units::ev(rep.mean_dEb_ds(i))}, {"dE_b_ds_std_eV", units::ev(rep.std_dEb_ds(i))},
                     {"dE_b_dd_eV", units::ev(rep.mean_dEb_dd(i))},
                     {"rate_factor", std::exp(-rep.mean_dEb_ds(i) / (units::boltzmann * opt.T))}});
  json linear = nullptr;
  if (n.size() >= 2) {
    const auto f = numerics::fit_line(n, rep.mean_dEb_ds);
    linear = {{"slope_eV_per_molecule", units::ev(f.slope)}, {"r_squared", f.r_squared}};
  }
  out.summary("collective", {{"mu_left_au", dip.left}, {"mu_ts_au", dip.ts}, {"mu_right_au", dip.right},
                             {"means", means}, {"dE_b_vs_N", linear}});
}

void cmd_collective_pes(Workspace& ws, const Sink& out) {
  ShinMetiuDipoles dip;
  const auto opt = collective_options(ws, dip);
  const auto Ns = numbers(ws.config().at("collective").at("N"), "collective.N");
  auto N = static_cast<Eigen::Index>(std::llround(*std::max_element(Ns.begin(), Ns.end())));
  if (N % 2) ++N;
  const auto seed = ws.config().at("seed").get<std::uint64_t>();
  Csv c;
  c.header = {"R_bohr", "bare_eV", "single_eV", "aligned_eV", "zero_alignment_eV"};
  Ensemble al = sample_ensemble(N, opt.shell, seed, Orientation::aligned);
  Ensemble zr = sample_ensemble(N, opt.shell, seed, Orientation::mirror_paired);
  assign_mode_couplings(al, opt.sphere);
  assign_mode_couplings(zr, opt.sphere);
  const auto pa = collective_pes(al, most_strongly_coupled(al), ws.table(), dip.left);
  const auto pz = collective_pes(zr, most_strongly_coupled(zr), ws.table(), dip.left);
  for (Eigen::Index i = 0; i < pa.R.size(); ++i)
    c.add(pa.R(i), units::ev(pa.bare(i)), units::ev(pa.single(i)), units::ev(pa.collective(i)), units::ev(pz.collective(i)));
  out.csv("collective_pes", c);
  const auto b0 = curve_barrier(pa.R, pa.bare), ba = curve_barrier(pa.R, pa.collective), bz = curve_barrier(pz.R, pz.collective);
  const auto bb = curve_barrier(pa.R, pa.collective, +1);
  const auto bb0 = curve_barrier(pa.R, pa.bare, +1);
  out.summary("collective_pes", {{"N", N}, {"alignment_aligned", al.alignment()}, {"alignment_zero", zr.alignment()},
                                 {"E_b_bare_eV", units::ev(b0.E_b)}, {"E_b_aligned_eV", units::ev(ba.E_b)},
                                 {"E_b_zero_alignment_eV", units::ev(bz.E_b)},
                                 {"backreaction_dE_b_eV", units::ev(bb.E_b - bb0.E_b)}});
}

void cmd_coupling_sweep(Workspace& ws, const Sink& out, const std::vector<double>& lambdas) {
  const double T = ws.config().at("rates").at("T").get<double>();
  const auto temps = numbers(ws.config().at("rates").at("temperatures"), "rates.temperatures");
  const auto rows = coupling_sweep(ws, lambdas, temps, T);
  Csv c;
  c.header = {"lambda_au", "E_b_eff_quantum_eV", "E_b_cboa_eV", "ratio_quantum", "ratio_cboa_tst", "arrhenius_r2",
              "zpe_correction_eV"};
  for (const auto& r : rows)
    c.add(r.lambda, units::ev(r.fit.E_b_eff), units::ev(r.E_b_cboa), r.ratio_quantum, r.ratio_tst, r.fit.r_squared,
          units::ev(r.zpe_correction));
  out.csv("fig3c", c);
  out.summary("fig3c", {{"T_K", T}, {"omega_nu_hartree", ws.omega_nu()}});
}

json apply_figure_preset(const std::string& fig, json cfg) {
  if (fig == "fig2") cfg["sweep"]["lambdas"] = {0.0, 0.01, 0.02, 0.035};
  else if (fig == "fig3c") cfg["sweep"]["lambdas"] = {0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035};
  else if (fig == "fig4") cfg["sweep"]["lambdas"] = {0.005, 0.01, 0.02, 0.03, 0.035, 0.04, 0.05};
  else if (fig == "fig5") cfg["sweep"]["lambdas"] = {0.005, 0.01, 0.02};
  return cfg;
}

}  // namespace

std::vector<std::string> subcommands() {
  return {"bo-scan", "quantum-rate", "arrhenius", "rate-vs-frequency", "cboa", "barriers", "pert", "scan-analyze",
          "npom-sweep", "collective", "reproduce"};
}

namespace {

void set_dotted(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("--set expects key.path=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ValidationError("--set: empty key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) *node = json::object();
    node = &(*node)[parts[i]];
  }
  if (!node->is_object()) *node = json::object();
  (*node)[parts.back()] = value;
}

void dispatch(const std::string& sub, const std::vector<std::string>& positional, Workspace& ws, const Sink& out) {
  if (sub == "bo-scan") cmd_bo_scan(ws, out);
  else if (sub == "quantum-rate") cmd_quantum_rate(ws, out);
  else if (sub == "arrhenius") cmd_arrhenius(ws, out);
  else if (sub == "rate-vs-frequency") {
    if (!frequency_sweep(ws, out, numbers(ws.config().at("sweep").at("lambdas"), "sweep.lambdas"), "rate_vs_frequency"))
      throw PartialFailure("rate-vs-frequency: some frequencies failed, see the status column");
  } else if (sub == "cboa") cmd_cboa(ws, out);
  else if (sub == "barriers") cmd_barriers(ws, out);
  else if (sub == "pert") cmd_pert(ws, out);
  else if (sub == "scan-analyze") cmd_scan_analyze(ws, out, positional);
  else if (sub == "npom-sweep") cmd_npom(ws, out);
  else if (sub == "collective") cmd_collective(ws, out);
  else throw ValidationError("unknown subcommand '" + sub + "'");
}

void run_target(const std::string& sub, const std::string& figure, const std::vector<std::string>& pos, Workspace& ws,
                const Sink& out) {
  const auto lambdas = [&] { return numbers(ws.config().at("sweep").at("lambdas"), "sweep.lambdas"); };
  if (figure.empty()) dispatch(sub, pos, ws, out);
  else if (figure == "fig1") cmd_bo_scan(ws, out);
  else if (figure == "fig2") cmd_arrhenius(ws, out);
  else if (figure == "fig3c") cmd_coupling_sweep(ws, out, lambdas());
  else if (figure == "fig4") cmd_pert(ws, out);
  else if (figure == "fig5") {
    if (!frequency_sweep(ws, out, lambdas(), "fig5")) throw PartialFailure("fig5: some frequencies failed, see the status column");
  } else if (figure == "fig6") cmd_npom(ws, out);
  else if (figure == "fig7") cmd_collective(ws, out);
  else if (figure == "fig8") cmd_collective_pes(ws, out);
  else throw ValidationError("reproduce: unknown figure id '" + figure + "'");
}

// Sweep lists are checked before anything is written.
void require_sweeps(const json& cfg) {
  const std::vector<std::pair<const char*, const char*>> lists = {
      {"sweep", "lambdas"}, {"sweep", "omega_ratios"}, {"rates", "temperatures"},
      {"scan", "lambdas"},  {"npom", "gaps_nm"},       {"collective", "N"}};
  for (const auto& [sec, key] : lists) {
    const auto& v = cfg.at(sec).at(key);
    if (v.empty()) throw ValidationError(std::string("config: ") + sec + "." + key + " is empty");
    for (const auto& x : v)
      if (!x.is_number()) throw ValidationError(std::string("config: ") + sec + "." + key + " must hold numbers");
  }
}

}  // namespace

int run(const std::string& subcommand, const std::vector<std::string>& positional, const json& user_config,
        const RunOverrides& ov) {
  try {
    json user = user_config.is_null() ? json::object() : user_config;
    if (ov.config_path) {
      std::ifstream is(*ov.config_path);
      if (!is) throw ValidationError("cannot open config file " + *ov.config_path);
      json file;
      try {
        file = json::parse(is, nullptr, true, true);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config file: ") + e.what());
      }
      file.merge_patch(user);
      user = file;
    }
    for (const auto& s : ov.set) set_dotted(user, s);
    if (ov.seed) user["seed"] = *ov.seed;
    if (ov.threads) user["threads"] = *ov.threads;
    if (ov.out_dir) user["out_dir"] = *ov.out_dir;
    if (ov.cache_dir) user["cache_dir"] = *ov.cache_dir;

    std::string sub = subcommand;
    std::vector<std::string> pos = positional;
    std::string figure;
    if (sub == "reproduce") {
      if (pos.empty()) throw ValidationError("reproduce: missing figure id (fig1 fig2 fig3c fig4 fig5 fig6 fig7 fig8)");
      figure = pos.front();
      pos.erase(pos.begin());
    }
    json resolved = resolve_config(user);
    if (!figure.empty()) resolved = resolve_config(apply_figure_preset(figure, resolved));
    require_sweeps(resolved);
    Workspace ws(resolved);
    const Sink out(resolved.at("out_dir").get<std::string>(), ws.hash(), resolved);
    const std::string config_name = (figure.empty() ? sub : figure) + ".config";
    try {
      run_target(sub, figure, pos, ws, out);
    } catch (const PartialFailure&) {
      out.summary(config_name, json::object());
      throw;
    }
    out.summary(config_name, json::object());
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace cavchem
