#include "cavchem/table_io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace cavchem {

std::string exact(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

nlohmann::json to_json(const ShinMetiuParams& p) {
  return {{"Z", p.Z}, {"L", p.L}, {"M", p.M}, {"Rc", p.Rc}};
}

nlohmann::json to_json(const GridSpec& g) {
  return {{"lower", g.lower}, {"upper", g.upper}, {"elements", g.elements}, {"order", g.order}};
}

ShinMetiuParams params_from_json(const nlohmann::json& j) {
  ShinMetiuParams p;
  p.Z = j.at("Z").get<double>();
  p.L = j.at("L").get<double>();
  p.M = j.at("M").get<double>();
  p.Rc = j.at("Rc").get<double>();
  p.validate();
  return p;
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  g.lower = j.at("lower").get<double>();
  g.upper = j.at("upper").get<double>();
  g.elements = j.at("elements").get<int>();
  g.order = j.at("order").get<int>();
  return g;
}

void write_table_csv(const ElectronicStructureTable& t, std::ostream& os, const nlohmann::json& extra) {
  const int n = t.n_states();
  nlohmann::json header = {{"kind", "electronic_structure_table"},
                           {"units", {{"R", "bohr"}, {"V", "hartree"}, {"mu", "e*bohr"}, {"alpha0", "bohr^3"}}},
                           {"params", to_json(t.params)},
                           {"x_grid", to_json(t.x_grid)},
                           {"R_grid", to_json(t.R_grid_spec)},
                           {"n_states", n},
                           {"n_R", t.R.size()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) header[it.key()] = it.value();
  os << "# " << header.dump() << '\n';
  os << "R";
  for (int i = 0; i < n; ++i) os << ",V_" << i;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) os << ",mu_" << i << '_' << j;
  os << ",alpha0\n";
  for (Eigen::Index k = 0; k < t.R.size(); ++k) {
    os << exact(t.R(k));
    for (int i = 0; i < n; ++i) os << ',' << exact(t.V(k, i));
    const auto& mu = t.mu[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) os << ',' << exact(mu(i, j));
    os << ',' << exact(t.alpha0(k)) << '\n';
  }
}

ElectronicStructureTable read_table_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
    throw ValidationError("table csv: missing JSON header line");
  const auto header = nlohmann::json::parse(line.substr(2));
  if (header.value("kind", "") != "electronic_structure_table")
    throw ValidationError("table csv: header is not an electronic structure table");
  ElectronicStructureTable t;
  t.params = params_from_json(header.at("params"));
  t.x_grid = grid_from_json(header.at("x_grid"));
  t.R_grid_spec = grid_from_json(header.at("R_grid"));
  const int n = header.at("n_states").get<int>();
  const auto n_R = header.at("n_R").get<Eigen::Index>();
  if (!std::getline(is, line)) throw ValidationError("table csv: missing column header");
  const std::size_t n_cols = 2 + static_cast<std::size_t>(n) + static_cast<std::size_t>(n * (n + 1) / 2);

  t.R.resize(n_R);
  t.V.resize(n_R, n);
  t.alpha0.resize(n_R);
  t.mu.assign(static_cast<std::size_t>(n_R), Eigen::MatrixXd::Zero(n, n));
  std::vector<double> row;
  for (Eigen::Index k = 0; k < n_R; ++k) {
    if (!std::getline(is, line)) throw ValidationError("table csv: fewer rows than declared");
    row.clear();
    const char* p = line.c_str();
    while (*p) {
      char* end = nullptr;
      row.push_back(std::strtod(p, &end));
      if (end == p) throw ValidationError("table csv: malformed number in row " + std::to_string(k));
      p = end;
      if (*p == ',') ++p;
    }
    if (row.size() != n_cols) throw ValidationError("table csv: wrong column count in row " + std::to_string(k));
    std::size_t c = 0;
    t.R(k) = row[c++];
    for (int i = 0; i < n; ++i) t.V(k, i) = row[c++];
    auto& mu = t.mu[static_cast<std::size_t>(k)];
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) mu(i, j) = mu(j, i) = row[c++];
    t.alpha0(k) = row[c++];
  }
  return t;
}

void save_table(const ElectronicStructureTable& table, const std::string& path, const nlohmann::json& extra) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  write_table_csv(table, os, extra);
}

ElectronicStructureTable load_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open table: " + path);
  return read_table_csv(is);
}

}  // namespace cavchem
