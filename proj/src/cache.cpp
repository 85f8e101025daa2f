#include "cavchem/cache.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "cavchem/table_io.hpp"

namespace cavchem {

std::string content_hash(const nlohmann::json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_bundle(const ArrayBundle& bundle, const std::string& stem) {
  nlohmann::json side = {{"meta", bundle.meta}, {"arrays", nlohmann::json::array()}};
  const std::string tmp_bin = stem + ".bin.tmp";
  std::ofstream bin(tmp_bin, std::ios::binary);
  if (!bin) throw ValidationError("cache: cannot write " + tmp_bin);
  std::uint64_t offset = 0;
  for (const auto& [name, m] : bundle.arrays) {
    // Column-major, as Eigen stores it.
    bin.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    side["arrays"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  bin.close();
  std::ofstream js(stem + ".json.tmp");
  js << side.dump(2) << '\n';
  js.close();
  std::filesystem::rename(tmp_bin, stem + ".bin");
  std::filesystem::rename(stem + ".json.tmp", stem + ".json");
}

std::optional<ArrayBundle> read_bundle(const std::string& stem) {
  std::ifstream js(stem + ".json");
  std::ifstream bin(stem + ".bin", std::ios::binary);
  if (!js || !bin) return std::nullopt;
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  ArrayBundle b;
  b.meta = side.value("meta", nlohmann::json::object());
  for (const auto& a : side.at("arrays")) {
    Eigen::MatrixXd m(a.at("rows").get<Eigen::Index>(), a.at("cols").get<Eigen::Index>());
    bin.seekg(static_cast<std::streamoff>(a.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!bin) return std::nullopt;
    b.arrays[a.at("name").get<std::string>()] = std::move(m);
  }
  return b;
}

EigenCache::EigenCache(std::string directory) : dir_(std::move(directory)) {
  if (enabled()) std::filesystem::create_directories(dir_);
}

std::string EigenCache::stem(const std::string& kind, const nlohmann::json& key) const {
  return (std::filesystem::path(dir_) / (kind + "-" + content_hash(key))).string();
}

std::optional<MolecularBasis> EigenCache::load_basis(const nlohmann::json& key) const {
  if (!enabled()) return std::nullopt;
  auto b = read_bundle(stem("basis", key));
  if (!b || b->meta.value("key", nlohmann::json()) != key) return std::nullopt;
  MolecularBasis mb;
  mb.energies = b->arrays.at("energies").col(0);
  mb.dipole = b->arrays.at("dipole");
  mb.dipole_squared = b->arrays.at("dipole_squared");
  mb.coefficients = b->arrays.at("coefficients");
  mb.product_R = b->arrays.at("product_R").col(0);
  mb.R_nodes = b->arrays.at("R_nodes").col(0);
  mb.R_weights = b->arrays.at("R_weights").col(0);
  const Eigen::MatrixXd& trip = b->arrays.at("nuclear_derivative");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(trip.rows()));
  for (Eigen::Index i = 0; i < trip.rows(); ++i)
    t.emplace_back(static_cast<int>(trip(i, 0)), static_cast<int>(trip(i, 1)), trip(i, 2));
  mb.nuclear_derivative.resize(mb.product_R.size(), mb.product_R.size());
  mb.nuclear_derivative.setFromTriplets(t.begin(), t.end());
  mb.e_cut = b->meta.at("e_cut").get<double>();
  mb.barrier_top = b->meta.at("barrier_top").get<double>();
  mb.mass = b->meta.at("mass").get<double>();
  mb.n_electronic = b->meta.at("n_electronic").get<int>();
  return mb;
}

void EigenCache::store_basis(const nlohmann::json& key, const MolecularBasis& mb) const {
  if (!enabled()) return;
  ArrayBundle b;
  b.arrays["energies"] = mb.energies;
  b.arrays["dipole"] = mb.dipole;
  b.arrays["dipole_squared"] = mb.dipole_squared;
  b.arrays["coefficients"] = mb.coefficients;
  b.arrays["product_R"] = mb.product_R;
  b.arrays["R_nodes"] = mb.R_nodes;
  b.arrays["R_weights"] = mb.R_weights;
  Eigen::MatrixXd trip(mb.nuclear_derivative.nonZeros(), 3);
  Eigen::Index r = 0;
  for (int k = 0; k < mb.nuclear_derivative.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(mb.nuclear_derivative, k); it; ++it, ++r)
      trip.row(r) << static_cast<double>(it.row()), static_cast<double>(it.col()), it.value();
  b.arrays["nuclear_derivative"] = trip;
  b.meta = {{"key", key},
            {"e_cut", mb.e_cut},
            {"barrier_top", mb.barrier_top},
            {"mass", mb.mass},
            {"n_electronic", mb.n_electronic}};
  write_bundle(b, stem("basis", key));
}

std::optional<CoupledEigensystem> EigenCache::load_coupled(const nlohmann::json& key,
                                                           std::shared_ptr<const MolecularBasis> basis) const {
  if (!enabled()) return std::nullopt;
  auto b = read_bundle(stem("coupled", key));
  if (!b || b->meta.value("key", nlohmann::json()) != key) return std::nullopt;
  CoupledEigensystem sys;
  sys.energies = b->arrays.at("energies").col(0);
  sys.states = b->arrays.at("states");
  const auto& m = b->meta.at("mode");
  sys.mode.omega_c = m.at("omega_c").get<double>();
  sys.mode.lambda = m.at("lambda").get<double>();
  sys.mode.n_fock = m.at("n_fock").get<int>();
  sys.mode.dipole_self_energy = m.at("dipole_self_energy").get<bool>();
  sys.basis = std::move(basis);
  return sys;
}

void EigenCache::store_coupled(const nlohmann::json& key, const CoupledEigensystem& sys) const {
  if (!enabled()) return;
  ArrayBundle b;
  b.arrays["energies"] = sys.energies;
  b.arrays["states"] = sys.states;
  b.meta = {{"key", key},
            {"mode",
             {{"omega_c", sys.mode.omega_c},
              {"lambda", sys.mode.lambda},
              {"n_fock", sys.mode.n_fock},
              {"dipole_self_energy", sys.mode.dipole_self_energy}}}};
  write_bundle(b, stem("coupled", key));
}

nlohmann::json basis_key(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                         const MolecularBasisOptions& options) {
  nlohmann::json k = {{"format", 1},
                      {"params", to_json(p)},
                      {"x_grid", to_json(x_grid)},
                      {"R_grid", to_json(R_grid)},
                      {"n_electronic", options.n_electronic},
                      {"e_cut_margin", exact(options.e_cut_margin)}};
  k["e_cut"] = options.e_cut ? nlohmann::json(exact(*options.e_cut)) : nlohmann::json();
  return k;
}

nlohmann::json coupled_key(const nlohmann::json& bkey, const CavityMode& mode) {
  return {{"basis", bkey},
          {"omega_c", exact(mode.omega_c)},
          {"lambda", exact(mode.lambda)},
          {"n_fock", mode.n_fock},
          {"dipole_self_energy", mode.dipole_self_energy}};
}

}  // namespace cavchem
