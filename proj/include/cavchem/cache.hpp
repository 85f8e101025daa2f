#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

#include "cavchem/coupled.hpp"

namespace cavchem {

// 64-bit FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

// Named float64 matrices stored as one raw little-endian blob plus a JSON
// sidecar describing shapes and offsets.
struct ArrayBundle {
  std::map<std::string, Eigen::MatrixXd> arrays;
  nlohmann::json meta = nlohmann::json::object();
};

void write_bundle(const ArrayBundle& bundle, const std::string& stem);
std::optional<ArrayBundle> read_bundle(const std::string& stem);

// Disk cache keyed by content hash; an empty directory disables it.
class EigenCache {
 public:
  explicit EigenCache(std::string directory = {});

  bool enabled() const { return !dir_.empty(); }
  std::optional<MolecularBasis> load_basis(const nlohmann::json& key) const;
  void store_basis(const nlohmann::json& key, const MolecularBasis& basis) const;
  std::optional<CoupledEigensystem> load_coupled(const nlohmann::json& key,
                                                 std::shared_ptr<const MolecularBasis> basis) const;
  void store_coupled(const nlohmann::json& key, const CoupledEigensystem& sys) const;

 private:
  std::string stem(const std::string& kind, const nlohmann::json& key) const;
  std::string dir_;
};

nlohmann::json basis_key(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                         const MolecularBasisOptions& options);
nlohmann::json coupled_key(const nlohmann::json& basis_key, const CavityMode& mode);

}  // namespace cavchem
