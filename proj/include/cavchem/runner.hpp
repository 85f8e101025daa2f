#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cavchem/cache.hpp"
#include "cavchem/cboa.hpp"
#include "cavchem/coupled.hpp"
#include "cavchem/rates.hpp"
#include "cavchem/shin_metiu.hpp"
#include "json.hpp"

namespace cavchem {

// Every recognised key with its default. Values are atomic units unless the key
// carries a unit suffix.
nlohmann::json default_config();

// Overlays `user` on the defaults. Unknown keys and type mismatches throw ValidationError.
nlohmann::json resolve_config(const nlohmann::json& user);

// Hash of the physics-relevant part of a resolved config (threads and paths excluded).
std::string config_hash(const nlohmann::json& resolved);

// "a:b:step", "a:b:log[:n]" or "v1,v2,...".
std::vector<double> parse_range(const std::string& text);

// Lazily built, cached model data shared by the pipelines.
class Workspace {
 public:
  explicit Workspace(nlohmann::json resolved);

  const nlohmann::json& config() const { return config_; }
  const std::string& hash() const { return hash_; }
  int threads() const;

  ShinMetiuParams params() const;
  GridSpec x_grid() const;
  GridSpec R_grid() const;
  MolecularBasisOptions basis_options() const;
  RateOptions rate_options() const;
  NewtonOptions newton_options() const;

  const ElectronicStructureTable& table();
  std::shared_ptr<const MolecularBasis> basis();
  double omega_nu();
  // omega_c from the config, or omega_ratio * omega_nu when omega_c is null.
  CavityMode cavity_mode(std::optional<double> lambda = std::nullopt, std::optional<double> omega_c = std::nullopt);
  // With cavity.n_fock null the Fock space is sized per solve by adaptive_n_fock.
  std::shared_ptr<const CoupledEigensystem> coupled(const CavityMode& mode);
  CboaModel cboa_model(const CavityMode& mode);

 private:
  nlohmann::json config_;
  std::string hash_;
  EigenCache cache_;
  std::optional<ElectronicStructureTable> table_;
  std::shared_ptr<const MolecularBasis> basis_;
  std::optional<double> omega_nu_;
};

struct CouplingRow {
  double lambda = 0.0;
  double k = 0.0;              // quantum rate at T_ref
  double ratio_quantum = 1.0;  // k(lambda) / k(0) at T_ref
  ArrheniusFit fit;
  double E_b_cboa = 0.0;       // saddle minus left minimum
  double dE_b_cboa = 0.0;
  double ratio_tst = 1.0;
  double zpe_correction = 0.0;
};

// Quantum rates, Arrhenius fits and CBOA barriers at resonance for each lambda.
std::vector<CouplingRow> coupling_sweep(Workspace& ws, const std::vector<double>& lambdas,
                                        const std::vector<double>& temperatures, double T_ref);

struct PerturbationRow {
  double lambda = 0.0;
  double dE_b_pert = 0.0;   // lambda^2 (mu0_min^2 - mu0_ts^2) / 2
  double dE_b_exact = 0.0;  // CBOA critical points, connected branch
  double ratio = 0.0;
};

std::vector<PerturbationRow> perturbation_comparison(Workspace& ws, const std::vector<double>& lambdas);

struct RunOverrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> cache_dir;
  std::vector<std::string> set;  // "dotted.key=json-value"
};

// Exit status: 0 success, 2 validation error, 3 numerical failure (including
// partial sweep failures, which still write per-point status).
int run(const std::string& subcommand, const std::vector<std::string>& positional, const nlohmann::json& user_config,
        const RunOverrides& overrides);

std::vector<std::string> subcommands();

}  // namespace cavchem
