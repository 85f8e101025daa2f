#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "cavchem/errors.hpp"
#include "cavchem/perturbation.hpp"
#include "cavchem/shin_metiu.hpp"

namespace cavchem {

// Molecules around a sphere centred at the origin. A molecule's permanent dipole
// at configuration R is mu0(R) * axis.
struct Ensemble {
  Eigen::MatrixXd positions;  // (N, 3)
  Eigen::MatrixXd axes;       // (N, 3) unit
  Eigen::MatrixXd field_dir;  // (N, 3) unit local direction of the z dipole mode field
  Eigen::VectorXd lambda;     // (N) empty until couplings are assigned
  double min_dist = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return positions.rows(); }
  Eigen::VectorXd cos_theta() const;  // axis . field direction
  double mean_lambda() const;
  Eigen::VectorXd relative_couplings() const;
  // (1/N) sum lambda_r,i cos theta_i
  double alignment() const;
  Ensemble prefix(Eigen::Index n) const;
};

class PackingError : public NumericalError {
 public:
  PackingError(const std::string& what, Eigen::Index achieved) : NumericalError(what), achieved(achieved) {}
  Eigen::Index achieved;
};

enum class Orientation {
  aligned,        // axis along the local mode field
  mirror_paired,  // molecules come in z-mirrored pairs with opposite cos theta: sum lambda cos theta == 0
  isotropic,
};

struct ShellSpec {
  double r_in = 0.0;
  double r_out = 0.0;
  double min_dist = 0.0;
};

// Random sequential addition, uniform in the shell volume. Reproducible for a given seed.
Ensemble sample_ensemble(Eigen::Index N, const ShellSpec& shell, std::uint64_t seed,
                         Orientation orientation = Orientation::aligned, std::size_t attempts_per_molecule = 20000);

// Unit direction of the z dipole mode field at r.
Eigen::Vector3d mode_field_direction(const Eigen::Vector3d& r);

// lambda_i = sqrt(2 / w0) mu_eg |E_z(r_i)| for the sphere's z dipole mode.
void assign_mode_couplings(Ensemble& ens, const SphereMode& sphere);

// Signed ground-state dipoles (along the molecular axis) entering a barrier.
struct BarrierDipoles {
  double mu_start = 0.0;   // reacting molecule at its starting minimum
  double mu_ts = 0.0;      // reacting molecule at the transition state
  double mu_others = 0.0;  // every other molecule
};

struct ShinMetiuDipoles {
  double left = 0.0;
  double ts = 0.0;
  double right = 0.0;
  double R_left = 0.0;
  double R_ts = 0.0;
  double R_right = 0.0;

  BarrierDipoles forward() const { return {left, ts, left}; }
  // Right-to-left reaction with all other molecules in the left well.
  BarrierDipoles backward() const { return {right, ts, left}; }
};

ShinMetiuDipoles shin_metiu_dipoles(const ElectronicStructureTable& table);

struct CollectiveBarrier {
  double single = 0.0;       // self (Debye) term of the reacting molecule
  double collective = 0.0;   // cavity-mediated cross term with all other molecules
  double total = 0.0;        // single + collective, direct sum form
  double total_weighted = 0.0;  // same quantity via mean coupling and alignment
  double dipole_dipole = 0.0;   // direct free-space interaction change
  double mean_lambda_others = 0.0;
  double alignment_others = 0.0;  // signed by the others' dipole
  double relative_coupling = 0.0;
  Eigen::Index reacting = 0;
};

CollectiveBarrier collective_barrier(const Ensemble& ens, Eigen::Index reacting, const BarrierDipoles& d);

Eigen::Index most_strongly_coupled(const Ensemble& ens);

// Static dipole-dipole energy of two point dipoles separated by r (from 1 to 2).
double dipole_pair_energy(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2, const Eigen::Vector3d& r);
// Pairwise sum with dipoles mu * axis_i.
double dipole_dipole_energy(const Ensemble& ens, double mu);
double dipole_dipole_energy(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& dipoles);

struct CollectivePes {
  Eigen::VectorXd R;
  Eigen::VectorXd bare;        // V0(R)
  Eigen::VectorXd single;      // V0(R) - (lambda_1 mu_eps(R))^2 / 2
  Eigen::VectorXd collective;  // V0(R) - (lambda_1 mu_eps(R) + S)^2 / 2 + S^2 / 2
  double S = 0.0;              // sum over others of lambda_i mu_eps,i
};

// Ground surface of the reacting molecule with the others fixed (dipole mu_others),
// along the photon minimum.
CollectivePes collective_pes(const Ensemble& ens, Eigen::Index reacting, const ElectronicStructureTable& table,
                             double mu_others);

struct PesBarrier {
  double R_min = 0.0;
  double R_ts = 0.0;
  double E_b = 0.0;
};

// Barrier on a tabulated curve from the minimum on the `side` of the barrier top.
PesBarrier curve_barrier(const Eigen::VectorXd& R, const Eigen::VectorXd& V, int side = -1);

struct EnsembleRow {
  std::uint64_t seed = 0;
  Eigen::Index N = 0;
  double E_ds = 0.0;
  double E_dd = 0.0;
  double E_tot = 0.0;
  double alignment = 0.0;
  Eigen::Index reacting = 0;
  double lambda_reacting = 0.0;
  double dEb_ds = 0.0;  // single + collective
  double dEb_dd = 0.0;
  double rate_factor = 1.0;  // exp(-dEb_ds / k_B T)
};

struct CollectiveEnergyReport {
  std::vector<EnsembleRow> rows;  // per seed, per N
  std::vector<Eigen::Index> N;
  Eigen::VectorXd mean_E_ds, mean_E_dd, mean_E_tot, mean_dEb_ds, mean_dEb_dd, std_dEb_ds;
};

struct CollectiveOptions {
  ShellSpec shell;
  SphereMode sphere;
  Orientation orientation = Orientation::aligned;
  BarrierDipoles dipoles;
  double T = 300.0;
  int threads = 1;
};

// Each seed samples max(N) molecules once; smaller N use its prefix.
CollectiveEnergyReport energy_decomposition(const std::vector<Eigen::Index>& N, const std::vector<std::uint64_t>& seeds,
                                            const CollectiveOptions& opt);

// Barrier change of the reacting molecule from the full grounded-sphere image
// solution (all multipoles) instead of the single z mode.
double sphere_image_barrier(const Ensemble& ens, Eigen::Index reacting, double sphere_radius, const BarrierDipoles& d);

}  // namespace cavchem
