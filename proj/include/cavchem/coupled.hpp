#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cavchem/shin_metiu.hpp"

namespace cavchem {

struct CavityMode {
  double omega_c = 0.0;
  double lambda = 0.0;
  int n_fock = 8;
  Eigen::Vector3d polarization = Eigen::Vector3d::UnitZ();
  bool dipole_self_energy = false;

  void validate() const;
};

// Nominal vibrational quantum used to express default energy windows.
inline constexpr double nominal_omega_nu = 72.6 / (1000.0 * units::hartree_ev);

struct MolecularBasisOptions {
  int n_electronic = 3;             // adiabatic electronic states per R node
  std::optional<double> e_cut;      // absolute cutoff; default: barrier top + margin
  double e_cut_margin = 10.0 * nominal_omega_nu;
  int threads = 1;
};

// Eigenstates of the electron–nucleus Hamiltonian in the adiabatic product
// basis |R_k> |phi_i(R_k)>, row index k * n_electronic + i.
struct MolecularBasis {
  Eigen::VectorXd energies;         // ascending, all < e_cut
  Eigen::MatrixXd dipole;           // symmetric
  Eigen::MatrixXd dipole_squared;   // <m| mu^2 |n> within the product basis
  Eigen::MatrixXd coefficients;     // product basis -> retained states
  Eigen::VectorXd product_R;        // R of each product row
  Eigen::SparseMatrix<double> nuclear_derivative;  // <k i| d/dR |l j>, antisymmetric
  Eigen::VectorXd R_weights;        // DVR weight of each R node
  Eigen::VectorXd R_nodes;
  double e_cut = 0.0;
  double barrier_top = 0.0;
  double mass = 0.0;
  int n_electronic = 0;

  Eigen::Index size() const { return energies.size(); }
};

MolecularBasis molecular_eigenbasis(const std::vector<ElectronicSlice>& slices, const Grid1D<double>& grid_R,
                                    double M, const MolecularBasisOptions& options = {});
MolecularBasis molecular_eigenbasis(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                                    const MolecularBasisOptions& options = {});

inline constexpr Eigen::Index default_max_dimension = 8000;

// H = E_mol (x) 1 + 1 (x) w (n + 1/2) + lambda sqrt(w/2) mu (x) (a + a^dagger),
// row index m * n_fock + n.
Eigen::MatrixXd build_coupled(const MolecularBasis& basis, const CavityMode& mode,
                              Eigen::Index max_dimension = default_max_dimension);

struct CoupledEigensystem {
  Eigen::VectorXd energies;
  Eigen::MatrixXd states;
  CavityMode mode;
  std::shared_ptr<const MolecularBasis> basis;

  Eigen::Index size() const { return energies.size(); }
};

CoupledEigensystem diagonalize_coupled(const Eigen::MatrixXd& H);
CoupledEigensystem solve_coupled(std::shared_ptr<const MolecularBasis> basis, const CavityMode& mode,
                                 Eigen::Index max_dimension = default_max_dimension);

// Splitting between the upper and lower polariton pairs that follow the
// ground tunnelling doublet at resonance.
double first_doublet_splitting(const CoupledEigensystem& sys);

}  // namespace cavchem
