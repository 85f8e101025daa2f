#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cavchem/fedvr.hpp"
#include "cavchem/units.hpp"

namespace cavchem {

struct ShinMetiuParams {
  double Z = 1.0;
  double L = 10.0 * units::angstrom_bohr;
  double M = 1836.0;
  double Rc = 1.5 * units::angstrom_bohr;

  void validate() const;
  bool operator==(const ShinMetiuParams&) const = default;
};

inline const GridSpec default_electron_grid{-20.0, 20.0, 40, 8};
inline const GridSpec default_nuclear_grid{-8.5, 8.5, 40, 8};
inline constexpr int default_electronic_states = 17;

// erf(|r|/rc)/|r| with its finite limit at r = 0.
double soft_coulomb(double r, double rc);

// Electron potential from all three nuclei plus nucleus–nucleus repulsion.
double electron_potential(const ShinMetiuParams& p, double x, double R);
double nuclear_repulsion(const ShinMetiuParams& p, double R);

// Eigenpairs of the electronic Hamiltonian at fixed R.
struct ElectronicSlice {
  double R = 0.0;
  Eigen::VectorXd energies;  // ascending
  Eigen::MatrixXd vectors;   // DVR coefficients, one column per state
  Eigen::MatrixXd dipole;    // <i| Z R - x |j>
};

ElectronicSlice solve_electronic(const ShinMetiuParams& p, const Grid1D<double>& grid_x, double R,
                                 int n_states);

// Sign-fix `slice` so each state overlaps positively with `previous`.
void align_gauge(const ElectronicSlice& previous, ElectronicSlice& slice);
void fix_first_gauge(ElectronicSlice& slice);

// Ground-state static polarizability 2 sum_m |mu_m0|^2 / (E_m - E_0).
double static_polarizability(const Eigen::VectorXd& energies, const Eigen::MatrixXd& dipole);

// Gauge-continuous electronic solves at every interior node of the R grid.
std::vector<ElectronicSlice> electronic_slices(const ShinMetiuParams& p, const Grid1D<double>& grid_x,
                                               const Grid1D<double>& grid_R, int n_states, int threads = 1);

struct ElectronicStructureTable {
  ShinMetiuParams params;
  GridSpec x_grid;
  GridSpec R_grid_spec;
  Eigen::VectorXd R;                 // interior nodes of R_grid_spec
  Eigen::MatrixXd V;                 // (n_R, n_states)
  std::vector<Eigen::MatrixXd> mu;   // per R, (n_states, n_states)
  Eigen::VectorXd alpha0;

  int n_states() const { return static_cast<int>(V.cols()); }
  Eigen::VectorXd surface(int i) const { return V.col(i); }
  Eigen::VectorXd dipole(int m, int n) const;
};

ElectronicStructureTable bo_scan(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                                 int n_states, int threads = 1);
ElectronicStructureTable table_from_slices(const ShinMetiuParams& p, const GridSpec& x_grid,
                                           const GridSpec& R_grid, const std::vector<ElectronicSlice>& slices);

struct VibrationalLevels {
  Eigen::VectorXd energies;
  Eigen::MatrixXd states;      // DVR coefficients on the table's R nodes
  Eigen::VectorXd sign_R;      // <sign(R)>
  std::vector<int> side;       // -1 left, +1 right, 0 delocalized
};

VibrationalLevels vibrational_levels(const ElectronicStructureTable& table, double M, int n_levels = 10);
VibrationalLevels nuclear_levels(const Grid1D<double>& grid_R, const Eigen::VectorXd& V, double M,
                                 int n_levels);

enum class Well { left, right };

struct HarmonicFit {
  double R0 = 0.0;
  double V0 = 0.0;
  double curvature = 0.0;
  double omega_nu = 0.0;
  double dmu = 0.0;
  double mu_v = 0.0;
  double mu0 = 0.0;
  double alpha0 = 0.0;
};

HarmonicFit harmonic_fit(const ElectronicStructureTable& table, double M, Well which);

struct BarrierTop {
  double R = 0.0;
  double V = 0.0;
};
BarrierTop barrier_top(const ElectronicStructureTable& table);

}  // namespace cavchem
