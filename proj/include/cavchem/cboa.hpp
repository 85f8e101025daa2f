#pragma once

#include <Eigen/Dense>

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cavchem/coupled.hpp"
#include "cavchem/shin_metiu.hpp"

namespace cavchem {

// Lowest eigenvalue of diag(V) + w q lambda mu + w^2 q^2 / 2 in a truncated
// electronic basis.
double cboa_energy(const Eigen::VectorXd& V, const Eigen::MatrixXd& mu, double lambda, double omega_c, double q);

struct CboaSurface {
  Eigen::VectorXd R;
  Eigen::VectorXd q;
  Eigen::MatrixXd V;  // (n_R, n_q)
  double lambda = 0.0;
  double omega_c = 0.0;
  int n_states = 0;
};

// Default q grid: 64 points over +-4 (lambda max|mu_00| / w + sqrt(1 / (2 w))).
Eigen::VectorXd default_q_grid(const ElectronicStructureTable& table, const CavityMode& mode, int points = 64);

CboaSurface cboa_surface(const ElectronicStructureTable& table, const CavityMode& mode, const Eigen::VectorXd& q_grid,
                         int n_states = -1, int threads = 1);

enum class BranchPolicy { connected, global };

struct MinimumPath {
  Eigen::VectorXd R;
  Eigen::VectorXd q_m;
  Eigen::VectorXd V;
  std::vector<std::string> warnings;
};

// Per-R minimum in q. `connected` follows the branch continuously linked to
// the perturbative displacement; `global` takes the lowest grid minimum.
// Both refine with Brent on the exact electronic energy at that R.
MinimumPath minimum_path(const CboaSurface& surface, const ElectronicStructureTable& table,
                         BranchPolicy policy = BranchPolicy::connected);

// Evaluates the surface at arbitrary (R, q) with direct electronic solves.
class CboaModel {
 public:
  CboaModel(ShinMetiuParams params, GridSpec x_grid, CavityMode mode, int n_states = default_electronic_states);

  double energy(double R, double q) const;
  const CavityMode& mode() const { return mode_; }
  const ShinMetiuParams& params() const { return params_; }
  int n_states() const { return n_states_; }
  // Electronic energies and dipoles at R (memoized).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> electronic(double R) const;

 private:
  ShinMetiuParams params_;
  GridSpec x_spec_;
  Grid1D<double> grid_x_;
  CavityMode mode_;
  int n_states_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::pair<Eigen::VectorXd, Eigen::MatrixXd>> memo_;
};

enum class PointKind { minimum, saddle, maximum };

struct CriticalPoint {
  double R = 0.0;
  double q = 0.0;
  double V = 0.0;
  PointKind kind = PointKind::minimum;
  bool converged = false;
  int iterations = 0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();  // plain (R, q) second derivatives
  Eigen::Vector2d hessian_eigenvalues = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian_eigenvectors = Eigen::Matrix2d::Identity();
};

struct CriticalPointReport {
  std::vector<CriticalPoint> minima;
  std::vector<CriticalPoint> saddles;
  std::vector<CriticalPoint> others;
  double barrier = 0.0;  // saddle minus reactant (left) minimum
  std::vector<std::string> warnings;
};

struct NewtonOptions {
  double h_R = 1e-3;
  double h_q_scale = 1e-3;  // h_q = scale * sqrt(1 / omega_c)
  double energy_tol = 1e-10;
  int max_iterations = 50;
};

// Gradient and Hessian by central differences at (R, q).
void finite_difference_derivatives(const CboaModel& model, double R, double q, const NewtonOptions& opt,
                                   Eigen::Vector2d& grad, Eigen::Matrix2d& hess);

CriticalPoint newton_critical_point(const CboaModel& model, double R, double q, const NewtonOptions& opt = {});

// Seeds: bare minima and barrier top of `table`, shifted to the perturbative q.
CriticalPointReport critical_points(const CboaModel& model, const ElectronicStructureTable& table,
                                    const NewtonOptions& opt = {});

struct NormalModeReport {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  double Omega_R = 0.0;
  double E_zp = 0.0;
  double zpe_vibrational_correction = 0.0;  // second-order coupled-oscillator term
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();  // mass-weighted Hessian
  Eigen::Matrix2d eigenvectors = Eigen::Matrix2d::Identity();
};

Eigen::Matrix2d mass_weighted_hessian(const Eigen::Matrix2d& hessian, double M);
NormalModeReport hessian_normal_modes(const CriticalPoint& point, double M, double omega_c);

// Positive-mode zero-point energy at the saddle minus that at the minimum.
double zero_point_correction(const CriticalPointReport& report, double M);

double tst_rate_ratio(double E_b_coupled, double E_b_bare, double T);

// (N+1) x (N+1) mass-weighted Hessian of N identical oscillators (w_v, mass-weighted
// dipole derivative dmu_mw) coupled to one mode; returns its square-root spectrum.
Eigen::VectorXd collective_normal_modes(int N, double omega_v, double omega_c, double lambda, double dmu_mw);

}  // namespace cavchem
