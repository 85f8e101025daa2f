#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cavchem/errors.hpp"

namespace cavchem {

// Second-order cavity surface V0 + w^2 q^2/2 + lambda w q mu0 - lambda^2 w^2 q^2 alpha0 / 2.
double pert_surface(double V0, double mu0, double alpha0, double lambda, double omega_c, double q);

// Tabulated second-order surface; rejects lambda^2 alpha0 >= 1 anywhere.
class PerturbativeSurface {
 public:
  PerturbativeSurface(Eigen::VectorXd V0, Eigen::VectorXd mu0, Eigen::VectorXd alpha0, double lambda, double omega_c);

  double operator()(Eigen::Index i, double q) const;
  Eigen::MatrixXd grid(const Eigen::VectorXd& q) const;
  double q_min(Eigen::Index i) const;
  double path(Eigen::Index i) const;  // V0 - lambda^2 mu0^2 / 2
  double effective_frequency(Eigen::Index i) const;
  Eigen::Index size() const { return V0_.size(); }

 private:
  Eigen::VectorXd V0_, mu0_, alpha0_;
  double lambda_, omega_c_;
};

// -(lambda / w) mu0 / (1 - lambda^2 alpha0).
double q_min(double mu0, double alpha0, double lambda, double omega_c);
double pert_path(double V0, double mu0, double lambda);
// w - (lambda^2 / 2) w alpha0.
double effective_frequency(double alpha0, double lambda, double omega_c);
double london_zpe_shift(double alpha0, double lambda, double omega_c);
// -w_c Omega_R^2 / (4 w_v (w_c + w_v)).
double vibrational_zpe_shift(double omega_c, double omega_v, double Omega_R);

struct CavityModeEntry {
  double omega = 0.0;
  double lambda = 0.0;
  Eigen::Vector3d polarization = Eigen::Vector3d::UnitZ();
};
using ModeSet = std::vector<CavityModeEntry>;

void validate(const ModeSet& modes);

struct MultimodeShift {
  double total = 0.0;
  double debye = 0.0;
  double london = 0.0;
  std::vector<double> per_mode;
};

// -sum_k (lambda_k^2 / 2)(mu0^2 + w_k alpha0 / 2), dipole fully projected on each mode.
MultimodeShift multimode_shift(double mu0, double alpha0, const ModeSet& modes);
// Vector form: Debye uses (lambda_k eps_k . mu0), London uses eps_k^T alpha eps_k.
MultimodeShift multimode_shift(const Eigen::Vector3d& mu0, const Eigen::Matrix3d& alpha0, const ModeSet& modes);

enum class DielectricModel { drude, lorentz };

struct SphereMode {
  double a = 0.0;  // radius
  DielectricModel model = DielectricModel::drude;
  double omega_p = 0.0;   // drude plasma frequency
  double omega_ph = 0.0;  // lorentz phonon frequency
  double omega_f = 0.0;   // lorentz oscillator strength frequency
  double omega_0 = 0.0;
  double mu_eg = 0.0;
};

SphereMode sphere_mode_drude(double omega_p, double a);
SphereMode sphere_mode_lorentz(double omega_ph, double omega_f, double a);
// Quantized-oscillator polarizability a^3 w0^2 / (w0^2 - w^2).
double alpha_q(const SphereMode& s, double omega);
// Classical small-sphere polarizability a^3 (eps - 1) / (eps + 2) for the same dielectric.
double alpha_classical(const SphereMode& s, double omega);

// Field at r (from the dipole) of a unit dipole along p: (3 (p.r) r / r^5 - p / r^3).
Eigen::Vector3d dipole_field(const Eigen::Vector3d& p, const Eigen::Vector3d& r);

// The sphere's three degenerate dipole modes as seen by a molecule at r_m
// (relative to the sphere centre).
ModeSet sphere_mode_set(const SphereMode& s, const Eigen::Vector3d& r_m);

struct VdwDecomposition {
  double debye = 0.0;
  double london = 0.0;
  ModeSet modes;
};

// alpha0 is the molecular static polarizability tensor.
VdwDecomposition vdw_decomposition(const SphereMode& s, const Eigen::Vector3d& r_m, const Eigen::Vector3d& mu0,
                                   const Eigen::Matrix3d& alpha0);

}  // namespace cavchem
