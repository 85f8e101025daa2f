#include "cavchem/perturbation.hpp"

#include <cmath>
#include <string>

namespace cavchem {

namespace {

void check_stable(double alpha0, double lambda) {
  if (lambda * lambda * alpha0 >= 1.0)
    throw DomainError("lambda^2 alpha0 >= 1: photon potential is unbounded (lambda^2 alpha0 = " +
                      std::to_string(lambda * lambda * alpha0) + ")");
}

}  // namespace

double pert_surface(double V0, double mu0, double alpha0, double lambda, double omega_c, double q) {
  const double w2q2 = omega_c * omega_c * q * q;
  return V0 + 0.5 * w2q2 + lambda * omega_c * q * mu0 - 0.5 * lambda * lambda * w2q2 * alpha0;
}

double q_min(double mu0, double alpha0, double lambda, double omega_c) {
  if (!(omega_c > 0.0)) throw ValidationError("q_min: omega_c must be positive");
  check_stable(alpha0, lambda);
  return -(lambda / omega_c) * mu0 / (1.0 - lambda * lambda * alpha0);
}

double pert_path(double V0, double mu0, double lambda) { return V0 - 0.5 * lambda * lambda * mu0 * mu0; }

double effective_frequency(double alpha0, double lambda, double omega_c) {
  check_stable(alpha0, lambda);
  return omega_c - 0.5 * lambda * lambda * omega_c * alpha0;
}

double london_zpe_shift(double alpha0, double lambda, double omega_c) {
  return 0.5 * (effective_frequency(alpha0, lambda, omega_c) - omega_c);
}

double vibrational_zpe_shift(double omega_c, double omega_v, double Omega_R) {
  if (!(omega_c > 0.0) || !(omega_v > 0.0)) throw ValidationError("vibrational_zpe_shift: frequencies must be positive");
  return -omega_c * Omega_R * Omega_R / (4.0 * omega_v * (omega_c + omega_v));
}

PerturbativeSurface::PerturbativeSurface(Eigen::VectorXd V0, Eigen::VectorXd mu0, Eigen::VectorXd alpha0,
                                         double lambda, double omega_c)
    : V0_(std::move(V0)), mu0_(std::move(mu0)), alpha0_(std::move(alpha0)), lambda_(lambda), omega_c_(omega_c) {
  if (V0_.size() != mu0_.size() || V0_.size() != alpha0_.size())
    throw ValidationError("PerturbativeSurface: column lengths differ");
  if (!(omega_c_ > 0.0)) throw ValidationError("PerturbativeSurface: omega_c must be positive");
  if (V0_.size() > 0) check_stable(alpha0_.maxCoeff(), lambda_);
}

double PerturbativeSurface::operator()(Eigen::Index i, double q) const {
  return pert_surface(V0_(i), mu0_(i), alpha0_(i), lambda_, omega_c_, q);
}

Eigen::MatrixXd PerturbativeSurface::grid(const Eigen::VectorXd& q) const {
  Eigen::MatrixXd out(V0_.size(), q.size());
  for (Eigen::Index i = 0; i < V0_.size(); ++i)
    for (Eigen::Index j = 0; j < q.size(); ++j) out(i, j) = (*this)(i, q(j));
  return out;
}

double PerturbativeSurface::q_min(Eigen::Index i) const { return cavchem::q_min(mu0_(i), alpha0_(i), lambda_, omega_c_); }
double PerturbativeSurface::path(Eigen::Index i) const { return pert_path(V0_(i), mu0_(i), lambda_); }
double PerturbativeSurface::effective_frequency(Eigen::Index i) const {
  return cavchem::effective_frequency(alpha0_(i), lambda_, omega_c_);
}

void validate(const ModeSet& modes) {
  for (const auto& m : modes) {
    if (!(m.omega > 0.0)) throw ValidationError("ModeSet: mode frequency must be positive");
    if (!(m.lambda >= 0.0)) throw ValidationError("ModeSet: coupling must be non-negative");
    if (std::abs(m.polarization.norm() - 1.0) > 1e-10) throw ValidationError("ModeSet: polarization must be unit");
  }
}

MultimodeShift multimode_shift(double mu0, double alpha0, const ModeSet& modes) {
  validate(modes);
  MultimodeShift s;
  for (const auto& m : modes) {
    const double l2 = m.lambda * m.lambda;
    const double debye = -0.5 * l2 * mu0 * mu0;
    const double london = -0.25 * l2 * m.omega * alpha0;
    s.debye += debye;
    s.london += london;
    s.per_mode.push_back(debye + london);
  }
  s.total = s.debye + s.london;
  return s;
}

MultimodeShift multimode_shift(const Eigen::Vector3d& mu0, const Eigen::Matrix3d& alpha0, const ModeSet& modes) {
  validate(modes);
  MultimodeShift s;
  for (const auto& m : modes) {
    const double proj = m.lambda * m.polarization.dot(mu0);
    const double debye = -0.5 * proj * proj;
    const double london = -0.25 * m.lambda * m.lambda * m.omega * m.polarization.dot(alpha0 * m.polarization);
    s.debye += debye;
    s.london += london;
    s.per_mode.push_back(debye + london);
  }
  s.total = s.debye + s.london;
  return s;
}

SphereMode sphere_mode_drude(double omega_p, double a) {
  if (!(omega_p > 0.0) || !(a > 0.0)) throw ValidationError("sphere_mode_drude: parameters must be positive");
  SphereMode s;
  s.a = a;
  s.model = DielectricModel::drude;
  s.omega_p = omega_p;
  s.omega_0 = omega_p / std::sqrt(3.0);
  s.mu_eg = std::sqrt(s.omega_0 * a * a * a / 2.0);
  return s;
}

SphereMode sphere_mode_lorentz(double omega_ph, double omega_f, double a) {
  if (!(omega_ph > 0.0) || !(omega_f > 0.0) || !(a > 0.0))
    throw ValidationError("sphere_mode_lorentz: parameters must be positive");
  SphereMode s;
  s.a = a;
  s.model = DielectricModel::lorentz;
  s.omega_ph = omega_ph;
  s.omega_f = omega_f;
  s.omega_0 = std::sqrt(omega_ph * omega_ph + omega_f * omega_f / 3.0);
  s.mu_eg = omega_f * std::sqrt(a * a * a / (6.0 * s.omega_0));
  return s;
}

double alpha_q(const SphereMode& s, double omega) {
  return 2.0 * s.mu_eg * s.mu_eg * s.omega_0 / (s.omega_0 * s.omega_0 - omega * omega);
}

double alpha_classical(const SphereMode& s, double omega) {
  double eps;
  if (s.model == DielectricModel::drude) {
    eps = 1.0 - s.omega_p * s.omega_p / (omega * omega);
    if (omega == 0.0) return s.a * s.a * s.a;  // metallic static limit
  } else {
    eps = 1.0 + s.omega_f * s.omega_f / (s.omega_ph * s.omega_ph - omega * omega);
  }
  return s.a * s.a * s.a * (eps - 1.0) / (eps + 2.0);
}

Eigen::Vector3d dipole_field(const Eigen::Vector3d& p, const Eigen::Vector3d& r) {
  const double d = r.norm();
  if (d == 0.0) throw DomainError("dipole_field: evaluation at the dipole position");
  const double d3 = d * d * d;
  return (3.0 * p.dot(r) * r / (d * d) - p) / d3;
}

ModeSet sphere_mode_set(const SphereMode& s, const Eigen::Vector3d& r_m) {
  if (r_m.norm() <= s.a) throw DomainError("sphere_mode_set: molecule inside the sphere");
  ModeSet modes;
  const double scale = std::sqrt(2.0 / s.omega_0) * s.mu_eg;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d l = scale * dipole_field(Eigen::Vector3d::Unit(k), r_m);
    CavityModeEntry m;
    m.omega = s.omega_0;
    m.lambda = l.norm();
    m.polarization = m.lambda > 0.0 ? Eigen::Vector3d(l / m.lambda) : Eigen::Vector3d::Unit(k);
    modes.push_back(m);
  }
  return modes;
}

VdwDecomposition vdw_decomposition(const SphereMode& s, const Eigen::Vector3d& r_m, const Eigen::Vector3d& mu0,
                                   const Eigen::Matrix3d& alpha0) {
  if (r_m.norm() <= s.a) throw DomainError("vdw_decomposition: molecule must lie outside the sphere");
  VdwDecomposition d;
  d.modes = sphere_mode_set(s, r_m);
  const auto shift = multimode_shift(mu0, alpha0, d.modes);
  d.debye = shift.debye;
  d.london = shift.london;
  return d;
}

}  // namespace cavchem
