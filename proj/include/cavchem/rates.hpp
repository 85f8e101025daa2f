#pragma once

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cavchem/cboa.hpp"
#include "cavchem/coupled.hpp"
#include "cavchem/units.hpp"

namespace cavchem {

// s(R) = R - position; the reactant side is where sign(s) == reactant_side.
struct DividingSurface {
  double position = 0.0;
  int reactant_side = -1;

  // 1 on the reactant side, 1/2 on the surface, 0 beyond.
  double reactant_weight(double R) const;
};

enum class FluxForm { commutator, symmetrized_delta };

// F = i * imag, with imag real antisymmetric (F Hermitian, F_mm = 0).
struct FluxMatrix {
  Eigen::MatrixXd imag;
  FluxForm form = FluxForm::commutator;
};

// Eigen-data needed for flux correlation: the lowest states of a spectrum,
// the reactant projector h between them and the flux.
struct SpectralRateData {
  Eigen::VectorXd energies;
  Eigen::MatrixXd projector;
  FluxMatrix flux;
  double lowest_discarded = 0.0;  // lowest energy not representable by the truncated basis
};

Eigen::MatrixXd reactant_projector(const CoupledEigensystem& sys, const DividingSurface& surf, Eigen::Index n_states);
FluxMatrix flux_matrix(const CoupledEigensystem& sys, const DividingSurface& surf,
                       FluxForm form = FluxForm::commutator, Eigen::Index n_states = -1);
FluxMatrix commutator_flux(const Eigen::VectorXd& energies, const Eigen::MatrixXd& projector);

// C_ff(t) = sum_mn exp(-beta (E_m + E_n) / 2) |F_mn|^2 cos((E_m - E_n) t), with
// energies measured from energies(0).
double cff(const Eigen::VectorXd& energies, const FluxMatrix& F, double T, double t);
double cff(const CoupledEigensystem& sys, const FluxMatrix& F, double T, double t);

struct RateOptions {
  double t_f = units::from_fs(35.0);
  double t_max = units::from_fs(50.0);
  double dt = units::from_fs(0.25);
  DividingSurface surface;
  FluxForm form = FluxForm::commutator;
  double discard_tolerance = 1e-6;  // max Boltzmann weight of the lowest discarded state
  double window_kT = 50.0;          // states beyond E_0 + window_kT k_B T are dropped from the sums
};

struct CorrelationResult {
  Eigen::VectorXd times;
  Eigen::VectorXd C_ff;  // scaled by exp(beta E_0), as is Q_r
  double T = 0.0;
  double t_f = 0.0;
  double Q_r = 0.0;
  double k = 0.0;
  double E_0 = 0.0;
  FluxForm form = FluxForm::commutator;
};

SpectralRateData spectral_data(const CoupledEigensystem& sys, double T_max, const RateOptions& opt);
CorrelationResult rate_from_spectrum(const SpectralRateData& data, double T, const RateOptions& opt);
CorrelationResult quantum_rate(const CoupledEigensystem& sys, double T, const RateOptions& opt = {});
std::vector<CorrelationResult> quantum_rates(const CoupledEigensystem& sys, const std::vector<double>& temperatures,
                                             const RateOptions& opt = {}, int threads = 1);

// Lowest energy the truncated coupled basis cannot represent.
double lowest_discarded_energy(const CoupledEigensystem& sys);

struct ArrheniusFit {
  double E_b_eff = 0.0;
  double prefactor = 0.0;  // exp(intercept) of ln(k / T) vs 1 / T
  double T_min = 0.0;
  double T_max = 0.0;
  double r_squared = 0.0;
  double rms_residual = 0.0;
  bool linear = true;
};

ArrheniusFit arrhenius_fit(const std::vector<double>& T, const std::vector<double>& k, double r2_threshold = 0.999);
std::vector<double> default_temperatures();

struct FrequencyScanOptions {
  RateOptions rate;
  int n_fock_min = 8;
  double fock_window_kT = 16.0;
  Eigen::Index max_dimension = default_max_dimension;
  int threads = 1;
};

struct FrequencyPoint {
  double omega_c = 0.0;
  int n_fock = 0;
  double k = 0.0;
  double ratio = 0.0;
  bool ok = false;
  std::string status;
};

// Fock truncation that covers the thermal window and the coupling displacement.
int adaptive_n_fock(const MolecularBasis& basis, double lambda, double omega_c, double T,
                    const FrequencyScanOptions& opt);

// k(lambda, w_c) / k(0) at temperature T for every w_c.
std::vector<FrequencyPoint> rate_vs_frequency(std::shared_ptr<const MolecularBasis> basis, double lambda,
                                              const std::vector<double>& omegas, double T,
                                              const FrequencyScanOptions& opt = {});

// 1D nuclear thermal rate on a potential tabulated at the grid's nodes.
CorrelationResult nuclear_rate_1d(const Grid1D<double>& grid_R, double M, const Eigen::VectorXd& V, double T,
                                  const RateOptions& opt = {});

enum class AdiabaticLimit { high, low };
enum class LowFrequencyWeight { mean_energy, free_energy };

struct AdiabaticOptions {
  RateOptions rate;
  int n_states = -1;        // electronic states in the reduced surface (-1: whole table)
  int n_q = 61;
  double q_span_sigma = 6.0;  // half-width in units of sqrt(k_B T) / w_c
  std::optional<Eigen::VectorXd> q_grid;
  LowFrequencyWeight weight = LowFrequencyWeight::mean_energy;
  double coverage_tolerance = 1e-6;
};

struct AdiabaticRate {
  double k = 0.0;
  Eigen::VectorXd q;
  Eigen::VectorXd weights;  // normalized P(q)
  Eigen::VectorXd k_q;
  Eigen::VectorXd path_V;   // high-frequency effective surface
};

AdiabaticRate adiabatic_limit_rate(const ElectronicStructureTable& table, const CavityMode& mode,
                                   AdiabaticLimit limit, double T, const AdiabaticOptions& opt = {});

}  // namespace cavchem
