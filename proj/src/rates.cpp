#include "cavchem/rates.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cavchem/numerics.hpp"
#include "cavchem/parallel.hpp"

namespace cavchem {

double DividingSurface::reactant_weight(double R) const {
  const double s = R - position;
  if (std::abs(s) <= 1e-12 * std::max(1.0, std::abs(position))) return 0.5;
  return (s < 0.0) == (reactant_side < 0) ? 1.0 : 0.0;
}

namespace {

void check_surface(const MolecularBasis& b, const DividingSurface& surf) {
  if (b.R_nodes.size() == 0) throw ValidationError("flux: molecular basis carries no nuclear grid");
  if (!(surf.position > b.R_nodes.minCoeff() && surf.position < b.R_nodes.maxCoeff()))
    throw ValidationError("flux: dividing surface outside the nuclear grid");
  if (surf.reactant_side != -1 && surf.reactant_side != 1)
    throw ValidationError("flux: reactant_side must be -1 or +1");
}

// Y = (A (x) 1_nf) S for S with rows indexed m * nf + f.
Eigen::MatrixXd kron_identity_apply(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S, Eigen::Index nf) {
  const Eigen::Index nm = A.rows();
  Eigen::MatrixXd Y(S.rows(), S.cols());
  for (Eigen::Index c = 0; c < S.cols(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> s(S.col(c).data(), nf, nm);
    Eigen::Map<Eigen::MatrixXd> y(Y.col(c).data(), nf, nm);
    y.noalias() = s * A.transpose();
  }
  return Y;
}

Eigen::MatrixXd lift_to_coupled(const CoupledEigensystem& sys, const Eigen::MatrixXd& A, Eigen::Index n) {
  const auto S = sys.states.leftCols(n);
  const Eigen::MatrixXd Y = kron_identity_apply(A, S, sys.mode.n_fock);
  return S.transpose() * Y;
}

Eigen::Index resolve_count(const CoupledEigensystem& sys, Eigen::Index n) {
  if (n < 0 || n > sys.size()) return sys.size();
  return n;
}

}  // namespace

Eigen::MatrixXd reactant_projector(const CoupledEigensystem& sys, const DividingSurface& surf, Eigen::Index n_states) {
  if (!sys.basis) throw ValidationError("flux: eigensystem lacks position-basis coefficients");
  const auto& b = *sys.basis;
  check_surface(b, surf);
  const Eigen::Index n = resolve_count(sys, n_states);
  Eigen::VectorXd w(b.product_R.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = surf.reactant_weight(b.product_R(i));
  Eigen::MatrixXd hm = b.coefficients.transpose() * w.asDiagonal() * b.coefficients;
  hm = (0.5 * (hm + hm.transpose())).eval();
  Eigen::MatrixXd h = lift_to_coupled(sys, hm, n);
  return 0.5 * (h + h.transpose());
}

FluxMatrix commutator_flux(const Eigen::VectorXd& energies, const Eigen::MatrixXd& projector) {
  const Eigen::Index n = projector.rows();
  FluxMatrix F;
  F.form = FluxForm::commutator;
  F.imag.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) F.imag(i, j) = (energies(i) - energies(j)) * projector(i, j);
  F.imag.diagonal().setZero();
  return F;
}

FluxMatrix flux_matrix(const CoupledEigensystem& sys, const DividingSurface& surf, FluxForm form,
                       Eigen::Index n_states) {
  if (!sys.basis) throw ValidationError("flux: eigensystem lacks position-basis coefficients");
  const Eigen::Index n = resolve_count(sys, n_states);
  if (form == FluxForm::commutator)
    return commutator_flux(sys.energies.head(n), reactant_projector(sys, surf, n));

  const auto& b = *sys.basis;
  check_surface(b, surf);
  Eigen::Index k0 = -1;
  for (Eigen::Index k = 0; k < b.R_nodes.size(); ++k)
    if (std::abs(b.R_nodes(k) - surf.position) < 1e-10) k0 = k;
  if (k0 < 0) throw ValidationError("symmetrized-delta flux needs a grid node on the dividing surface");
  const Eigen::Index ne = b.n_electronic;
  const double inv_w = 1.0 / b.R_weights(k0);
  // (D delta + delta D) with delta = 1/W on the rows of node k0.
  Eigen::MatrixXd dc = b.nuclear_derivative * b.coefficients;  // D C
  Eigen::MatrixXd a = inv_w * b.coefficients.middleRows(k0 * ne, ne).transpose() * dc.middleRows(k0 * ne, ne);
  Eigen::MatrixXd am = a - a.transpose();  // C^T delta D C + C^T D delta C, D antisymmetric
  // Orientation follows i (E_m - E_n) h_mn with h the reactant side.
  const double sign = surf.reactant_side < 0 ? 1.0 : -1.0;
  am *= sign / (2.0 * b.mass);
  FluxMatrix F;
  F.form = FluxForm::symmetrized_delta;
  F.imag = lift_to_coupled(sys, am, n);
  F.imag = (0.5 * (F.imag - F.imag.transpose())).eval();
  return F;
}

namespace {

struct PairWeights {
  std::vector<double> w;
  std::vector<double> omega;
};

PairWeights pair_weights(const Eigen::VectorXd& energies, const FluxMatrix& F, double T) {
  const double beta = units::beta(T);
  const Eigen::Index n = F.imag.rows();
  const double e0 = energies(0);
  PairWeights p;
  double wmax = 0.0;
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const double f = F.imag(i, j);
      const double w = 2.0 * std::exp(-0.5 * beta * (energies(i) + energies(j) - 2.0 * e0)) * f * f;
      wmax = std::max(wmax, w);
    }
  const double cut = 1e-18 * wmax;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const double f = F.imag(i, j);
      const double w = 2.0 * std::exp(-0.5 * beta * (energies(i) + energies(j) - 2.0 * e0)) * f * f;
      if (w > cut && w > 0.0) {
        p.w.push_back(w);
        p.omega.push_back(energies(i) - energies(j));
      }
    }
  return p;
}

}  // namespace

double cff(const Eigen::VectorXd& energies, const FluxMatrix& F, double T, double t) {
  if (energies.size() < F.imag.rows()) throw ValidationError("cff: fewer energies than flux rows");
  const auto p = pair_weights(energies, F, T);
  double c = 0.0;
  for (std::size_t i = 0; i < p.w.size(); ++i) c += p.w[i] * std::cos(p.omega[i] * t);
  return c;
}

double lowest_discarded_energy(const CoupledEigensystem& sys) {
  if (!sys.basis) return std::numeric_limits<double>::infinity();
  const auto& b = *sys.basis;
  double e = b.e_cut + 0.5 * sys.mode.omega_c;
  if (sys.mode.lambda > 0.0) e = std::min(e, b.energies(0) + sys.mode.omega_c * (sys.mode.n_fock + 0.5));
  return e;
}

double cff(const CoupledEigensystem& sys, const FluxMatrix& F, double T, double t) {
  const double weight = std::exp(-units::beta(T) * (lowest_discarded_energy(sys) - sys.energies(0)));
  if (weight > RateOptions{}.discard_tolerance)
    throw NumericalError("cff: insufficient retained states for the requested temperature");
  return cff(sys.energies, F, T, t);
}

SpectralRateData spectral_data(const CoupledEigensystem& sys, double T_max, const RateOptions& opt) {
  const double window = opt.window_kT * units::boltzmann * T_max;
  Eigen::Index n = 0;
  while (n < sys.size() && sys.energies(n) - sys.energies(0) <= window) ++n;
  n = std::max<Eigen::Index>(n, std::min<Eigen::Index>(2, sys.size()));
  SpectralRateData d;
  d.energies = sys.energies.head(n);
  d.projector = reactant_projector(sys, opt.surface, n);
  d.flux = opt.form == FluxForm::commutator ? commutator_flux(d.energies, d.projector)
                                            : flux_matrix(sys, opt.surface, opt.form, n);
  d.lowest_discarded = lowest_discarded_energy(sys);
  return d;
}

CorrelationResult rate_from_spectrum(const SpectralRateData& d, double T, const RateOptions& opt) {
  if (!(T > 0.0)) throw ValidationError("rate: temperature must be positive");
  if (!(opt.dt > 0.0) || !(opt.t_max >= opt.t_f) || !(opt.t_f > 0.0))
    throw ValidationError("rate: t_f must lie within the sampled times");
  const double steps_f = opt.t_f / opt.dt;
  if (std::abs(steps_f - std::round(steps_f)) > 1e-9 * steps_f)
    throw ValidationError("rate: t_f must be a multiple of the time step");
  const double beta = units::beta(T);
  const double e0 = d.energies(0);
  const double discarded = std::exp(-beta * (d.lowest_discarded - e0));
  if (discarded > opt.discard_tolerance) {
    std::ostringstream os;
    os << "insufficient retained states for T = " << T << " K (lowest discarded state weight " << discarded << ")";
    throw NumericalError(os.str());
  }

  CorrelationResult r;
  r.T = T;
  r.t_f = opt.t_f;
  r.E_0 = e0;
  r.form = d.flux.form;
  const auto nt = static_cast<Eigen::Index>(std::llround(opt.t_max / opt.dt)) + 1;
  r.times = Eigen::VectorXd::LinSpaced(nt, 0.0, opt.dt * static_cast<double>(nt - 1));
  r.C_ff = Eigen::VectorXd::Zero(nt);
  const auto p = pair_weights(d.energies, d.flux, T);
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    // cos(j x) by the Chebyshev recurrence.
    const double c1 = std::cos(p.omega[i] * opt.dt);
    double prev = 1.0, cur = c1;
    r.C_ff(0) += p.w[i];
    if (nt > 1) r.C_ff(1) += p.w[i] * c1;
    for (Eigen::Index j = 2; j < nt; ++j) {
      const double next = 2.0 * c1 * cur - prev;
      prev = cur;
      cur = next;
      r.C_ff(j) += p.w[i] * cur;
    }
  }
  r.Q_r = 0.0;
  for (Eigen::Index m = 0; m < d.energies.size(); ++m)
    r.Q_r += d.projector(m, m) * std::exp(-beta * (d.energies(m) - e0));
  if (!(r.Q_r > 0.0)) throw NumericalError("rate: reactant partition function is not positive");
  r.k = numerics::trapezoid(r.times, r.C_ff, opt.t_f) / r.Q_r;
  if (r.k < 0.0) {
    std::ostringstream os;
    os << "negative rate k = " << r.k << " at T = " << T << " K (nonphysical truncation; C_ff(0) = " << r.C_ff(0)
       << ", Q_r = " << r.Q_r << ", states = " << d.energies.size() << ")";
    throw NumericalError(os.str());
  }
  return r;
}

CorrelationResult quantum_rate(const CoupledEigensystem& sys, double T, const RateOptions& opt) {
  return rate_from_spectrum(spectral_data(sys, T, opt), T, opt);
}

std::vector<CorrelationResult> quantum_rates(const CoupledEigensystem& sys, const std::vector<double>& temperatures,
                                             const RateOptions& opt, int threads) {
  if (temperatures.empty()) throw ValidationError("quantum_rates: empty temperature list");
  double t_max = 0.0;
  for (double T : temperatures) t_max = std::max(t_max, T);
  const auto data = spectral_data(sys, t_max, opt);
  return parallel_map<CorrelationResult>(temperatures.size(), threads,
                                         [&](std::size_t i) { return rate_from_spectrum(data, temperatures[i], opt); });
}

ArrheniusFit arrhenius_fit(const std::vector<double>& T, const std::vector<double>& k, double r2_threshold) {
  if (T.size() != k.size()) throw ValidationError("arrhenius_fit: temperature and rate lists differ in length");
  if (T.size() < 4) throw ValidationError("arrhenius_fit: need at least 4 temperatures");
  Eigen::VectorXd x(static_cast<Eigen::Index>(T.size())), y(x.size());
  for (std::size_t i = 0; i < T.size(); ++i) {
    if (!(T[i] > 0.0) || !(k[i] > 0.0)) throw ValidationError("arrhenius_fit: temperatures and rates must be positive");
    x(static_cast<Eigen::Index>(i)) = 1.0 / T[i];
    y(static_cast<Eigen::Index>(i)) = std::log(k[i] / T[i]);
  }
  const auto f = numerics::fit_line(x, y);
  ArrheniusFit a;
  a.E_b_eff = -f.slope * units::boltzmann;
  a.prefactor = std::exp(f.intercept);
  a.T_min = *std::min_element(T.begin(), T.end());
  a.T_max = *std::max_element(T.begin(), T.end());
  a.r_squared = f.r_squared;
  a.rms_residual = f.rms_residual;
  a.linear = f.r_squared >= r2_threshold;
  return a;
}

std::vector<double> default_temperatures() {
  std::vector<double> t;
  for (int i = 0; i < 8; ++i) t.push_back(250.0 + 200.0 * i / 7.0);
  return t;
}

int adaptive_n_fock(const MolecularBasis& basis, double lambda, double omega_c, double T,
                    const FrequencyScanOptions& opt) {
  const double mu_max = basis.dipole.diagonal().cwiseAbs().maxCoeff();
  const double span = opt.fock_window_kT * units::boltzmann * T + lambda * lambda * mu_max * mu_max;
  const int n = static_cast<int>(std::ceil(span / omega_c)) + 4;
  return std::max(opt.n_fock_min, n);
}

std::vector<FrequencyPoint> rate_vs_frequency(std::shared_ptr<const MolecularBasis> basis, double lambda,
                                              const std::vector<double>& omegas, double T,
                                              const FrequencyScanOptions& opt) {
  if (!basis) throw ValidationError("rate_vs_frequency: missing molecular basis");
  if (omegas.empty()) throw ValidationError("rate_vs_frequency: empty frequency list");
  CavityMode bare;
  bare.omega_c = omegas.front();
  bare.lambda = 0.0;
  bare.n_fock = 1;
  const double k0 = quantum_rate(solve_coupled(basis, bare), T, opt.rate).k;
  return parallel_map<FrequencyPoint>(omegas.size(), opt.threads, [&](std::size_t i) {
    FrequencyPoint p;
    p.omega_c = omegas[i];
    try {
      CavityMode mode;
      mode.omega_c = omegas[i];
      mode.lambda = lambda;
      mode.n_fock = adaptive_n_fock(*basis, lambda, omegas[i], T, opt);
      p.n_fock = mode.n_fock;
      const auto sys = solve_coupled(basis, mode, opt.max_dimension);
      p.k = quantum_rate(sys, T, opt.rate).k;
      p.ratio = p.k / k0;
      p.ok = true;
      p.status = "ok";
    } catch (const std::exception& e) {
      p.ok = false;
      p.status = e.what();
    }
    return p;
  });
}

namespace {

struct Nuclear1D {
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;
};

Nuclear1D solve_1d(const Grid1D<double>& g, double M, const Eigen::VectorXd& V) {
  if (V.size() != g.size()) throw ValidationError("nuclear rate: potential does not match the grid");
  Eigen::MatrixXd h = g.kinetic / M;
  h.diagonal() += V;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("nuclear rate: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

SpectralRateData spectral_1d(const Grid1D<double>& g, const Nuclear1D& s, double T, const RateOptions& opt) {
  if (!(opt.surface.position > g.nodes.minCoeff() && opt.surface.position < g.nodes.maxCoeff()))
    throw ValidationError("nuclear rate: dividing surface outside the grid");
  const double window = opt.window_kT * units::boltzmann * T;
  Eigen::Index n = 0;
  while (n < s.energies.size() && s.energies(n) - s.energies(0) <= window) ++n;
  n = std::max<Eigen::Index>(n, 2);
  Eigen::VectorXd w(g.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = opt.surface.reactant_weight(g.nodes(i));
  const auto U = s.vectors.leftCols(n);
  SpectralRateData d;
  d.energies = s.energies.head(n);
  d.projector = U.transpose() * w.asDiagonal() * U;
  d.projector = (0.5 * (d.projector + d.projector.transpose())).eval();
  d.flux = commutator_flux(d.energies, d.projector);
  d.lowest_discarded = std::numeric_limits<double>::infinity();
  return d;
}

}  // namespace

CorrelationResult nuclear_rate_1d(const Grid1D<double>& grid_R, double M, const Eigen::VectorXd& V, double T,
                                  const RateOptions& opt) {
  const auto s = solve_1d(grid_R, M, V);
  return rate_from_spectrum(spectral_1d(grid_R, s, T, opt), T, opt);
}

AdiabaticRate adiabatic_limit_rate(const ElectronicStructureTable& table, const CavityMode& mode, AdiabaticLimit limit,
                                   double T, const AdiabaticOptions& opt) {
  mode.validate();
  const int n = opt.n_states < 0 ? table.n_states() : opt.n_states;
  if (n < 1 || n > table.n_states()) throw ValidationError("adiabatic_limit_rate: n_states outside the table's range");
  const auto g = build_grid(table.R_grid_spec);
  if (g.size() != table.R.size()) throw ValidationError("adiabatic_limit_rate: table does not match its grid");
  const double M = table.params.M;
  AdiabaticRate out;

  if (limit == AdiabaticLimit::high) {
    const auto surface = cboa_surface(table, mode, default_q_grid(table, mode), n);
    const auto path = minimum_path(surface, table, BranchPolicy::connected);
    out.path_V = path.V;
    out.k = nuclear_rate_1d(g, M, path.V, T, opt.rate).k;
    return out;
  }

  const double kT = units::boltzmann * T;
  Eigen::VectorXd q;
  if (opt.q_grid) {
    q = *opt.q_grid;
  } else {
    const auto left = harmonic_fit(table, M, Well::left);
    const double centre = -mode.lambda * left.mu0 / mode.omega_c;
    const double half = opt.q_span_sigma * std::sqrt(kT) / mode.omega_c;
    q = Eigen::VectorXd::LinSpaced(opt.n_q, centre - half, centre + half);
  }
  if (q.size() < 3) throw ValidationError("adiabatic_limit_rate: q grid needs at least 3 points");
  const double beta = units::beta(T);
  out.q = q;
  out.k_q.resize(q.size());
  Eigen::VectorXd energy(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    Eigen::VectorXd V(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k)
      V(k) = cboa_energy(table.V.row(k).head(n).transpose(), table.mu[static_cast<std::size_t>(k)].topLeftCorner(n, n),
                         mode.lambda, mode.omega_c, q(j));
    const auto s = solve_1d(g, M, V);
    const auto d = spectral_1d(g, s, T, opt.rate);
    out.k_q(j) = rate_from_spectrum(d, T, opt.rate).k;
    // Reactant-projected thermal averages.
    double z = 0.0, ez = 0.0;
    for (Eigen::Index m = 0; m < d.energies.size(); ++m) {
      const double b = d.projector(m, m) * std::exp(-beta * (d.energies(m) - d.energies(0)));
      z += b;
      ez += b * d.energies(m);
    }
    energy(j) = opt.weight == LowFrequencyWeight::mean_energy ? ez / z : d.energies(0) - kT * std::log(z);
  }
  out.weights = (-(energy.array() - energy.minCoeff()) / kT).exp();
  const double edge = std::max(out.weights(0), out.weights(q.size() - 1));
  if (edge > opt.coverage_tolerance)
    throw NumericalError("adiabatic_limit_rate: q grid does not cover the thermal spread");
  out.weights /= out.weights.sum();
  out.k = out.weights.dot(out.k_q);
  return out;
}

}  // namespace cavchem
