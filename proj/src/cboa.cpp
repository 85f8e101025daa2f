#include "cavchem/cboa.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cavchem/numerics.hpp"
#include "cavchem/parallel.hpp"
#include "cavchem/perturbation.hpp"

namespace cavchem {

double cboa_energy(const Eigen::VectorXd& V, const Eigen::MatrixXd& mu, double lambda, double omega_c, double q) {
  const double photon = 0.5 * omega_c * omega_c * q * q;
  if (V.size() == 1) return V(0) + omega_c * q * lambda * mu(0, 0) + photon;
  Eigen::MatrixXd h = (omega_c * q * lambda) * mu;
  h.diagonal() += V;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("cboa_energy: eigensolver did not converge");
  return es.eigenvalues()(0) + photon;
}

Eigen::VectorXd default_q_grid(const ElectronicStructureTable& table, const CavityMode& mode, int points) {
  mode.validate();
  const double mu_max = table.dipole(0, 0).cwiseAbs().maxCoeff();
  const double span = 4.0 * (mode.lambda * mu_max / mode.omega_c + std::sqrt(1.0 / (2.0 * mode.omega_c)));
  return Eigen::VectorXd::LinSpaced(points, -span, span);
}

namespace {

std::pair<Eigen::VectorXd, Eigen::MatrixXd> electronic_at(const ElectronicStructureTable& t, Eigen::Index k, int n) {
  return {t.V.row(k).head(n).transpose(), t.mu[static_cast<std::size_t>(k)].topLeftCorner(n, n)};
}

int resolve_states(const ElectronicStructureTable& t, int n_states) {
  if (n_states < 0) return t.n_states();
  if (n_states < 1 || n_states > t.n_states()) throw ValidationError("cboa: n_states outside the table's range");
  return n_states;
}

}  // namespace

CboaSurface cboa_surface(const ElectronicStructureTable& table, const CavityMode& mode, const Eigen::VectorXd& q_grid,
                         int n_states, int threads) {
  mode.validate();
  const int n = resolve_states(table, n_states);
  if (q_grid.size() < 3) throw ValidationError("cboa_surface: q grid needs at least 3 points");
  const double displacement = mode.lambda * table.dipole(0, 0).cwiseAbs().maxCoeff() / mode.omega_c;
  if (q_grid.cwiseAbs().maxCoeff() < 3.0 * displacement)
    throw ValidationError("cboa_surface: q grid spans less than 3x the perturbative displacement");

  CboaSurface s;
  s.R = table.R;
  s.q = q_grid;
  s.lambda = mode.lambda;
  s.omega_c = mode.omega_c;
  s.n_states = n;
  const auto rows = parallel_map<Eigen::VectorXd>(static_cast<std::size_t>(table.R.size()), threads, [&](std::size_t k) {
    const auto [V, mu] = electronic_at(table, static_cast<Eigen::Index>(k), n);
    Eigen::VectorXd row(q_grid.size());
    for (Eigen::Index j = 0; j < q_grid.size(); ++j) row(j) = cboa_energy(V, mu, mode.lambda, mode.omega_c, q_grid(j));
    return row;
  });
  s.V.resize(table.R.size(), q_grid.size());
  for (Eigen::Index k = 0; k < table.R.size(); ++k) s.V.row(k) = rows[static_cast<std::size_t>(k)].transpose();
  return s;
}

MinimumPath minimum_path(const CboaSurface& s, const ElectronicStructureTable& table, BranchPolicy policy) {
  if (s.R.size() != table.R.size()) throw ValidationError("minimum_path: surface and table R grids differ");
  MinimumPath path;
  const Eigen::Index nR = s.R.size(), nq = s.q.size();
  path.R = s.R;
  path.q_m.resize(nR);
  path.V.resize(nR);
  int edge_descents = 0;
  double lowest_edge_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < nR; ++k) {
    const auto [V, mu] = electronic_at(table, k, s.n_states);
    if (s.lambda == 0.0) {
      path.q_m(k) = 0.0;
      path.V(k) = V(0);
      continue;
    }
    const Eigen::VectorXd col = s.V.row(k).transpose();
    std::vector<Eigen::Index> minima;
    for (Eigen::Index j = 0; j < nq; ++j) {
      const bool left_ok = j == 0 || col(j) <= col(j - 1);
      const bool right_ok = j == nq - 1 || col(j) <= col(j + 1);
      if (left_ok && right_ok) minima.push_back(j);
    }
    Eigen::Index chosen = -1;
    if (policy == BranchPolicy::connected) {
      const double qp = q_min(mu(0, 0), table.alpha0(k), s.lambda, s.omega_c);
      Eigen::Index j = 0;
      (s.q.array() - qp).abs().minCoeff(&j);
      for (;;) {
        if (j > 0 && col(j - 1) < col(j)) --j;
        else if (j < nq - 1 && col(j + 1) < col(j)) ++j;
        else break;
      }
      chosen = j;
    } else {
      chosen = minima.front();
      for (auto j : minima)
        if (col(j) < col(chosen)) chosen = j;
    }
    std::ostringstream where;
    where.precision(8);
    where << "R = " << s.R(k);
    if (chosen == 0 || chosen == nq - 1)
      throw NumericalError("minimum_path: q grid too narrow, minimum at the grid edge (" + where.str() + ")");
    for (auto j : minima) {
      if (j == chosen) continue;
      if (j == 0 || j == nq - 1) {
        // Descent toward the grid edge: not a located minimum, summarized once below.
        ++edge_descents;
        lowest_edge_gap = std::min(lowest_edge_gap, col(j) - col(chosen));
        continue;
      }
      std::ostringstream w;
      w.precision(8);
      w << where.str() << ": additional minimum in q at " << s.q(j) << " (V - V_chosen = " << col(j) - col(chosen)
        << " hartree)";
      path.warnings.push_back(w.str());
    }
    auto f = [&, &V = V, &mu = mu](double q) { return cboa_energy(V, mu, s.lambda, s.omega_c, q); };
    const auto m = numerics::brent_minimize(f, s.q(chosen - 1), s.q(chosen + 1), 1e-12);
    path.q_m(k) = m.x;
    path.V(k) = m.f;
  }
  if (edge_descents > 0) {
    std::ostringstream w;
    w.precision(8);
    w << "surface decreases toward the q-grid edge at " << edge_descents
      << " R nodes; lowest edge value minus the chosen minimum = " << lowest_edge_gap << " hartree";
    path.warnings.push_back(w.str());
  }
  return path;
}

CboaModel::CboaModel(ShinMetiuParams params, GridSpec x_grid, CavityMode mode, int n_states)
    : params_(params), x_spec_(x_grid), grid_x_(build_grid(x_grid)), mode_(mode), n_states_(n_states) {
  params_.validate();
  mode_.validate();
  if (n_states_ < 1) throw ValidationError("CboaModel: n_states must be >= 1");
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> CboaModel::electronic(double R) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(R);
    if (it != memo_.end()) return it->second;
  }
  auto s = solve_electronic(params_, grid_x_, R, n_states_);
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> e{s.energies, s.dipole};
  std::lock_guard<std::mutex> lock(mutex_);
  memo_.emplace(R, e);
  return e;
}

double CboaModel::energy(double R, double q) const {
  const auto [V, mu] = electronic(R);
  return cboa_energy(V, mu, mode_.lambda, mode_.omega_c, q);
}

void finite_difference_derivatives(const CboaModel& model, double R, double q, const NewtonOptions& opt,
                                   Eigen::Vector2d& grad, Eigen::Matrix2d& hess) {
  const double hR = opt.h_R;
  const double hq = opt.h_q_scale * std::sqrt(1.0 / model.mode().omega_c);
  double f[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f[i][j] = model.energy(R + (i - 1) * hR, q + (j - 1) * hq);
  grad << (f[2][1] - f[0][1]) / (2.0 * hR), (f[1][2] - f[1][0]) / (2.0 * hq);
  hess(0, 0) = (f[2][1] - 2.0 * f[1][1] + f[0][1]) / (hR * hR);
  hess(1, 1) = (f[1][2] - 2.0 * f[1][1] + f[1][0]) / (hq * hq);
  hess(0, 1) = hess(1, 0) = (f[2][2] - f[2][0] - f[0][2] + f[0][0]) / (4.0 * hR * hq);
}

namespace {

void classify(CriticalPoint& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(p.hessian);
  p.hessian_eigenvalues = es.eigenvalues();
  p.hessian_eigenvectors = es.eigenvectors();
  const int negative = (p.hessian_eigenvalues.array() < 0.0).count();
  p.kind = negative == 0 ? PointKind::minimum : (negative == 1 ? PointKind::saddle : PointKind::maximum);
}

}  // namespace

CriticalPoint newton_critical_point(const CboaModel& model, double R, double q, const NewtonOptions& opt) {
  CriticalPoint p;
  p.R = R;
  p.q = q;
  p.V = model.energy(R, q);
  const double q_scale = 5.0 * std::sqrt(1.0 / model.mode().omega_c);
  const double R_limit = 0.45 * model.params().L;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    finite_difference_derivatives(model, p.R, p.q, opt, p.gradient, p.hessian);
    const Eigen::Vector2d step = -p.hessian.fullPivLu().solve(p.gradient);
    double scale = 1.0;
    if (std::abs(step(0)) > 0.2) scale = std::min(scale, 0.2 / std::abs(step(0)));
    if (std::abs(step(1)) > q_scale) scale = std::min(scale, q_scale / std::abs(step(1)));
    const double R_new = std::clamp(p.R + scale * step(0), -R_limit, R_limit);
    const double q_new = p.q + scale * step(1);
    const double V_new = model.energy(R_new, q_new);
    const double dV = std::abs(V_new - p.V);
    const bool small_step = std::abs(R_new - p.R) < 1e-7 && std::abs(q_new - p.q) < 1e-7 * q_scale;
    p.R = R_new;
    p.q = q_new;
    p.V = V_new;
    p.iterations = it;
    if (dV < opt.energy_tol && small_step && scale == 1.0) {
      p.converged = true;
      break;
    }
  }
  finite_difference_derivatives(model, p.R, p.q, opt, p.gradient, p.hessian);
  classify(p);
  return p;
}

CriticalPointReport critical_points(const CboaModel& model, const ElectronicStructureTable& table,
                                    const NewtonOptions& opt) {
  const double M = model.params().M;
  const auto left = harmonic_fit(table, M, Well::left);
  const auto right = harmonic_fit(table, M, Well::right);
  const auto top = barrier_top(table);
  const auto g = build_grid(table.R_grid_spec);
  const double lam = model.mode().lambda, w = model.mode().omega_c;
  const double mu_top = g.interpolate(table.dipole(0, 0), top.R);
  const double a_top = g.interpolate(table.alpha0, top.R);

  struct Seed {
    double R, q;
    PointKind expected;
  };
  const Seed seeds[3] = {{left.R0, q_min(left.mu0, left.alpha0, lam, w), PointKind::minimum},
                         {right.R0, q_min(right.mu0, right.alpha0, lam, w), PointKind::minimum},
                         {top.R, q_min(mu_top, a_top, lam, w), PointKind::saddle}};
  CriticalPointReport rep;
  const CriticalPoint* reactant = nullptr;
  const CriticalPoint* ts = nullptr;
  std::vector<CriticalPoint> found;
  for (const auto& s : seeds) found.push_back(newton_critical_point(model, s.R, s.q, opt));
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& p = found[i];
    std::ostringstream w;
    w.precision(8);
    if (!p.converged) {
      w << "Newton did not converge from seed " << i << " after " << p.iterations << " iterations; last iterate R = "
        << p.R << ", q = " << p.q;
      rep.warnings.push_back(w.str());
      w.str("");
    }
    if (p.kind != seeds[i].expected) {
      w << "seed " << i << " converged to a point of unexpected Hessian signature at R = " << p.R << ", q = " << p.q;
      rep.warnings.push_back(w.str());
    }
    if (p.kind == PointKind::minimum) rep.minima.push_back(p);
    else if (p.kind == PointKind::saddle) rep.saddles.push_back(p);
    else rep.others.push_back(p);
  }
  reactant = &found[0];
  ts = &found[2];
  rep.barrier = ts->V - reactant->V;
  return rep;
}

Eigen::Matrix2d mass_weighted_hessian(const Eigen::Matrix2d& h, double M) {
  Eigen::Matrix2d m;
  m << h(0, 0) / M, h(0, 1) / std::sqrt(M), h(1, 0) / std::sqrt(M), h(1, 1);
  return m;
}

NormalModeReport hessian_normal_modes(const CriticalPoint& point, double M, double omega_c) {
  (void)omega_c;
  const Eigen::Matrix2d mw = mass_weighted_hessian(point.hessian, M);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(mw);
  if (point.kind != PointKind::minimum || es.eigenvalues()(0) <= 0.0)
    throw ClassificationError("hessian_normal_modes: point is not a minimum (negative Hessian eigenvalue)");
  NormalModeReport r;
  r.eigenvalues = es.eigenvalues();
  r.eigenvectors = es.eigenvectors();
  r.omega_minus = std::sqrt(r.eigenvalues(0));
  r.omega_plus = std::sqrt(r.eigenvalues(1));
  r.Omega_R = r.omega_plus - r.omega_minus;
  r.E_zp = 0.5 * (r.omega_plus + r.omega_minus);
  r.zpe_vibrational_correction = r.E_zp - 0.5 * (std::sqrt(mw(0, 0)) + std::sqrt(mw(1, 1)));
  return r;
}

namespace {

double positive_zpe(const CriticalPoint& p, double M) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(mass_weighted_hessian(p.hessian, M));
  double z = 0.0;
  for (int i = 0; i < 2; ++i)
    if (es.eigenvalues()(i) > 0.0) z += 0.5 * std::sqrt(es.eigenvalues()(i));
  return z;
}

}  // namespace

double zero_point_correction(const CriticalPointReport& report, double M) {
  if (report.minima.empty() || report.saddles.empty())
    throw NumericalError("zero_point_correction: need a classified minimum and saddle");
  const CriticalPoint* mn = &report.minima.front();
  for (const auto& m : report.minima)
    if (m.R < 0.0) {
      mn = &m;
      break;
    }
  return positive_zpe(report.saddles.front(), M) - positive_zpe(*mn, M);
}

double tst_rate_ratio(double E_b_coupled, double E_b_bare, double T) {
  if (!(T > 0.0)) throw ValidationError("tst_rate_ratio: temperature must be positive");
  return std::exp(-(E_b_coupled - E_b_bare) / (units::boltzmann * T));
}

Eigen::VectorXd collective_normal_modes(int N, double omega_v, double omega_c, double lambda, double dmu_mw) {
  if (N < 1) throw ValidationError("collective_normal_modes: N must be >= 1");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(N + 1, N + 1);
  for (int i = 0; i < N; ++i) {
    h(i, i) = omega_v * omega_v;
    h(i, N) = h(N, i) = lambda * omega_c * dmu_mw;
  }
  h(N, N) = omega_c * omega_c;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= 0.0) throw NumericalError("collective_normal_modes: unstable coupled system");
  return es.eigenvalues().cwiseSqrt();
}

}  // namespace cavchem
