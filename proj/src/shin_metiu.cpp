#include "cavchem/shin_metiu.hpp"

#include <cmath>
#include <sstream>

#include "cavchem/numerics.hpp"
#include "cavchem/parallel.hpp"

namespace cavchem {

namespace {

std::string at_R(const std::string& what, double R) {
  std::ostringstream os;
  os.precision(10);
  os << what << " (R = " << R << " bohr)";
  return os.str();
}

Grid1D<double> grid_matching(const ElectronicStructureTable& table) {
  Grid1D<double> g = build_grid(table.R_grid_spec);
  if (g.size() != table.R.size() || (g.nodes - table.R).cwiseAbs().maxCoeff() > 1e-10)
    throw ValidationError("table R nodes do not match its grid specification");
  return g;
}

}  // namespace

void ShinMetiuParams::validate() const {
  if (!(Z > 0.0)) throw ValidationError("ShinMetiuParams: Z must be positive");
  if (!(L > 0.0)) throw ValidationError("ShinMetiuParams: L must be positive");
  if (!(M > 0.0)) throw ValidationError("ShinMetiuParams: M must be positive");
  if (!(Rc > 0.0)) throw ValidationError("ShinMetiuParams: Rc must be positive");
}

double soft_coulomb(double r, double rc) {
  const double a = std::abs(r);
  if (a < 1e-8 * rc) {
    const double u = a / rc;
    return 2.0 / (std::sqrt(M_PI) * rc) * (1.0 - u * u / 3.0);
  }
  return std::erf(a / rc) / a;
}

double nuclear_repulsion(const ShinMetiuParams& p, double R) {
  const double half = 0.5 * p.L;
  if (std::abs(R) >= half) throw DomainError(at_R("mobile nucleus must lie strictly between the fixed ions", R));
  return p.Z * p.Z / std::abs(R - half) + p.Z * p.Z / std::abs(R + half);
}

double electron_potential(const ShinMetiuParams& p, double x, double R) {
  const double half = 0.5 * p.L;
  return -p.Z * soft_coulomb(x - R, p.Rc) - p.Z * soft_coulomb(x - half, p.Rc) -
         p.Z * soft_coulomb(x + half, p.Rc) + nuclear_repulsion(p, R);
}

ElectronicSlice solve_electronic(const ShinMetiuParams& p, const Grid1D<double>& grid_x, double R,
                                 int n_states) {
  p.validate();
  if (n_states < 1 || n_states > grid_x.size())
    throw ValidationError("solve_electronic: n_states outside [1, grid size]");
  const double spacing = (grid_x.upper - grid_x.lower) / (grid_x.elements * grid_x.order);
  if (p.Rc / spacing < 4.0) throw ValidationError("solve_electronic: electron grid does not resolve Rc");
  const double vnn = nuclear_repulsion(p, R);

  Eigen::MatrixXd h = grid_x.kinetic;
  for (Eigen::Index i = 0; i < grid_x.size(); ++i)
    h(i, i) += electron_potential(p, grid_x.nodes(i), R) - vnn;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError(at_R("electronic eigensolver did not converge", R));

  ElectronicSlice s;
  s.R = R;
  s.energies = es.eigenvalues().head(n_states).array() + vnn;
  s.vectors = es.eigenvectors().leftCols(n_states);
  s.dipole = -(s.vectors.transpose() * grid_x.nodes.asDiagonal() * s.vectors);
  s.dipole.diagonal().array() += p.Z * R;
  s.dipole = (0.5 * (s.dipole + s.dipole.transpose())).eval();
  return s;
}

namespace {

void apply_signs(ElectronicSlice& slice, const Eigen::VectorXd& signs) {
  slice.vectors = slice.vectors * signs.asDiagonal();
  slice.dipole = signs.asDiagonal() * slice.dipole * signs.asDiagonal();
}

}  // namespace

void fix_first_gauge(ElectronicSlice& slice) {
  Eigen::VectorXd signs(slice.vectors.cols());
  for (Eigen::Index i = 0; i < slice.vectors.cols(); ++i) {
    Eigen::Index k;
    slice.vectors.col(i).cwiseAbs().maxCoeff(&k);
    signs(i) = slice.vectors(k, i) < 0.0 ? -1.0 : 1.0;
  }
  apply_signs(slice, signs);
}

void align_gauge(const ElectronicSlice& previous, ElectronicSlice& slice) {
  const Eigen::Index n = std::min(previous.vectors.cols(), slice.vectors.cols());
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(slice.vectors.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    if (previous.vectors.col(i).dot(slice.vectors.col(i)) < 0.0) signs(i) = -1.0;
  apply_signs(slice, signs);
}

double static_polarizability(const Eigen::VectorXd& energies, const Eigen::MatrixXd& dipole) {
  double alpha = 0.0;
  for (Eigen::Index m = 1; m < energies.size(); ++m)
    alpha += 2.0 * dipole(m, 0) * dipole(m, 0) / (energies(m) - energies(0));
  return alpha;
}

std::vector<ElectronicSlice> electronic_slices(const ShinMetiuParams& p, const Grid1D<double>& grid_x,
                                               const Grid1D<double>& grid_R, int n_states, int threads) {
  auto slices = parallel_map<ElectronicSlice>(static_cast<std::size_t>(grid_R.size()), threads, [&](std::size_t k) {
    const double R = grid_R.nodes(static_cast<Eigen::Index>(k));
    try {
      return solve_electronic(p, grid_x, R, n_states);
    } catch (const DomainError& e) {
      throw DomainError(at_R(e.what(), R));
    } catch (const ValidationError& e) {
      throw ValidationError(at_R(e.what(), R));
    } catch (const NumericalError& e) {
      throw NumericalError(at_R(e.what(), R));
    }
  });
  if (!slices.empty()) fix_first_gauge(slices.front());
  for (std::size_t k = 1; k < slices.size(); ++k) align_gauge(slices[k - 1], slices[k]);
  return slices;
}

Eigen::VectorXd ElectronicStructureTable::dipole(int m, int n) const {
  Eigen::VectorXd out(R.size());
  for (Eigen::Index k = 0; k < R.size(); ++k) out(k) = mu[static_cast<std::size_t>(k)](m, n);
  return out;
}

ElectronicStructureTable table_from_slices(const ShinMetiuParams& p, const GridSpec& x_grid,
                                           const GridSpec& R_grid, const std::vector<ElectronicSlice>& slices) {
  ElectronicStructureTable t;
  t.params = p;
  t.x_grid = x_grid;
  t.R_grid_spec = R_grid;
  const auto n_R = static_cast<Eigen::Index>(slices.size());
  const Eigen::Index n = slices.empty() ? 0 : slices.front().energies.size();
  t.R.resize(n_R);
  t.V.resize(n_R, n);
  t.alpha0.resize(n_R);
  t.mu.reserve(slices.size());
  for (Eigen::Index k = 0; k < n_R; ++k) {
    const auto& s = slices[static_cast<std::size_t>(k)];
    t.R(k) = s.R;
    t.V.row(k) = s.energies.transpose();
    t.mu.push_back(s.dipole);
    t.alpha0(k) = static_polarizability(s.energies, s.dipole);
  }
  return t;
}

ElectronicStructureTable bo_scan(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                                 int n_states, int threads) {
  const auto gx = build_grid(x_grid);
  const auto gR = build_grid(R_grid);
  return table_from_slices(p, x_grid, R_grid, electronic_slices(p, gx, gR, n_states, threads));
}

VibrationalLevels nuclear_levels(const Grid1D<double>& grid_R, const Eigen::VectorXd& V, double M, int n_levels) {
  if (V.size() != grid_R.size()) throw ValidationError("nuclear_levels: potential does not match grid");
  if (n_levels < 1 || n_levels > grid_R.size()) throw ValidationError("nuclear_levels: bad level count");
  Eigen::MatrixXd h = grid_R.kinetic / M;
  h.diagonal() += V;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("nuclear eigensolver did not converge");

  VibrationalLevels lv;
  lv.energies = es.eigenvalues().head(n_levels);
  lv.states = es.eigenvectors().leftCols(n_levels);

  // Resolution: the top level's local wavelength must span several nodes.
  const double ke = lv.energies(n_levels - 1) - V.minCoeff();
  const double wavelength = 2.0 * M_PI / std::sqrt(2.0 * M * std::max(ke, 1e-300));
  double max_gap = 0.0;
  for (Eigen::Index i = 1; i < grid_R.size(); ++i) max_gap = std::max(max_gap, grid_R.nodes(i) - grid_R.nodes(i - 1));
  if (max_gap > wavelength / 3.0)
    throw NumericalError("nuclear grid too coarse for the requested levels (level spacing not converged)");

  Eigen::VectorXd sgn = grid_R.nodes.unaryExpr([](double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); });
  // Rotate quasi-degenerate pairs onto the eigenbasis of sign(R).
  for (int i = 0; i + 1 < n_levels; ++i) {
    const double gap = lv.energies(i + 1) - lv.energies(i);
    const double next = i + 2 < n_levels ? lv.energies(i + 2) - lv.energies(i + 1) : gap * 1e6;
    if (gap > 1e-6 || gap > 1e-3 * next) continue;
    Eigen::MatrixXd pair = lv.states.middleCols(i, 2);
    Eigen::Matrix2d s = pair.transpose() * sgn.asDiagonal() * pair;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ps(s);
    lv.states.middleCols(i, 2) = pair * ps.eigenvectors();
    ++i;
  }
  lv.sign_R.resize(n_levels);
  lv.side.resize(static_cast<std::size_t>(n_levels));
  for (int i = 0; i < n_levels; ++i) {
    lv.sign_R(i) = (lv.states.col(i).array().square() * sgn.array()).sum();
    lv.side[static_cast<std::size_t>(i)] = lv.sign_R(i) < -0.9 ? -1 : (lv.sign_R(i) > 0.9 ? 1 : 0);
  }
  return lv;
}

VibrationalLevels vibrational_levels(const ElectronicStructureTable& table, double M, int n_levels) {
  const auto g = grid_matching(table);
  if (!(table.R.minCoeff() < 0.0 && table.R.maxCoeff() > 0.0))
    throw ValidationError("vibrational_levels: table must cover both wells");
  return nuclear_levels(g, table.V.col(0), M, n_levels);
}

HarmonicFit harmonic_fit(const ElectronicStructureTable& table, double M, Well which) {
  const auto g = grid_matching(table);
  const Eigen::VectorXd v0 = table.V.col(0);
  const Eigen::VectorXd mu00 = table.dipole(0, 0);
  const Eigen::Index n = g.size();
  Eigen::Index best = -1;
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool in = which == Well::left ? g.nodes(k) < 0.0 : g.nodes(k) > 0.0;
    if (in && (best < 0 || v0(k) < v0(best))) best = k;
  }
  if (best < 0) throw ValidationError("harmonic_fit: no nodes on the requested side");
  if (best <= 1 || best >= n - 2) throw NumericalError("harmonic_fit: well minimum at the grid edge");

  auto V = [&](double r) { return g.interpolate(v0, r); };
  const auto m = numerics::brent_minimize(V, g.nodes(best - 1), g.nodes(best + 1), 1e-12);
  const double h = 1e-3;
  HarmonicFit f;
  f.R0 = m.x;
  f.V0 = m.f;
  f.curvature = (V(f.R0 + h) - 2.0 * V(f.R0) + V(f.R0 - h)) / (h * h);
  if (!(f.curvature > 0.0)) throw NumericalError("harmonic_fit: non-positive curvature at the minimum");
  f.omega_nu = std::sqrt(f.curvature / M);
  f.dmu = (g.interpolate(mu00, f.R0 + h) - g.interpolate(mu00, f.R0 - h)) / (2.0 * h);
  f.mu_v = f.dmu / std::sqrt(2.0 * M * f.omega_nu);
  f.mu0 = g.interpolate(mu00, f.R0);
  f.alpha0 = g.interpolate(table.alpha0, f.R0);
  return f;
}

BarrierTop barrier_top(const ElectronicStructureTable& table) {
  const auto g = grid_matching(table);
  const auto left = harmonic_fit(table, table.params.M, Well::left);
  const auto right = harmonic_fit(table, table.params.M, Well::right);
  const Eigen::VectorXd v0 = table.V.col(0);
  Eigen::Index best = -1;
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g.nodes(k) > left.R0 && g.nodes(k) < right.R0 && (best < 0 || v0(k) > v0(best))) best = k;
  if (best <= 0 || best >= g.size() - 1) throw NumericalError("barrier_top: no interior maximum between the wells");
  auto negV = [&](double r) { return -g.interpolate(v0, r); };
  const auto m = numerics::brent_minimize(negV, g.nodes(best - 1), g.nodes(best + 1), 1e-12);
  return {m.x, -m.f};
}

}  // namespace cavchem
