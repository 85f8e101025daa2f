#include "cavchem/coupled.hpp"

#include <cmath>
#include <vector>

namespace cavchem {

void CavityMode::validate() const {
  if (!(omega_c > 0.0)) throw ValidationError("CavityMode: omega_c must be positive");
  if (!(lambda >= 0.0)) throw ValidationError("CavityMode: lambda must be non-negative");
  if (n_fock < 1) throw ValidationError("CavityMode: n_fock must be >= 1");
  if (std::abs(polarization.norm() - 1.0) > 1e-12) throw ValidationError("CavityMode: polarization must be a unit vector");
}

namespace {

// Highest V_0 between the deepest node on each side of R = 0.
double ground_barrier_top(const std::vector<ElectronicSlice>& slices) {
  const auto n = static_cast<std::ptrdiff_t>(slices.size());
  std::ptrdiff_t left = -1, right = -1;
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto& s = slices[static_cast<std::size_t>(k)];
    if (s.R < 0.0 && (left < 0 || s.energies(0) < slices[static_cast<std::size_t>(left)].energies(0))) left = k;
    if (s.R > 0.0 && (right < 0 || s.energies(0) < slices[static_cast<std::size_t>(right)].energies(0))) right = k;
  }
  if (left < 0 || right < 0) {
    left = 0;
    right = n - 1;
  }
  double top = -1e300;
  for (std::ptrdiff_t k = left; k <= right; ++k) top = std::max(top, slices[static_cast<std::size_t>(k)].energies(0));
  return top;
}

}  // namespace

MolecularBasis molecular_eigenbasis(const std::vector<ElectronicSlice>& slices, const Grid1D<double>& grid_R,
                                    double M, const MolecularBasisOptions& options) {
  const int ne = options.n_electronic;
  const auto nR = grid_R.size();
  if (static_cast<Eigen::Index>(slices.size()) != nR) throw ValidationError("molecular_eigenbasis: one slice per R node required");
  if (ne < 1) throw ValidationError("molecular_eigenbasis: n_electronic must be >= 1");
  for (const auto& s : slices)
    if (s.energies.size() < ne) throw ValidationError("molecular_eigenbasis: slices carry too few electronic states");
  if (!(M > 0.0)) throw ValidationError("molecular_eigenbasis: mass must be positive");

  const Eigen::Index dim = nR * ne;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<Eigen::Triplet<double>> dtrip;
  for (Eigen::Index k = 0; k < nR; ++k) {
    const auto& sk = slices[static_cast<std::size_t>(k)];
    for (int i = 0; i < ne; ++i) h(k * ne + i, k * ne + i) += sk.energies(i);
    for (Eigen::Index l = 0; l < nR; ++l) {
      const double t = grid_R.kinetic(k, l);
      const double d = grid_R.derivative(k, l);
      if (t == 0.0 && d == 0.0) continue;
      const auto& sl = slices[static_cast<std::size_t>(l)];
      const Eigen::MatrixXd overlap = sk.vectors.leftCols(ne).transpose() * sl.vectors.leftCols(ne);
      h.block(k * ne, l * ne, ne, ne) += (t / M) * overlap;
      if (d != 0.0)
        for (int i = 0; i < ne; ++i)
          for (int j = 0; j < ne; ++j) dtrip.emplace_back(k * ne + i, l * ne + j, d * overlap(i, j));
    }
  }
  h = (0.5 * (h + h.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("molecular eigensolver did not converge");

  MolecularBasis b;
  b.mass = M;
  b.n_electronic = ne;
  b.barrier_top = ground_barrier_top(slices);
  b.e_cut = options.e_cut ? *options.e_cut : b.barrier_top + options.e_cut_margin;
  Eigen::Index kept = 0;
  while (kept < dim && es.eigenvalues()(kept) < b.e_cut) ++kept;
  if (kept < 2) throw NumericalError("molecular_eigenbasis: fewer than 2 states below the energy cutoff");
  b.energies = es.eigenvalues().head(kept);
  b.coefficients = es.eigenvectors().leftCols(kept);
  b.product_R.resize(dim);
  for (Eigen::Index k = 0; k < nR; ++k) b.product_R.segment(k * ne, ne).setConstant(grid_R.nodes(k));
  b.R_nodes = grid_R.nodes;
  b.R_weights = grid_R.weights;

  Eigen::MatrixXd mu_c(dim, kept), mu2_c(dim, kept);
  for (Eigen::Index k = 0; k < nR; ++k) {
    const Eigen::MatrixXd mu = slices[static_cast<std::size_t>(k)].dipole.topLeftCorner(ne, ne);
    mu_c.middleRows(k * ne, ne) = mu * b.coefficients.middleRows(k * ne, ne);
    mu2_c.middleRows(k * ne, ne) = (mu * mu) * b.coefficients.middleRows(k * ne, ne);
  }
  b.dipole = b.coefficients.transpose() * mu_c;
  b.dipole = (0.5 * (b.dipole + b.dipole.transpose())).eval();
  b.dipole_squared = b.coefficients.transpose() * mu2_c;
  b.dipole_squared = (0.5 * (b.dipole_squared + b.dipole_squared.transpose())).eval();
  b.nuclear_derivative.resize(dim, dim);
  b.nuclear_derivative.setFromTriplets(dtrip.begin(), dtrip.end());
  return b;
}

MolecularBasis molecular_eigenbasis(const ShinMetiuParams& p, const GridSpec& x_grid, const GridSpec& R_grid,
                                    const MolecularBasisOptions& options) {
  const auto gx = build_grid(x_grid);
  const auto gR = build_grid(R_grid);
  const auto slices = electronic_slices(p, gx, gR, options.n_electronic, options.threads);
  return molecular_eigenbasis(slices, gR, p.M, options);
}

Eigen::MatrixXd build_coupled(const MolecularBasis& basis, const CavityMode& mode, Eigen::Index max_dimension) {
  mode.validate();
  const Eigen::Index nm = basis.size();
  const Eigen::Index nf = mode.n_fock;
  const Eigen::Index dim = nm * nf;
  if (dim > max_dimension)
    throw ValidationError("build_coupled: dimension " + std::to_string(dim) + " exceeds the configured maximum " +
                          std::to_string(max_dimension));
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  const double g = mode.lambda * std::sqrt(0.5 * mode.omega_c);
  for (Eigen::Index m = 0; m < nm; ++m)
    for (Eigen::Index n = 0; n < nf; ++n) H(m * nf + n, m * nf + n) = basis.energies(m) + mode.omega_c * (n + 0.5);
  if (mode.lambda > 0.0) {
    for (Eigen::Index m = 0; m < nm; ++m) {
      for (Eigen::Index mp = 0; mp < nm; ++mp) {
        const double c = g * basis.dipole(m, mp);
        for (Eigen::Index n = 0; n + 1 < nf; ++n) {
          const double a = c * std::sqrt(static_cast<double>(n + 1));
          H(m * nf + n, mp * nf + n + 1) += a;
          H(m * nf + n + 1, mp * nf + n) += a;
        }
      }
    }
    if (mode.dipole_self_energy) {
      const double s = 0.5 * mode.lambda * mode.lambda;
      for (Eigen::Index m = 0; m < nm; ++m)
        for (Eigen::Index mp = 0; mp < nm; ++mp)
          for (Eigen::Index n = 0; n < nf; ++n) H(m * nf + n, mp * nf + n) += s * basis.dipole_squared(m, mp);
    }
  }
  return H;
}

CoupledEigensystem diagonalize_coupled(const Eigen::MatrixXd& H) {
  if (H.rows() != H.cols()) throw ValidationError("diagonalize_coupled: matrix must be square");
  const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff()))
    throw ValidationError("diagonalize_coupled: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw NumericalError("coupled eigensolver did not converge");
  CoupledEigensystem sys;
  sys.energies = es.eigenvalues();
  sys.states = es.eigenvectors();
  return sys;
}

CoupledEigensystem solve_coupled(std::shared_ptr<const MolecularBasis> basis, const CavityMode& mode,
                                 Eigen::Index max_dimension) {
  if (!basis) throw ValidationError("solve_coupled: missing molecular basis");
  auto sys = diagonalize_coupled(build_coupled(*basis, mode, max_dimension));
  sys.mode = mode;
  sys.basis = std::move(basis);
  return sys;
}

double first_doublet_splitting(const CoupledEigensystem& sys) {
  if (sys.size() < 6) throw ValidationError("first_doublet_splitting: need at least 6 eigenstates");
  const auto& e = sys.energies;
  return 0.5 * (e(4) + e(5)) - 0.5 * (e(2) + e(3));
}

}  // namespace cavchem
