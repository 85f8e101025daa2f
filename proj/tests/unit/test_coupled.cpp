#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cavchem/coupled.hpp"
#include "cavchem/rates.hpp"
#include "cavchem/units.hpp"

using namespace cavchem;

namespace {

const GridSpec coarse_x{-20.0, 20.0, 20, 6};

std::shared_ptr<const MolecularBasis> coarse_basis() {
  static const auto b =
      std::make_shared<const MolecularBasis>(molecular_eigenbasis(ShinMetiuParams{}, coarse_x, default_nuclear_grid));
  return b;
}

CavityMode resonant(double lambda, int n_fock = 8) {
  CavityMode m;
  m.omega_c = nominal_omega_nu;
  m.lambda = lambda;
  m.n_fock = n_fock;
  return m;
}

// Two-level molecule with a pure transition dipole.
std::shared_ptr<const MolecularBasis> two_level(double gap, double d) {
  auto b = std::make_shared<MolecularBasis>();
  b->energies = Eigen::Vector2d(0.0, gap);
  b->dipole = Eigen::Matrix2d{{0.0, d}, {d, 0.0}};
  b->dipole_squared = b->dipole * b->dipole;
  return b;
}

}  // namespace

TEST_CASE("basis energies stay below the cutoff and start with the tunnelling doublet") {
  const auto b = coarse_basis();
  CHECK(b->size() > 10);
  CHECK((b->energies.array() < b->e_cut).all());
  CHECK(b->e_cut == doctest::Approx(b->barrier_top + 10.0 * nominal_omega_nu).epsilon(1e-14));
  CHECK(b->energies(1) - b->energies(0) < 1e-6);
  CHECK(b->energies(2) - b->energies(1) > 0.5 * nominal_omega_nu);
  CHECK((b->dipole - b->dipole.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("localized ground dipole matches the Born-Oppenheimer average") {
  const ShinMetiuParams p;
  const auto b = coarse_basis();
  // Left-localized combination of the ground doublet.
  Eigen::Matrix2d d = b->dipole.topLeftCorner(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(d);
  const double mu_loc = es.eigenvalues().maxCoeff();

  const auto gR = build_grid(default_nuclear_grid);
  const auto slices = electronic_slices(p, build_grid(coarse_x), gR, 1);
  Eigen::VectorXd V(gR.size()), mu(gR.size());
  for (Eigen::Index k = 0; k < gR.size(); ++k) {
    V(k) = slices[k].energies(0);
    mu(k) = slices[k].dipole(0, 0);
  }
  const auto lv = nuclear_levels(gR, V, p.M, 2);
  const int left = lv.side[0] < 0 ? 0 : 1;
  const double avg = lv.states.col(left).array().square().matrix().dot(mu);
  CHECK(std::abs(mu_loc) == doctest::Approx(std::abs(avg)).epsilon(1e-3));
}

TEST_CASE("complete product basis reproduces the direct two-dimensional grid") {
  const ShinMetiuParams p;
  const GridSpec xs{-16.0, 16.0, 8, 6};
  const GridSpec Rs{-8.5, 8.5, 6, 6};
  const auto gx = build_grid(xs), gR = build_grid(Rs);
  const auto nx = gx.size(), nR = gR.size();

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nx * nR, nx * nR);
  for (Eigen::Index k = 0; k < nR; ++k)
    for (Eigen::Index l = 0; l < nR; ++l)
      for (Eigen::Index i = 0; i < nx; ++i) H(k * nx + i, l * nx + i) += gR.kinetic(k, l) / p.M;
  for (Eigen::Index k = 0; k < nR; ++k) {
    H.block(k * nx, k * nx, nx, nx) += gx.kinetic;
    for (Eigen::Index i = 0; i < nx; ++i) H(k * nx + i, k * nx + i) += electron_potential(p, gx.nodes(i), gR.nodes(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);

  MolecularBasisOptions opt;
  opt.n_electronic = static_cast<int>(nx);
  opt.e_cut = 1e6;
  const auto b = molecular_eigenbasis(p, xs, Rs, opt);
  REQUIRE(b.size() == nx * nR);
  CHECK((b.energies.head(20) - es.eigenvalues().head(20)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("decoupled limit is the bare spectrum plus the photon ladder") {
  const auto b = coarse_basis();
  const auto mode = resonant(0.0, 5);
  const auto sys = solve_coupled(b, mode);
  std::vector<double> expect;
  for (Eigen::Index m = 0; m < b->size(); ++m)
    for (int n = 0; n < mode.n_fock; ++n) expect.push_back(b->energies(m) + mode.omega_c * (n + 0.5));
  std::sort(expect.begin(), expect.end());
  for (Eigen::Index i = 0; i < sys.size(); ++i) CHECK(std::abs(sys.energies(i) - expect[i]) < 1e-12);
}

TEST_CASE("coupled matrix is exactly symmetric and its eigenvectors orthonormal") {
  const auto b = coarse_basis();
  for (bool dse : {false, true}) {
    auto mode = resonant(0.035);
    mode.dipole_self_energy = dse;
    const auto H = build_coupled(*b, mode);
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto sys = diagonalize_coupled(H);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.size(), sys.size());
    CHECK((sys.states.transpose() * sys.states - I).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("two-level reduction follows the Jaynes-Cummings doublets at weak coupling") {
  const double w = 0.01, d = 1.0, lambda = 2e-4;
  const double g = lambda * std::sqrt(0.5 * w) * d;
  CavityMode mode;
  mode.omega_c = w;
  mode.lambda = lambda;
  mode.n_fock = 12;
  const auto sys = solve_coupled(two_level(w, d), mode);
  // Ground state ~ w/2; the n-th excitation manifold sits at (n + 1/2) w +- g sqrt(n).
  const double tol = 4.0 * g * g / w;
  CHECK(std::abs(sys.energies(0) - 0.5 * w) < tol);
  for (int n = 1; n <= 3; ++n) {
    CHECK(std::abs(sys.energies(2 * n - 1) - ((n + 0.5) * w - g * std::sqrt(n))) < tol);
    CHECK(std::abs(sys.energies(2 * n) - ((n + 0.5) * w + g * std::sqrt(n))) < tol);
  }
}

TEST_CASE("ground energy decreases with coupling") {
  const auto b = coarse_basis();
  double prev = solve_coupled(b, resonant(0.0)).energies(0);
  for (double lam : {0.01, 0.02, 0.035, 0.05}) {
    const double e = solve_coupled(b, resonant(lam)).energies(0);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("Fock truncation") {
  const auto b = coarse_basis();
  const double T = 300.0;
  const int n = adaptive_n_fock(*b, 0.035, nominal_omega_nu, T, FrequencyScanOptions{});
  const auto small = solve_coupled(b, resonant(0.035, n));
  const auto large = solve_coupled(b, resonant(0.035, n + 4));
  SUBCASE("thermal eigenvalues are converged at the adaptive size") {
    // Thermal: Boltzmann weight of at least 1e-3 relative to the ground state.
    const double window = small.energies(0) + std::log(1e3) * units::boltzmann * T;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < small.size() && small.energies(i) < window; ++i, ++count)
      CHECK(std::abs(small.energies(i) - large.energies(i)) < 1e-7);
    CHECK(count >= 10);
  }
  SUBCASE("the fixed minimum of 8 photons is not enough at this coupling") {
    const auto eight = solve_coupled(b, resonant(0.035, 8));
    CHECK(n > 8);
    CHECK(std::abs(eight.energies(2) - large.energies(2)) > 1e-7);
  }
  SUBCASE("enlarging the basis never raises an eigenvalue") {
    for (Eigen::Index i = 0; i < small.size(); ++i) CHECK(large.energies(i) <= small.energies(i) + 1e-12);
  }
}

TEST_CASE("raising the energy cutoff never raises an eigenvalue") {
  MolecularBasisOptions more;
  more.e_cut_margin = 14.0 * nominal_omega_nu;
  const auto b2 = std::make_shared<const MolecularBasis>(molecular_eigenbasis(ShinMetiuParams{}, coarse_x, default_nuclear_grid, more));
  const auto a = solve_coupled(coarse_basis(), resonant(0.035));
  const auto c = solve_coupled(b2, resonant(0.035));
  REQUIRE(c.size() > a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(c.energies(i) <= a.energies(i) + 1e-12);
}

TEST_CASE("polariton splitting grows with coupling") {
  const auto b = coarse_basis();
  const double s2 = first_doublet_splitting(solve_coupled(b, resonant(0.02)));
  const double s35 = first_doublet_splitting(solve_coupled(b, resonant(0.035)));
  CHECK(s2 > 0.0);
  CHECK(s35 / s2 == doctest::Approx(0.035 / 0.02).epsilon(0.1));
}

TEST_CASE("invalid modes and oversized problems are rejected") {
  auto m = resonant(0.01);
  m.omega_c = 0.0;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m = resonant(-0.01);
  CHECK_THROWS_AS(m.validate(), ValidationError);
  CHECK_THROWS_AS(build_coupled(*coarse_basis(), resonant(0.01, 8), 10), ValidationError);
}
