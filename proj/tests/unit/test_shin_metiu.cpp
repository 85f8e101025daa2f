#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cavchem/numerics.hpp"
#include "cavchem/shin_metiu.hpp"
#include "cavchem/table_io.hpp"
#include "cavchem/units.hpp"

using namespace cavchem;

namespace {

const ElectronicStructureTable& production_table() {
  static const auto t = bo_scan(ShinMetiuParams{}, default_electron_grid, default_nuclear_grid, default_electronic_states);
  return t;
}

const GridSpec coarse_x{-20.0, 20.0, 20, 6};

}  // namespace

TEST_CASE("soft Coulomb kernel is finite at the origin") {
  const double rc = 2.0;
  CHECK(soft_coulomb(0.0, rc) == doctest::Approx(2.0 / (std::sqrt(M_PI) * rc)).epsilon(1e-15));
  CHECK(soft_coulomb(1e-12, rc) == doctest::Approx(soft_coulomb(0.0, rc)).epsilon(1e-14));
  CHECK(soft_coulomb(-3.0, rc) == doctest::Approx(std::erf(1.5) / 3.0).epsilon(1e-15));
}

TEST_CASE("electron potential") {
  const ShinMetiuParams p;
  const double half = 0.5 * p.L;
  SUBCASE("electron on the mobile nucleus") {
    const double R = 1.3;
    const double others = -p.Z * std::erf(std::abs(R - half) / p.Rc) / std::abs(R - half) -
                          p.Z * std::erf(std::abs(R + half) / p.Rc) / std::abs(R + half) + 1.0 / std::abs(R - half) +
                          1.0 / std::abs(R + half);
    CHECK(electron_potential(p, R, R) - others == doctest::Approx(-2.0 * p.Z / (std::sqrt(M_PI) * p.Rc)).epsilon(1e-13));
  }
  SUBCASE("value at the centre from the formula") {
    const double v = -2.0 / (std::sqrt(M_PI) * p.Rc) - 2.0 * std::erf(half / p.Rc) / half + 2.0 / half;
    CHECK(electron_potential(p, 0.0, 0.0) == doctest::Approx(v).epsilon(1e-14));
  }
  SUBCASE("mirror symmetry") {
    for (double x : {-7.0, -0.4, 2.2, 11.0})
      for (double R : {-5.0, 0.7, 3.3}) CHECK(electron_potential(p, x, R) == doctest::Approx(electron_potential(p, -x, -R)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(nuclear_repulsion(p, half), DomainError);
  ShinMetiuParams bad;
  bad.Rc = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("electronic slices") {
  const ShinMetiuParams p;
  const auto gx = build_grid(coarse_x);
  SUBCASE("parity of the spectrum") {
    for (double R : {0.8, 2.5, 4.1}) {
      const auto a = solve_electronic(p, gx, R, 8), b = solve_electronic(p, gx, -R, 8);
      CHECK((a.energies - b.energies).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(std::abs(a.dipole(0, 0) + b.dipole(0, 0)) < 1e-9);
    }
  }
  SUBCASE("polarizability equals the linear-response solution") {
    // alpha = 2 <x psi0 | Q (H - E0)^-1 Q | x psi0> computed without the spectrum.
    const double R = -3.0;
    const auto all = solve_electronic(p, gx, R, static_cast<int>(gx.size()));
    Eigen::MatrixXd h = gx.kinetic;
    for (Eigen::Index i = 0; i < gx.size(); ++i) h(i, i) += electron_potential(p, gx.nodes(i), R);
    const Eigen::VectorXd psi0 = all.vectors.col(0);
    Eigen::VectorXd rhs = gx.nodes.cwiseProduct(psi0);
    rhs -= psi0 * psi0.dot(rhs);
    Eigen::MatrixXd shifted = h - Eigen::MatrixXd::Identity(gx.size(), gx.size()) * all.energies(0);
    shifted += psi0 * psi0.transpose();  // lifts the null direction
    const Eigen::VectorXd y = shifted.ldlt().solve(rhs);
    CHECK(static_polarizability(all.energies, all.dipole) == doctest::Approx(2.0 * rhs.dot(y)).epsilon(1e-8));
  }
  SUBCASE("n_states outside the grid is rejected") {
    CHECK_THROWS_AS(solve_electronic(p, gx, 0.0, 0), ValidationError);
    CHECK_THROWS_AS(solve_electronic(p, gx, 0.0, static_cast<int>(gx.size()) + 1), ValidationError);
  }
}

TEST_CASE("production table") {
  const auto& t = production_table();
  const double M = t.params.M;
  const Eigen::Index n = t.R.size();

  SUBCASE("parity") {
    const double scale = t.V.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < n; ++k) {
      CHECK(std::abs(t.R(k) + t.R(n - 1 - k)) < 1e-12);
      CHECK((t.V.row(k) - t.V.row(n - 1 - k)).cwiseAbs().maxCoeff() < 1e-10 * scale);
      CHECK(std::abs(t.mu[k](0, 0) + t.mu[n - 1 - k](0, 0)) < 1e-9);
    }
  }
  SUBCASE("ground dipole vanishes at the symmetric configuration") {
    Eigen::Index k0;
    t.R.cwiseAbs().minCoeff(&k0);
    REQUIRE(std::abs(t.R(k0)) < 1e-12);
    CHECK(std::abs(t.mu[k0](0, 0)) < 1e-10);
  }
  SUBCASE("adiabatic ordering and a wide electronic gap") {
    for (Eigen::Index k = 0; k < n; ++k)
      for (int i = 1; i < t.n_states(); ++i) CHECK(t.V(k, i) >= t.V(k, i - 1));
    const double gap = (t.V.col(1) - t.V.col(0)).minCoeff();
    // Far above the thermal and vibrational scales everywhere.
    CHECK(units::ev(gap) > 0.5);
  }
  SUBCASE("polarizability is the truncated sum over states") {
    for (Eigen::Index k : {Eigen::Index(3), n / 3, n / 2}) {
      double a = 0.0;
      for (int m = 1; m < t.n_states(); ++m) a += 2.0 * std::pow(t.mu[k](m, 0), 2) / (t.V(k, m) - t.V(k, 0));
      CHECK(t.alpha0(k) == doctest::Approx(a).epsilon(1e-12));
    }
  }
  SUBCASE("gauge continuity of the transition dipole") {
    const Eigen::VectorXd mu01 = t.dipole(0, 1);
    const double scale = mu01.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 1; k < n; ++k) CHECK(std::abs(mu01(k) - mu01(k - 1)) < 0.05 * scale);
  }
  SUBCASE("wells near -4 and +4 bohr with a 72.6 meV vibration") {
    const auto left = harmonic_fit(t, M, Well::left), right = harmonic_fit(t, M, Well::right);
    CHECK(std::abs(left.R0 + 4.0) < 0.5);
    CHECK(std::abs(right.R0 - 4.0) < 0.5);
    CHECK(std::abs(units::mev(left.omega_nu) - 72.6) <= 0.02 * 72.6);
    const auto levels = vibrational_levels(t, M, 6);
    CHECK(std::abs(units::mev(levels.energies(2) - levels.energies(0)) - 72.6) <= 0.02 * 72.6);
    for (int i = 0; i < 6; i += 2) {
      CHECK(levels.energies(i + 1) - levels.energies(i) < 1e-6);
      CHECK(levels.side[i] * levels.side[i + 1] == -1);
    }
  }
  SUBCASE("dipole slope and single-molecule Rabi estimate") {
    const auto fit = harmonic_fit(t, M, Well::left);
    const auto g = build_grid(t.R_grid_spec);
    const Eigen::VectorXd mu = t.dipole(0, 0);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(21, fit.R0 - 0.1, fit.R0 + 0.1);
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = g.interpolate(mu, x(i));
    CHECK(fit.dmu == doctest::Approx(numerics::fit_line(x, y).slope).epsilon(1e-4));
    const double rabi = 0.035 * fit.dmu / std::sqrt(M);
    CHECK(std::abs(rabi / fit.omega_nu - 0.10) <= 0.015);
  }
  SUBCASE("barrier top at the symmetric configuration") {
    const auto top = barrier_top(t);
    CHECK(std::abs(top.R) < 1e-6);
    CHECK(top.V > harmonic_fit(t, M, Well::left).V0);
  }
}

TEST_CASE("electron grid convergence") {
  const ShinMetiuParams p;
  const auto g = build_grid(default_electron_grid);
  const auto fine = build_grid(GridSpec{-20.0, 20.0, 80, 8});
  for (double R : {-4.0, 0.0, 2.5}) {
    const double a = solve_electronic(p, g, R, 1).energies(0);
    const double b = solve_electronic(p, fine, R, 1).energies(0);
    CHECK(std::abs(a - b) < 1e-8);
  }
}

TEST_CASE("harmonic potential gives an exact ladder") {
  const auto g = build_grid(default_nuclear_grid);
  const double M = 1836.0, w = 0.0027;
  const Eigen::VectorXd V = 0.5 * M * w * w * g.nodes.array().square();
  const auto lv = nuclear_levels(g, V, M, 4);
  for (int i = 1; i < 4; ++i) CHECK(lv.energies(i) - lv.energies(i - 1) == doctest::Approx(w).epsilon(1e-8));
}

TEST_CASE("table text round trip is bit exact") {
  const auto t = bo_scan(ShinMetiuParams{}, coarse_x, GridSpec{-8.5, 8.5, 6, 4}, 4);
  std::stringstream ss;
  write_table_csv(t, ss);
  const auto back = read_table_csv(ss);
  CHECK(back.params == t.params);
  CHECK(back.R_grid_spec == t.R_grid_spec);
  CHECK((back.R - t.R).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.V - t.V).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.alpha0 - t.alpha0).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t k = 0; k < t.mu.size(); ++k) CHECK((back.mu[k] - t.mu[k]).cwiseAbs().maxCoeff() == 0.0);
}
