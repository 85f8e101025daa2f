#include "doctest.h"

#include <cmath>

#include "cavchem/cboa.hpp"
#include "cavchem/perturbation.hpp"

using namespace cavchem;

namespace {

constexpr double w = 0.00267;

// Vertex of the parabola through three equally spaced samples.
double parabola_vertex(double x0, double h, double f0, double f1, double f2) {
  return x0 + h * (f0 - f2) / (2.0 * (f0 - 2.0 * f1 + f2));
}

}  // namespace

TEST_CASE("second-order surface limits") {
  const double V0 = -0.31, mu = 1.7, a = 40.0;
  for (double q : {-5.0, 0.0, 2.0}) CHECK(pert_surface(V0, mu, a, 0.0, w, q) == doctest::Approx(V0 + 0.5 * w * w * q * q).epsilon(1e-15));
  CHECK(pert_surface(V0, mu, a, 0.03, w, 0.0) == V0);
}

TEST_CASE("photon displacement") {
  CHECK(q_min(0.0, 50.0, 0.03, w) == 0.0);
  CHECK(q_min(2.0, 0.0, 0.03, w) == doctest::Approx(-0.03 * 2.0 / w).epsilon(1e-15));
  SUBCASE("is the vertex of the surface in q") {
    for (double mu : {-3.0, 0.4, 2.5}) {
      const double a = 60.0, lam = 0.04, h = 0.5;
      const double x0 = -4.0;
      auto f = [&](double q) { return pert_surface(0.0, mu, a, lam, w, q); };
      const double v = parabola_vertex(x0, h, f(x0 - h), f(x0), f(x0 + h));
      CHECK(q_min(mu, a, lam, w) == doctest::Approx(v).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(q_min(1.0, 1.0 / (0.1 * 0.1), 0.1, w), DomainError);
  CHECK_THROWS_AS(q_min(1.0, 1.0, 0.1, 0.0), ValidationError);
}

TEST_CASE("Debye-shifted path") {
  CHECK(pert_path(-0.2, 0.0, 0.05) == -0.2);
  // Barrier change is (lambda^2 / 2)(mu_min^2 - mu_ts^2).
  const double lam = 0.035, mu_min = 2.2, mu_ts = 0.6;
  const double change = (pert_path(0.0, mu_ts, lam) - pert_path(-0.03, mu_min, lam)) - 0.03;
  CHECK(change == doctest::Approx(0.5 * lam * lam * (mu_min * mu_min - mu_ts * mu_ts)).epsilon(1e-12));
  // Depends only on mu^2.
  CHECK(pert_path(0.1, -1.3, lam) == pert_path(0.1, 1.3, lam));
}

TEST_CASE("effective photon frequency") {
  CHECK(effective_frequency(0.0, 0.05, w) == w);
  for (double a : {10.0, 85.8, 200.0}) {
    const double lam = 0.03, x = lam * lam * a;
    // Exact q-curvature of the surface by central differences (exact for a quadratic).
    const double h = 1.0;
    auto f = [&](double q) { return pert_surface(0.0, 1.0, a, lam, w, q); };
    const double curv = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
    const double exact = std::sqrt(curv);
    CHECK(exact == doctest::Approx(w * std::sqrt(1.0 - x)).epsilon(1e-9));
    // First order in lambda^2 alpha: the remainder is w x^2 / 8 at leading order.
    const double diff = effective_frequency(a, lam, w) - exact;
    CHECK(diff > 0.0);
    CHECK(diff == doctest::Approx(w * x * x / 8.0).epsilon(0.5 * x + 1e-6));
    CHECK(effective_frequency(a, lam, w) <= w);
    CHECK(london_zpe_shift(a, lam, w) == doctest::Approx(-0.25 * lam * lam * w * a).epsilon(1e-14));
  }
  CHECK_THROWS_AS(effective_frequency(500.0, 0.05, w), DomainError);
}

TEST_CASE("vibrational zero-point correction") {
  CHECK(vibrational_zpe_shift(w, w, 0.2 * w) == doctest::Approx(-0.005 * w).epsilon(1e-14));
  CHECK(vibrational_zpe_shift(w, w, 0.0) == 0.0);
  CHECK(vibrational_zpe_shift(w, w, 0.1 * w) == doctest::Approx(-(0.01 * w * w) / (8.0 * w)).epsilon(1e-14));
  SUBCASE("matches the coupled-oscillator normal modes") {
    const double M = 1836.0, wv = 0.0027, wc = 0.0035, Omega = 1e-5;
    CriticalPoint p;
    p.kind = PointKind::minimum;
    // Mass-weighted coupling wc * Omega_R.
    const double g = wc * Omega;
    p.hessian << M * wv * wv, g * std::sqrt(M), g * std::sqrt(M), wc * wc;
    const auto nm = hessian_normal_modes(p, M, wc);
    CHECK(nm.zpe_vibrational_correction == doctest::Approx(vibrational_zpe_shift(wc, wv, Omega)).epsilon(1e-3));
  }
  CHECK_THROWS_AS(vibrational_zpe_shift(0.0, w, 0.1), ValidationError);
}

TEST_CASE("multimode Casimir-Polder shift") {
  const double mu = 1.8, a = 70.0;
  const ModeSet one{{w, 0.02, Eigen::Vector3d::UnitZ()}};
  const ModeSet two{{2.0 * w, 0.01, Eigen::Vector3d::UnitX()}, {0.5 * w, 0.015, Eigen::Vector3d::UnitY()}};
  SUBCASE("single mode is the Debye path shift plus the London term") {
    const auto s = multimode_shift(mu, a, one);
    CHECK(s.debye == doctest::Approx(pert_path(0.0, mu, 0.02)).epsilon(1e-15));
    CHECK(s.london == doctest::Approx(london_zpe_shift(a, 0.02, w)).epsilon(1e-14));
    CHECK(s.total == s.debye + s.london);
  }
  SUBCASE("additive over concatenated mode sets") {
    ModeSet all = one;
    all.insert(all.end(), two.begin(), two.end());
    const auto s = multimode_shift(mu, a, all);
    CHECK(s.total == doctest::Approx(multimode_shift(mu, a, one).total + multimode_shift(mu, a, two).total).epsilon(1e-14));
    REQUIRE(s.per_mode.size() == 3);
    CHECK(s.debye <= 0.0);
  }
  SUBCASE("effective coupling reproduces the Debye shift") {
    const double l_eff = std::sqrt(0.01 * 0.01 + 0.015 * 0.015);
    CHECK(multimode_shift(mu, a, two).debye == doctest::Approx(pert_path(0.0, mu, l_eff)).epsilon(1e-14));
  }
  SUBCASE("vector form projects the dipole on each polarization") {
    const Eigen::Vector3d mu_v(0.3, -1.1, 0.7);
    const Eigen::Matrix3d iso = a * Eigen::Matrix3d::Identity();
    const auto s = multimode_shift(mu_v, iso, two);
    const double expect = -0.5 * (std::pow(0.01 * mu_v.x(), 2) + std::pow(0.015 * mu_v.y(), 2));
    CHECK(s.debye == doctest::Approx(expect).epsilon(1e-14));
    CHECK(s.london == doctest::Approx(multimode_shift(1.0, a, two).london).epsilon(1e-14));
  }
  CHECK_THROWS_AS(multimode_shift(mu, a, ModeSet{{-w, 0.01, Eigen::Vector3d::UnitZ()}}), ValidationError);
  CHECK_THROWS_AS(multimode_shift(mu, a, ModeSet{{w, 0.01, Eigen::Vector3d(1.0, 1.0, 0.0)}}), ValidationError);
}

TEST_CASE("sphere dipole modes") {
  const double a = 20.0, wp = 0.33;
  SUBCASE("Drude") {
    const auto s = sphere_mode_drude(wp, a);
    CHECK(s.omega_0 == doctest::Approx(wp / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(s.mu_eg == doctest::Approx(std::sqrt(s.omega_0 * a * a * a / 2.0)).epsilon(1e-15));
    CHECK(alpha_q(s, 0.0) == doctest::Approx(a * a * a).epsilon(1e-14));
    for (double om : {0.01, 0.1, 0.25}) CHECK(alpha_q(s, om) == doctest::Approx(alpha_classical(s, om)).epsilon(1e-12));
  }
  SUBCASE("Lorentz") {
    const auto s = sphere_mode_lorentz(0.004, 0.006, a);
    CHECK(s.omega_0 * s.omega_0 == doctest::Approx(0.004 * 0.004 + 0.006 * 0.006 / 3.0).epsilon(1e-14));
    for (double om : {0.0, 0.001, 0.009}) CHECK(alpha_q(s, om) == doctest::Approx(alpha_classical(s, om)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(sphere_mode_drude(-1.0, a), ValidationError);
  CHECK_THROWS_AS(sphere_mode_lorentz(0.004, 0.006, 0.0), ValidationError);
}

TEST_CASE("Debye and London terms near a small sphere") {
  const auto s = sphere_mode_drude(0.33, 20.0);
  const double alpha_s = alpha_q(s, 0.0), a0 = 85.0;
  const Eigen::Matrix3d iso = a0 * Eigen::Matrix3d::Identity();
  SUBCASE("dipole perpendicular to the axis") {
    const double r = 60.0, mu = 1.5;
    const auto d = vdw_decomposition(s, Eigen::Vector3d(0.0, 0.0, r), Eigen::Vector3d(mu, 0.0, 0.0), iso);
    CHECK(d.debye == doctest::Approx(-alpha_s * mu * mu / (2.0 * std::pow(r, 6))).epsilon(1e-12));
    // Trace of the squared dipole tensor is 6 / r^6.
    CHECK(d.london == doctest::Approx(-3.0 * a0 * s.mu_eg * s.mu_eg / std::pow(r, 6)).epsilon(1e-12));
  }
  SUBCASE("oblique dipole equals the induced point-polarizability energy") {
    const Eigen::Vector3d rm(25.0, -31.0, 40.0), mu(0.8, 1.1, -0.4);
    // Field of the molecular dipole at the sphere centre, then -alpha E^2 / 2.
    const Eigen::Vector3d n = -rm.normalized();
    const double d = rm.norm();
    const Eigen::Vector3d E = (3.0 * mu.dot(n) * n - mu) / (d * d * d);
    const auto v = vdw_decomposition(s, rm, mu, iso);
    CHECK(v.debye == doctest::Approx(-0.5 * alpha_s * E.squaredNorm()).epsilon(1e-12));
    CHECK(v.debye <= 0.0);
    REQUIRE(v.modes.size() == 3);
    for (const auto& m : v.modes) CHECK(m.omega == s.omega_0);
  }
  SUBCASE("both terms fall off as the sixth power") {
    const Eigen::Vector3d dir = Eigen::Vector3d(1.0, 2.0, 2.0) / 3.0, mu(0.2, 0.0, 1.0);
    const auto near = vdw_decomposition(s, 30.0 * dir, mu, iso), far = vdw_decomposition(s, 60.0 * dir, mu, iso);
    CHECK(near.debye / far.debye == doctest::Approx(64.0).epsilon(1e-12));
    CHECK(near.london / far.london == doctest::Approx(64.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(vdw_decomposition(s, Eigen::Vector3d(0.0, 0.0, 19.0), Eigen::Vector3d::UnitX(), iso), DomainError);
  CHECK_THROWS_AS(dipole_field(Eigen::Vector3d::UnitX(), Eigen::Vector3d::Zero()), DomainError);
}

TEST_CASE("tabulated surface rejects unstable coupling") {
  const Eigen::VectorXd V = Eigen::VectorXd::Zero(3), mu = Eigen::VectorXd::Ones(3);
  Eigen::VectorXd a(3);
  a << 10.0, 500.0, 20.0;
  CHECK_THROWS_AS(PerturbativeSurface(V, mu, a, 0.05, w), DomainError);
  const PerturbativeSurface ok(V, mu, a, 0.03, w);
  CHECK(ok.q_min(1) == doctest::Approx(q_min(1.0, 500.0, 0.03, w)).epsilon(1e-15));
  const Eigen::MatrixXd g = ok.grid(Eigen::Vector2d(0.0, 1.0));
  CHECK(g(2, 1) == ok(2, 1.0));
  CHECK_THROWS_AS(PerturbativeSurface(V, Eigen::VectorXd::Ones(2), a, 0.03, w), ValidationError);
}
