#include "doctest.h"

#include <cmath>
#include <random>

#include "cavchem/npom.hpp"
#include "cavchem/units.hpp"

using namespace cavchem;

namespace {

ImageElement dipole_at(const Eigen::Vector3d& r, const Eigen::Vector3d& mu) {
  ImageElement e;
  e.position = r;
  e.dipole = mu;
  return e;
}

double total_potential(const std::vector<ImageElement>& els, const Eigen::Vector3d& r) {
  double v = 0.0;
  for (const auto& e : els) v += potential_at(e, r);
  return v;
}

}  // namespace

TEST_CASE("sphere images") {
  const Sphere s{Eigen::Vector3d(1.0, -2.0, 0.5), 4.0};
  SUBCASE("a point charge gives the classical image charge") {
    ImageElement q;
    q.position = s.center + Eigen::Vector3d(0.0, 0.0, 10.0);
    q.charge = 1.5;
    const auto img = image_in_sphere(q, s);
    CHECK(img.charge == doctest::Approx(-0.4 * 1.5).epsilon(1e-15));
    CHECK(img.dipole.norm() == 0.0);
    CHECK((img.position - (s.center + Eigen::Vector3d(0.0, 0.0, 1.6))).norm() < 1e-14);
  }
  SUBCASE("a radial dipole induces the printed sphere-frame moment") {
    const Eigen::Vector3d r(0.0, 0.0, 9.0), mu(0.0, 0.0, 2.0);
    const auto img = image_in_sphere(dipole_at(s.center + r, mu), s);
    const Eigen::Vector3d frame = img.dipole + (img.position - s.center) * img.charge;
    const double k3 = std::pow(4.0 / 9.0, 3);
    CHECK((frame - k3 * (3.0 * r * r.dot(mu) / r.squaredNorm() - mu)).norm() < 1e-14);
  }
  SUBCASE("source and image ground the sphere surface") {
    ImageElement src = dipole_at(s.center + Eigen::Vector3d(3.0, -5.0, 6.0), Eigen::Vector3d(0.7, 1.2, -0.4));
    src.charge = 0.3;
    const auto img = image_in_sphere(src, s);
    std::mt19937 rng(7);
    std::normal_distribution<double> n;
    for (int i = 0; i < 200; ++i) {
      const Eigen::Vector3d u = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
      const Eigen::Vector3d p = s.center + s.radius * u;
      const double scale = std::abs(potential_at(src, p)) + 1e-3;
      CHECK(std::abs(potential_at(src, p) + potential_at(img, p)) < 1e-12 * scale + 1e-14);
    }
  }
  CHECK_THROWS_AS(image_in_sphere(dipole_at(s.center + Eigen::Vector3d(0.0, 3.0, 0.0), Eigen::Vector3d::UnitZ()), s),
                  DomainError);
}

TEST_CASE("plane images") {
  const Plane p;
  SUBCASE("normal component kept, tangential flipped, charge negated") {
    ImageElement src = dipole_at(Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(0.5, -0.2, 0.9));
    src.charge = 2.0;
    const auto img = image_in_plane(src, p);
    CHECK((img.position - Eigen::Vector3d(1.0, 2.0, -3.0)).norm() == 0.0);
    CHECK((img.dipole - Eigen::Vector3d(-0.5, 0.2, 0.9)).norm() < 1e-15);
    CHECK(img.charge == -2.0);
    for (double x : {-4.0, 0.0, 7.0}) CHECK(std::abs(potential_at(src, {x, 1.0, 0.0}) + potential_at(img, {x, 1.0, 0.0})) < 1e-15);
  }
  SUBCASE("dipole energy at height d follows (1 + cos^2) / 16 d^3") {
    const double d = 5.0, mu = 1.3;
    for (double th : {0.0, 0.4, M_PI / 2.0}) {
      const Eigen::Vector3d m(mu * std::sin(th), 0.0, mu * std::cos(th));
      const auto s = image_series({dipole_at({0.0, 0.0, d}, m)}, ConductorSet{std::nullopt, p});
      const double c = std::cos(th);
      CHECK(s.U == doctest::Approx(-mu * mu * (1.0 + c * c) / (16.0 * std::pow(d, 3))).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(image_in_plane(dipole_at(Eigen::Vector3d(1.0, 1.0, 0.0), Eigen::Vector3d::UnitZ()), p), DomainError);
}

TEST_CASE("tangential dipole near a grounded sphere") {
  // Induces no image charge; the closed form is -(R/r)^3 mu^2 / (2 (r - R^2/r)^3).
  const double R = 3.0, mu = 0.8;
  for (double r : {5.0, 20.0, 300.0}) {
    const auto s = image_series({dipole_at({r, 0.0, 0.0}, {0.0, mu, 0.0})}, ConductorSet{Sphere{{0.0, 0.0, 0.0}, R}, std::nullopt});
    const double sep = r - R * R / r;
    CHECK(s.U == doctest::Approx(-0.5 * std::pow(R / r, 3) * mu * mu / std::pow(sep, 3)).epsilon(1e-13));
    // Far field: the sphere acts as a point polarizability R^3.
    if (r > 100.0) CHECK(s.U == doctest::Approx(-0.5 * R * R * R * mu * mu / std::pow(r, 6)).epsilon(1e-3));
  }
}

TEST_CASE("nanoparticle-on-mirror series") {
  NpomGeometry g;
  g.sphere_radius = 100.0;
  g.gap = 17.0;
  SUBCASE("boundary conditions hold on both conductors") {
    ImageElement src = dipole_at({1.5, -0.7, 6.0}, Eigen::Vector3d(0.4, 0.2, 1.0));
    const auto c = g.conductors();
    const auto s = image_series({src}, c, 1e-15, 200000);
    std::vector<ImageElement> all = s.images;
    all.push_back(src);
    const double scale = std::abs(potential_at(src, {0.0, 0.0, 0.0}));
    for (double x : {0.0, 3.0, -8.0}) CHECK(std::abs(total_potential(all, {x, 2.0, 0.0})) < 1e-8 * scale);
    for (double th : {0.0, 0.2, 0.5}) {
      const Eigen::Vector3d p = c.sphere->center + c.sphere->radius * Eigen::Vector3d(std::sin(th), 0.0, -std::cos(th));
      CHECK(std::abs(total_potential(all, p)) < 1e-8 * scale);
    }
  }
  SUBCASE("increments shrink geometrically") {
    for (double gap : {8.0, 17.0, 60.0}) {
      g.gap = gap;
      ImageElement src = dipole_at(g.molecule_position(), Eigen::Vector3d::UnitZ());
      const auto s = image_series({src}, g.conductors());
      REQUIRE(s.increments.size() > 3);
      for (std::size_t i = 2; i < s.increments.size(); ++i)
        CHECK(std::abs(s.increments[i]) < std::abs(s.increments[i - 1]));
      CHECK(s.residual < 1e-10);
    }
  }
  SUBCASE("removing the sphere leaves the plane result") {
    g.sphere_radius = 0.0;
    CHECK(npom_energy(2.0, g).U == doctest::Approx(-4.0 / (8.0 * std::pow(0.5 * g.gap, 3))).epsilon(1e-14));
  }
  SUBCASE("a distant sphere leaves the plane result") {
    g.molecule = Eigen::Vector3d(0.0, 0.0, 6.0);
    g.gap = 1e5;
    CHECK(npom_energy(2.0, g).U == doctest::Approx(-4.0 / (8.0 * 216.0)).epsilon(1e-6));
  }
  SUBCASE("energy deepens monotonically as the gap closes") {
    double prev = 0.0;
    for (double gap = 80.0; gap >= 8.0; gap -= 2.0) {
      g.gap = gap;
      const double U = npom_energy(2.0, g).U;
      CHECK(U < prev);
      prev = U;
    }
  }
  SUBCASE("energy scales with the squared dipole and follows the orientation") {
    const double u1 = npom_energy(1.0, g).U;
    CHECK(npom_energy(-3.0, g).U == doctest::Approx(9.0 * u1).epsilon(1e-12));
    g.orientation = Eigen::Vector3d(0.0, 0.0, 5.0);
    CHECK(npom_energy(1.0, g).U == doctest::Approx(u1).epsilon(1e-14));
  }
}

TEST_CASE("superposition of two dipoles through the images") {
  NpomGeometry g;
  g.sphere_radius = 60.0;
  g.gap = 20.0;
  const auto c = g.conductors();
  const ImageElement a = dipole_at({0.0, 0.0, 8.0}, {0.0, 0.3, 1.0});
  const ImageElement b = dipole_at({5.0, -2.0, 12.0}, {0.6, 0.0, -0.8});
  const double tol = 1e-14;
  const auto sa = image_series({a}, c, tol, 100000), sb = image_series({b}, c, tol, 100000);
  const auto joint = image_series({a, b}, c, tol, 100000);
  Eigen::Vector3d Eb_at_a = Eigen::Vector3d::Zero(), Ea_at_b = Eigen::Vector3d::Zero();
  for (const auto& im : sb.images) Eb_at_a += field_at(im, a.position);
  for (const auto& im : sa.images) Ea_at_b += field_at(im, b.position);
  // Reciprocity of the induced interaction.
  CHECK(a.dipole.dot(Eb_at_a) == doctest::Approx(b.dipole.dot(Ea_at_b)).epsilon(1e-9));
  CHECK(joint.U == doctest::Approx(sa.U + sb.U - a.dipole.dot(Eb_at_a)).epsilon(1e-9));
}

TEST_CASE("non-convergence reports the partial sum") {
  NpomGeometry g;
  g.sphere_radius = 400.0;
  g.gap = 2.0;
  try {
    npom_energy(1.0, g, 1e-14, 20);
    FAIL("expected ImageConvergenceError");
  } catch (const ImageConvergenceError& e) {
    CHECK(e.partial_U < 0.0);
    CHECK(e.images <= 20);
    CHECK(std::abs(e.partial_U) < std::abs(npom_energy(1.0, g, 1e-10, 1000000).U));
  }
}

TEST_CASE("geometry validation") {
  NpomGeometry g;
  g.sphere_radius = 10.0;
  g.gap = 0.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.gap = 5.0;
  g.height_fraction = 1.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.height_fraction = 0.5;
  g.molecule = Eigen::Vector3d(0.0, 0.0, 10.0);
  CHECK_THROWS_AS(g.validate(), DomainError);
  g.molecule = Eigen::Vector3d(0.0, 0.0, -1.0);
  CHECK_THROWS_AS(g.validate(), DomainError);
  g.molecule.reset();
  g.orientation = Eigen::Vector3d::Zero();
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK_THROWS_AS(image_series({}, ConductorSet{}), ValidationError);
}

TEST_CASE("gap sweep rows") {
  NpomGeometry g;
  g.sphere_radius = 20.0 / units::bohr_nm;
  const DipolePair dp{2.4, 0.0};
  const std::vector<double> gaps{0.9 / units::bohr_nm, 2.0 / units::bohr_nm, -1.0};
  const auto rows = npom_barrier_sweep(dp, gaps, g);
  REQUIRE(rows.size() == 3);
  for (int i = 0; i < 2; ++i) {
    const auto& r = rows[i];
    CHECK(r.ok);
    CHECK(r.lambda_eff == doctest::Approx(std::sqrt(-2.0 * r.U) / 2.4).epsilon(1e-14));
    CHECK(r.V_eff == doctest::Approx(4.0 * M_PI / (r.lambda_eff * r.lambda_eff)).epsilon(1e-14));
    // Zero transition-state dipole: the barrier rises by the full minimum-dipole stabilization.
    CHECK(r.delta_Eb == doctest::Approx(-r.U).epsilon(1e-14));
  }
  CHECK(rows[0].lambda_eff > rows[1].lambda_eff);
  CHECK_FALSE(rows[2].ok);
  CHECK_FALSE(rows[2].status.empty());
  // 0.007 a.u. corresponds to a mode volume of about 40 nm^3.
  CHECK(4.0 * M_PI / (0.007 * 0.007) * std::pow(units::bohr_nm, 3) == doctest::Approx(40.0).epsilon(0.06));
  CHECK_THROWS_AS(npom_barrier_sweep(DipolePair{0.0, 1.0}, gaps, g), ValidationError);
  CHECK_THROWS_AS(npom_barrier_sweep(dp, {}, g), ValidationError);
}
