#include "doctest.h"

#include <cmath>
#include <functional>
#include <sstream>

#include "cavchem/scan.hpp"
#include "cavchem/units.hpp"

using namespace cavchem;

namespace {

constexpr double deg = M_PI / 180.0;
constexpr double A = 0.004, B = -0.006, d = 3.0;

double torsion(double th) { return A * std::cos(th * deg) + B * std::cos(2.0 * th * deg); }

// Minima at 0 and 180 degrees, maxima where cos = -A / (4 B).
ScanTable torsion_scan(const std::function<double(double)>& mu_z, double step = 5.0) {
  ScanTable s;
  const auto n = static_cast<Eigen::Index>(std::lround(360.0 / step));
  s.coordinate = Eigen::VectorXd::LinSpaced(n, 0.0, 360.0 - step);
  s.V0.resize(n);
  s.mu = Eigen::MatrixXd::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.V0(i) = torsion(s.coordinate(i));
    s.mu(i, 2) = mu_z(s.coordinate(i));
    s.mu(i, 0) = 0.7;  // off-axis component is ignored
  }
  return s;
}

double sin_dipole(double th) { return d * std::sin(th * deg); }
double cos_dipole(double th) { return d * std::cos(th * deg); }

const ScanCritical& nearest(const std::vector<ScanCritical>& v, double c) {
  const ScanCritical* best = &v.front();
  for (const auto& x : v)
    if (std::abs(std::remainder(x.coordinate - c, 360.0)) < std::abs(std::remainder(best->coordinate - c, 360.0))) best = &x;
  return *best;
}

}  // namespace

TEST_CASE("cubic splines") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(37, 0.0, 360.0 - 10.0);
  Eigen::VectorXd y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = std::sin(x(i) * deg);
  const CubicSpline p(x, y, 360.0);
  SUBCASE("periodic spline interpolates, wraps and is accurate") {
    for (Eigen::Index i = 0; i < x.size(); i += 5) CHECK(p(x(i)) == doctest::Approx(y(i)).epsilon(1e-13));
    for (double t : {3.0, 177.0, 355.0}) {
      CHECK(p(t + 360.0) == doctest::Approx(p(t)).epsilon(1e-12));
      CHECK(p(t - 720.0) == doctest::Approx(p(t)).epsilon(1e-12));
      CHECK(std::abs(p(t) - std::sin(t * deg)) < 1e-4);
      CHECK(std::abs(p.derivative(t) - deg * std::cos(t * deg)) < 1e-5);
    }
  }
  SUBCASE("open spline refuses to extrapolate") {
    const CubicSpline open(x, y);
    CHECK_THROWS_AS(open(-1.0), DomainError);
    CHECK_THROWS_AS(open(351.0), DomainError);
  }
  CHECK_THROWS_AS(CubicSpline(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(0.0, 1.0)), ValidationError);
  CHECK_THROWS_AS(CubicSpline(Eigen::Vector3d(0.0, 2.0, 1.0), Eigen::Vector3d(0.0, 1.0, 2.0)), ValidationError);
  CHECK_THROWS_AS(CubicSpline(Eigen::Vector3d(0.0, 200.0, 360.0), Eigen::Vector3d(0.0, 1.0, 2.0), 360.0), ValidationError);
}

TEST_CASE("zero-dipole minima are unshifted while dipolar transition states drop") {
  const auto scan = torsion_scan(sin_dipole);
  const auto r = scan_analysis(scan, {0.0, 0.02, 0.05}, ScanOptions{});
  REQUIRE(r.bare_critical.size() == 4);
  const double ts = std::acos(-A / (4.0 * B)) / deg;
  CHECK(nearest(r.bare_critical, ts).coordinate == doctest::Approx(ts).epsilon(1e-3));
  CHECK(nearest(r.bare_critical, 180.0).V == doctest::Approx(torsion(180.0)).epsilon(1e-10));

  SUBCASE("decoupled entry reproduces the bare barriers exactly") {
    for (const auto& b : r.per_lambda[0].barriers) {
      CHECK(b.E_cavity == b.E_bare);
      CHECK(b.tst_ratio == 1.0);
    }
  }
  for (std::size_t l = 1; l < r.per_lambda.size(); ++l) {
    const auto& lr = r.per_lambda[l];
    const double lam = lr.lambda;
    CHECK(nearest(lr.critical, 180.0).V == doctest::Approx(torsion(180.0)).epsilon(1e-12));
    CHECK(nearest(lr.critical, 0.0).V == doctest::Approx(torsion(0.0)).epsilon(1e-12));
    REQUIRE_FALSE(lr.barriers.empty());
    for (const auto& b : lr.barriers) {
      // Leaving a zero-dipole minimum is catalysed. The shifted maximum can only
      // sit above the shifted value at the bare transition state.
      const double mu_ts = sin_dipole(b.pair.to);
      CHECK(b.E_cavity < b.E_bare);
      CHECK(b.E_cavity - b.E_bare >= -0.5 * lam * lam * mu_ts * mu_ts - 1e-12);
      CHECK(b.E_cavity - b.E_bare == doctest::Approx(-0.5 * lam * lam * mu_ts * mu_ts).epsilon(0.1));
      CHECK(b.tst_ratio > 1.0);
    }
  }
}

TEST_CASE("barrier change follows the squared-dipole difference") {
  // Dipolar minima at 0 and 180, weaker dipole at the maxima: the barrier grows.
  const auto r = scan_analysis(torsion_scan(cos_dipole), {0.01}, ScanOptions{});
  for (const auto& b : r.per_lambda[0].barriers) {
    const double expect = 0.5 * 0.01 * 0.01 * (std::pow(cos_dipole(b.pair.from), 2) - std::pow(cos_dipole(b.pair.to), 2));
    CHECK(expect > 0.0);
    CHECK(b.E_cavity - b.E_bare == doctest::Approx(expect).epsilon(0.01));
    CHECK(b.tst_ratio < 1.0);
  }
}

TEST_CASE("minimum relocation matches a dense re-minimization") {
  auto tilted = [](double th) { return d * std::cos((th - 40.0) * deg); };
  const double lam = 0.05;
  const auto r = scan_analysis(torsion_scan(tilted, 2.0), {lam}, ScanOptions{});
  // Dense oracle on the analytic shifted path around the minimum at 0.
  double best = 0.0, best_v = INFINITY;
  for (int i = -600000; i <= 600000; ++i) {
    const double th = i * 1e-4;
    const double v = torsion(th) - 0.5 * lam * lam * std::pow(tilted(th), 2);
    if (v < best_v) best_v = v, best = th;
  }
  const auto& rel = r.per_lambda[0].minima_relocation;
  REQUIRE_FALSE(rel.empty());
  const auto it = std::min_element(rel.begin(), rel.end(), [](const auto& a, const auto& b) {
    return std::abs(std::remainder(a.first, 360.0)) < std::abs(std::remainder(b.first, 360.0));
  });
  CHECK(std::abs(std::remainder(it->first, 360.0)) < 1e-3);
  CHECK(std::abs(best) > 5.0);
  CHECK(std::abs(best) < 55.0);
  CHECK(std::remainder(it->second, 360.0) == doctest::Approx(best).epsilon(0.01));
}

TEST_CASE("report is invariant under a global dipole sign flip") {
  auto flipped = [](double th) { return -sin_dipole(th); };
  const auto a = to_json(scan_analysis(torsion_scan(sin_dipole), {0.03}, ScanOptions{}));
  const auto b = to_json(scan_analysis(torsion_scan(flipped), {0.03}, ScanOptions{}));
  const auto& ba = a["per_lambda"][0]["barriers"];
  const auto& bb = b["per_lambda"][0]["barriers"];
  REQUIRE(ba.size() == bb.size());
  for (std::size_t i = 0; i < ba.size(); ++i) {
    CHECK(ba[i]["E_cavity_hartree"].get<double>() == bb[i]["E_cavity_hartree"].get<double>());
    CHECK(ba[i]["to_shifted"].get<double>() == bb[i]["to_shifted"].get<double>());
  }
}

TEST_CASE("London shifts need both a polarizability column and a cavity frequency") {
  auto scan = torsion_scan(sin_dipole);
  ScanOptions opt;
  opt.omega_c = 0.01;
  CHECK_FALSE(scan_analysis(scan, {0.02}, opt).per_lambda[0].london_shift.has_value());
  scan.alpha0 = Eigen::VectorXd::Constant(scan.V0.size(), 40.0);
  const auto r = scan_analysis(scan, {0.02}, opt);
  REQUIRE(r.per_lambda[0].london_shift.has_value());
  for (double s : *r.per_lambda[0].london_shift) CHECK(s == doctest::Approx(-0.25 * 0.02 * 0.02 * 0.01 * 40.0).epsilon(1e-10));
  CHECK_FALSE(scan_analysis(scan, {0.02}, ScanOptions{}).per_lambda[0].london_shift.has_value());
}

TEST_CASE("scan CSV ingestion") {
  SUBCASE("declared units are converted") {
    std::stringstream a, b;
    a << "# units: coordinate=degree energy=eV dipole=debye\ncoordinate,energy,mu_x,mu_y,mu_z\n"
      << "0,0.5,0,0,2.541746\n90,1.0,0,0,0\n180,0.25,0,0,-2.541746\n270,1.0,0,0,0\n360,0.5,0,0,2.541746\n";
    b << "# units: coordinate=degree energy=kcal/mol\ncoordinate,energy,mu_x,mu_y,mu_z,alpha0\n0,627.509474,0,0,1,10\n"
      << "90,0,0,0,0,10\n180,0,0,0,0,10\n";
    const auto s = read_scan_csv(a);
    // The closing row one period later duplicates the first and is dropped.
    CHECK(s.coordinate.size() == 4);
    CHECK(s.V0(1) == doctest::Approx(1.0 / units::hartree_ev).epsilon(1e-14));
    CHECK(s.mu(0, 2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.periodic());
    const auto t = read_scan_csv(b);
    CHECK(t.V0(0) == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(t.alpha0.has_value());
  }
  SUBCASE("malformed input is rejected") {
    std::stringstream no_dipole("coordinate,energy,mu_x\n0,0,0\n1,1,1\n2,2,2\n");
    CHECK_THROWS_AS(read_scan_csv(no_dipole), ValidationError);
    std::stringstream bad_unit("# units: energy=furlong\ncoordinate,energy,mu_x,mu_y,mu_z\n0,0,0,0,0\n");
    CHECK_THROWS_AS(read_scan_csv(bad_unit), ValidationError);
    std::stringstream bad_row("coordinate,energy,mu_x,mu_y,mu_z\n0,0,0,0\n");
    CHECK_THROWS_AS(read_scan_csv(bad_row), ValidationError);
    std::stringstream unsorted("coordinate,energy,mu_x,mu_y,mu_z\n0,0,0,0,0\n20,0,0,0,0\n10,0,0,0,0\n");
    CHECK_THROWS_AS(read_scan_csv(unsorted), ValidationError);
  }
  CHECK_THROWS_AS(load_scan("/nonexistent/scan.csv"), ValidationError);
}

TEST_CASE("open coordinates never extrapolate") {
  ScanTable s;
  s.unit = CoordinateUnit::bohr;
  s.coordinate = Eigen::VectorXd::LinSpaced(41, -2.0, 2.0);
  s.V0 = (s.coordinate.array().square() - 1.0).square() * 0.01;
  s.mu = Eigen::MatrixXd::Zero(41, 3);
  s.mu.col(2) = s.coordinate;
  ScanOptions opt;
  opt.pairs = {{-1.0, 0.0, "left"}};
  const auto r = scan_analysis(s, {0.02}, opt);
  CHECK(r.per_lambda[0].barriers[0].E_cavity - r.per_lambda[0].barriers[0].E_bare ==
        doctest::Approx(0.5 * 0.02 * 0.02).epsilon(0.02));
  opt.pairs = {{-3.0, 0.0, "outside"}};
  CHECK_THROWS_AS(scan_analysis(s, {0.02}, opt), DomainError);
  opt.pairs.clear();
  opt.axis = 3;
  CHECK_THROWS_AS(scan_analysis(s, {0.02}, opt), ValidationError);
  CHECK_THROWS_AS(scan_analysis(s, {}, ScanOptions{}), ValidationError);
}
