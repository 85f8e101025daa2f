#include "doctest.h"

#include <cmath>

#include "cavchem/fedvr.hpp"

using namespace cavchem;

namespace {

Eigen::VectorXd lowest(const Grid1D<double>& g, const Eigen::VectorXd& V, int n) {
  Eigen::MatrixXd h = g.kinetic;
  h.diagonal() += V;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  return es.eigenvalues().head(n);
}

}  // namespace

TEST_CASE("order-2 Lobatto element on [-1, 1]") {
  const auto g = build_grid<double>(-1.0, 1.0, 1, 2);
  REQUIRE(g.points.size() == 3);
  CHECK(g.points(0) == -1.0);
  CHECK(g.points(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.points(2) == 1.0);
  // Dirichlet ends are dropped; only the midpoint is a basis node.
  CHECK(g.size() == 1);
  CHECK(g.ref_weights(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(g.ref_weights(1) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Lobatto quadrature integrates polynomials up to degree 2n - 1") {
  Eigen::VectorXd x, w;
  gauss_lobatto<double>(8, x, w);
  for (int p = 0; p <= 15; ++p) {
    const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
    CHECK(w.dot(x.array().pow(p).matrix()) == doctest::Approx(exact).epsilon(1e-13));
  }
}

TEST_CASE("extended precision nodes agree with double") {
  Eigen::Matrix<long double, Eigen::Dynamic, 1> xl, wl;
  Eigen::VectorXd x, w;
  gauss_lobatto<long double>(10, xl, wl);
  gauss_lobatto<double>(10, x, w);
  CHECK(std::abs(static_cast<double>(wl.sum()) - 2.0) < 1e-15);
  CHECK((xl.cast<double>() - x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("harmonic oscillator ground state") {
  const auto g = build_grid<double>(-10.0, 10.0, 20, 8);
  const Eigen::VectorXd V = 0.5 * g.nodes.array().square();
  const auto e = lowest(g, V, 4);
  CHECK(std::abs(e(0) - 0.5) < 1e-8);
  for (int n = 1; n < 4; ++n) CHECK(std::abs(e(n) - (n + 0.5)) < 1e-8);
}

TEST_CASE("particle in a box of length pi") {
  const auto g = build_grid<double>(0.0, M_PI, 10, 8);
  const auto e = lowest(g, Eigen::VectorXd::Zero(g.size()), 5);
  for (int n = 1; n <= 5; ++n) CHECK(std::abs(e(n - 1) - 0.5 * n * n) < 1e-6);
}

TEST_CASE("operator symmetries") {
  const auto g = build_grid<double>(-3.0, 5.0, 7, 6);
  CHECK((g.kinetic - g.kinetic.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.derivative + g.derivative.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.weights.array() > 0.0).all());
  for (Eigen::Index i = 1; i < g.size(); ++i) CHECK(g.nodes(i) > g.nodes(i - 1));
  // The weights integrate the interior of a function vanishing at the ends.
  const Eigen::VectorXd f = (g.nodes.array() + 3.0) * (5.0 - g.nodes.array());
  CHECK(g.weights.dot(f) == doctest::Approx(std::pow(8.0, 3) / 6.0).epsilon(1e-12));
}

TEST_CASE("derivative matrix reproduces d/dx on smooth functions") {
  auto error = [](int elements) {
    const auto g = build_grid<double>(-8.0, 8.0, elements, 8);
    const Eigen::VectorXd sq = g.weights.cwiseSqrt();
    const Eigen::VectorXd f = (-g.nodes.array().square()).exp();
    const Eigen::VectorXd df = -2.0 * g.nodes.array() * f.array();
    // Coefficients in the normalized basis are sqrt(w) f.
    const Eigen::VectorXd dc = g.derivative * sq.cwiseProduct(f);
    return (dc.cwiseQuotient(sq) - df).cwiseAbs().maxCoeff();
  };
  const double coarse = error(16), fine = error(32);
  CHECK(coarse < 1e-5);
  // Order-8 elements: halving the element size gains far more than second order.
  CHECK(coarse / fine > 64.0);
  CHECK(fine < 1e-7);
}

TEST_CASE("interpolation is exact for element polynomials") {
  const auto g = build_grid<double>(-1.0, 1.0, 3, 6);
  auto f = [](double x) { return (1 - x * x) * (0.3 + x - 2 * x * x * x); };
  Eigen::VectorXd v(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) v(i) = f(g.nodes(i));
  for (double x : {-0.97, -0.5, 0.0, 0.123, 0.66, 0.999}) CHECK(g.interpolate(v, x) == doctest::Approx(f(x)).epsilon(1e-12));
  CHECK_THROWS_AS(g.interpolate(v, 1.5), DomainError);
}

TEST_CASE("degenerate grids are rejected") {
  CHECK_THROWS_AS(build_grid<double>(1.0, 1.0, 4, 4), ValidationError);
  CHECK_THROWS_AS(build_grid<double>(0.0, 1.0, 0, 4), ValidationError);
  CHECK_THROWS_AS(build_grid<double>(0.0, 1.0, 4, 1), ValidationError);
}
