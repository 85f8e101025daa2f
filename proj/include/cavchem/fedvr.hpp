#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "cavchem/errors.hpp"

namespace cavchem {

struct GridSpec {
  double lower = -1.0;
  double upper = 1.0;
  int elements = 1;
  int order = 2;

  bool operator==(const GridSpec&) const = default;
};

// Gauss–Lobatto nodes and weights on [-1, 1]; order n gives n + 1 points.
template <typename Scalar>
void gauss_lobatto(int order, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& nodes,
                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights) {
  using std::abs;
  using std::cos;
  const int n = order;
  const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
  nodes.resize(n + 1);
  weights.resize(n + 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p(n + 1);
  for (int k = 0; k <= n; ++k) {
    Scalar x = -cos(pi * Scalar(k) / Scalar(n));
    for (int it = 0; it < 100; ++it) {
      p(0) = 1;
      p(1) = x;
      for (int m = 2; m <= n; ++m)
        p(m) = (Scalar(2 * m - 1) * x * p(m - 1) - Scalar(m - 1) * p(m - 2)) / Scalar(m);
      const Scalar step = (x * p(n) - p(n - 1)) / (Scalar(n + 1) * p(n));
      x -= step;
      if (abs(step) < Scalar(8) * Eigen::NumTraits<Scalar>::epsilon()) break;
    }
    p(0) = 1;
    p(1) = x;
    for (int m = 2; m <= n; ++m)
      p(m) = (Scalar(2 * m - 1) * x * p(m - 1) - Scalar(m - 1) * p(m - 2)) / Scalar(m);
    nodes(k) = x;
    weights(k) = Scalar(2) / (Scalar(n) * Scalar(n + 1) * p(n) * p(n));
  }
  nodes(0) = -1;
  nodes(n) = 1;
  if (n % 2 == 0) nodes(n / 2) = 0;
}

// D(k, i) = derivative of the i-th Lagrange polynomial at node k.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> lobatto_derivative(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& nodes) {
  const Eigen::Index m = nodes.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bary(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Scalar prod = 1;
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != i) prod *= nodes(i) - nodes(j);
    bary(i) = Scalar(1) / prod;
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index i = 0; i < m; ++i)
      if (i != k) d(k, i) = bary(i) / (bary(k) * (nodes(k) - nodes(i)));
    d(k, k) = -d.row(k).sum();
  }
  return d;
}

// Finite-element DVR on [lower, upper] with Dirichlet ends removed.
// Basis functions are normalized: chi_i = f_i / sqrt(W_i).
template <typename Scalar>
struct Grid1D {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Scalar lower = -1;
  Scalar upper = 1;
  int elements = 1;
  int order = 2;
  Vector points;      // every Gauss–Lobatto point, bridged, ends included
  Vector nodes;       // interior nodes (Dirichlet ends dropped), strictly increasing
  Vector weights;     // bridged quadrature weights, > 0
  Matrix kinetic;     // -1/2 d^2/dx^2 for unit mass, symmetric
  Matrix derivative;  // <chi_i | d/dx | chi_j>, antisymmetric
  Vector ref_nodes;
  Vector ref_weights;
  Matrix ref_derivative;

  Eigen::Index size() const { return nodes.size(); }
  Scalar element_width() const { return (upper - lower) / Scalar(elements); }

  // Index of the interior node at x, or -1.
  Eigen::Index node_index(Scalar x, Scalar tol = Scalar(1e-12)) const {
    using std::abs;
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
      if (abs(nodes(i) - x) <= tol) return i;
    return -1;
  }

  // Lagrange interpolant of nodal values; zero at the Dirichlet ends.
  Scalar interpolate(const Vector& values, Scalar x) const {
    if (values.size() != nodes.size())
      throw ValidationError("interpolate: value count does not match grid");
    if (x < lower || x > upper) throw DomainError("interpolate: point outside grid extent");
    const Scalar h = element_width();
    int e = static_cast<int>((x - lower) / h);
    e = std::clamp(e, 0, elements - 1);
    const Scalar a = lower + Scalar(e) * h;
    const Scalar xi = Scalar(2) * (x - a) / h - Scalar(1);
    Scalar result = 0;
    for (int j = 0; j <= order; ++j) {
      const Eigen::Index g = static_cast<Eigen::Index>(e) * order + j - 1;
      if (g < 0 || g >= nodes.size()) continue;
      Scalar l = 1;
      for (int m = 0; m <= order; ++m)
        if (m != j) l *= (xi - ref_nodes(m)) / (ref_nodes(j) - ref_nodes(m));
      result += values(g) * l;
    }
    return result;
  }
};

template <typename Scalar = double>
Grid1D<Scalar> build_grid(Scalar lower, Scalar upper, int elements, int order) {
  using std::sqrt;
  if (!(lower < upper)) throw ValidationError("build_grid: degenerate extent (min >= max)");
  if (elements < 1) throw ValidationError("build_grid: need at least one element");
  if (order < 2) throw ValidationError("build_grid: polynomial order must be >= 2");

  Grid1D<Scalar> g;
  g.lower = lower;
  g.upper = upper;
  g.elements = elements;
  g.order = order;
  gauss_lobatto<Scalar>(order, g.ref_nodes, g.ref_weights);
  g.ref_derivative = lobatto_derivative<Scalar>(g.ref_nodes);

  const Eigen::Index total = static_cast<Eigen::Index>(elements) * order + 1;
  const Scalar h = (upper - lower) / Scalar(elements);
  const Scalar s = h / Scalar(2);
  typename Grid1D<Scalar>::Vector x(total), w = Grid1D<Scalar>::Vector::Zero(total);
  typename Grid1D<Scalar>::Matrix stiff = Grid1D<Scalar>::Matrix::Zero(total, total);
  typename Grid1D<Scalar>::Matrix deriv = Grid1D<Scalar>::Matrix::Zero(total, total);
  const auto& d = g.ref_derivative;
  for (int e = 0; e < elements; ++e) {
    const Scalar a = lower + Scalar(e) * h;
    const Eigen::Index off = static_cast<Eigen::Index>(e) * order;
    for (int i = 0; i <= order; ++i) {
      x(off + i) = a + s * (g.ref_nodes(i) + Scalar(1));
      w(off + i) += s * g.ref_weights(i);
    }
    for (int i = 0; i <= order; ++i) {
      for (int j = 0; j <= order; ++j) {
        Scalar kij = 0;
        for (int k = 0; k <= order; ++k) kij += g.ref_weights(k) * d(k, i) * d(k, j);
        stiff(off + i, off + j) += kij / s;
        deriv(off + i, off + j) += g.ref_weights(i) * d(i, j);
      }
    }
  }
  x(0) = lower;
  x(total - 1) = upper;

  const Eigen::Index n = total - 2;
  g.points = x;
  g.nodes = x.segment(1, n);
  g.weights = w.segment(1, n);
  g.kinetic.resize(n, n);
  g.derivative.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar norm = sqrt(g.weights(i) * g.weights(j));
      g.kinetic(i, j) = Scalar(0.5) * stiff(i + 1, j + 1) / norm;
      g.derivative(i, j) = deriv(i + 1, j + 1) / norm;
    }
  }
  g.kinetic = (g.kinetic + g.kinetic.transpose()).eval() * Scalar(0.5);
  g.derivative = (g.derivative - g.derivative.transpose()).eval() * Scalar(0.5);
  return g;
}

inline Grid1D<double> build_grid(const GridSpec& spec) {
  return build_grid<double>(spec.lower, spec.upper, spec.elements, spec.order);
}

}  // namespace cavchem
