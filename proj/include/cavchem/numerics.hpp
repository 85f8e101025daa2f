#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "cavchem/errors.hpp"

namespace cavchem::numerics {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double rms_residual = 0.0;
};

inline LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_line: need >= 2 paired samples");
  const double mx = x.mean(), my = y.mean();
  const Eigen::VectorXd dx = x.array() - mx, dy = y.array() - my;
  const double sxx = dx.squaredNorm();
  if (sxx == 0.0) throw ValidationError("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = dx.dot(dy) / sxx;
  f.intercept = my - f.slope * mx;
  const Eigen::VectorXd res = y.array() - (f.intercept + f.slope * x.array());
  const double syy = dy.squaredNorm();
  f.r_squared = syy > 0.0 ? 1.0 - res.squaredNorm() / syy : 1.0;
  f.rms_residual = std::sqrt(res.squaredNorm() / static_cast<double>(x.size()));
  return f;
}

// Trapezoid integral of samples y(x) over x <= upper (upper must be a sample).
inline double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double upper) {
  double sum = 0.0;
  for (Eigen::Index i = 1; i < x.size() && x(i) <= upper * (1.0 + 1e-12); ++i)
    sum += 0.5 * (x(i) - x(i - 1)) * (y(i) + y(i - 1));
  return sum;
}

struct ScalarMin {
  double x = 0.0;
  double f = 0.0;
  int iterations = 0;
};

// Brent minimization of f on [a, b].
inline ScalarMin brent_minimize(const std::function<double(double)>& f, double a, double b,
                                double tol = 1e-10, int max_iter = 200) {
  const double golden = 0.3819660112501051;
  double x = a + golden * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-14;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (m >= x) ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x >= m) ? a - x : b - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, it};
}

// Vertex of the parabola through three points; falls back to the middle point.
inline double parabolic_vertex(double x0, double f0, double x1, double f1, double x2, double f2) {
  const double num = (x1 - x0) * (x1 - x0) * (f1 - f2) - (x1 - x2) * (x1 - x2) * (f1 - f0);
  const double den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
  if (den == 0.0) return x1;
  return x1 - 0.5 * num / den;
}

inline Eigen::VectorXd linspace(double a, double b, int n) {
  return Eigen::VectorXd::LinSpaced(n, a, b);
}

}  // namespace cavchem::numerics
