#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cavchem/errors.hpp"
#include "json.hpp"

namespace cavchem {

// Cubic spline through (x_i, y_i); periodic splines wrap with the given period.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y, std::optional<double> period = std::nullopt);

  double operator()(double x) const;
  double derivative(double x) const;
  double lower() const { return x_(0); }
  double upper() const { return period_ ? x_(0) + *period_ : x_(x_.size() - 1); }
  bool periodic() const { return period_.has_value(); }

 private:
  std::size_t locate(double& x) const;
  Eigen::VectorXd x_, y_, m_;  // m: second derivatives at knots
  std::optional<double> period_;
};

enum class CoordinateUnit { degree, radian, bohr, angstrom };

struct ScanTable {
  Eigen::VectorXd coordinate;         // in the declared unit
  CoordinateUnit unit = CoordinateUnit::degree;
  Eigen::VectorXd V0;                 // hartree
  Eigen::MatrixXd mu;                 // (n, 3) atomic units
  std::optional<Eigen::VectorXd> alpha0;

  bool periodic() const { return unit == CoordinateUnit::degree || unit == CoordinateUnit::radian; }
  double period() const;
  void validate() const;
};

// CSV with a '# units: coordinate=<u> energy=<u> dipole=<u>' line and a
// header row naming coordinate, energy, mu_x, mu_y, mu_z and optionally alpha0.
ScanTable read_scan_csv(std::istream& is);
ScanTable load_scan(const std::string& path);

struct BarrierPair {
  double from = 0.0;  // minimum coordinate (bare)
  double to = 0.0;    // transition-state coordinate (bare)
  std::string label;
};

struct ScanCritical {
  double coordinate = 0.0;
  double V = 0.0;
  double mu_axis = 0.0;
  bool minimum = true;
};

struct ScanBarrier {
  BarrierPair pair;
  double from_shifted = 0.0;
  double to_shifted = 0.0;
  double E_bare = 0.0;
  double E_cavity = 0.0;
  double tst_ratio = 1.0;
};

struct ScanLambdaReport {
  double lambda = 0.0;
  std::vector<ScanCritical> critical;  // stationary points of the shifted path
  std::vector<ScanBarrier> barriers;
  std::vector<std::pair<double, double>> minima_relocation;  // (bare, shifted)
  std::optional<std::vector<double>> london_shift;           // per critical point, needs alpha0 and omega_c
};

struct ScanReport {
  int axis = 2;
  double T = 300.0;
  std::vector<ScanCritical> bare_critical;
  std::vector<ScanLambdaReport> per_lambda;
};

struct ScanOptions {
  int axis = 2;
  double T = 300.0;
  std::optional<double> omega_c;
  std::vector<BarrierPair> pairs;  // empty: every adjacent minimum -> maximum pair
};

// Shifted path V0 - lambda^2 mu_axis^2 / 2 for every lambda.
ScanReport scan_analysis(const ScanTable& scan, const std::vector<double>& lambdas, const ScanOptions& opt);
nlohmann::json to_json(const ScanReport& r);

}  // namespace cavchem
