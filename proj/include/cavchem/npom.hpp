#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "cavchem/errors.hpp"
#include "cavchem/shin_metiu.hpp"

namespace cavchem {

// Point charge plus point dipole.
struct ImageElement {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double charge = 0.0;
  Eigen::Vector3d dipole = Eigen::Vector3d::Zero();
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

// Conducting plane through `point` with unit normal pointing into the free side.
struct Plane {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

// Image of an exterior source in a grounded sphere.
ImageElement image_in_sphere(const ImageElement& src, const Sphere& sphere);
// Mirror image in a grounded plane: charge flips, normal dipole component is kept.
ImageElement image_in_plane(const ImageElement& src, const Plane& plane);

double potential_at(const ImageElement& e, const Eigen::Vector3d& r);
Eigen::Vector3d field_at(const ImageElement& e, const Eigen::Vector3d& r);

// Grounded conductors; either may be absent.
struct ConductorSet {
  std::optional<Sphere> sphere;
  std::optional<Plane> plane;
};

struct ImageSeries {
  double U = 0.0;          // induced energy, 1/2 sum over sources of q phi_ind - mu . E_ind
  std::vector<ImageElement> images;
  std::vector<double> increments;  // energy added by each image generation
  double residual = 0.0;           // |last increment| / |U|
};

// Thrown when the ping-pong series has not met the tolerance; carries the partial sum.
class ImageConvergenceError : public NumericalError {
 public:
  ImageConvergenceError(const std::string& what, double partial_U, std::size_t images)
      : NumericalError(what), partial_U(partial_U), images(images) {}
  double partial_U;
  std::size_t images;
};

// Alternating sphere/plane image generations until the increment falls below
// tol * |U| or max_images is reached.
ImageSeries image_series(const std::vector<ImageElement>& sources, const ConductorSet& conductors,
                         double tol = 1e-10, std::size_t max_images = 10000);

// Plane at z = 0, sphere of radius R_s resting a gap above it on the z axis.
// R_s == 0 removes the sphere.
struct NpomGeometry {
  double sphere_radius = 0.0;
  double gap = 0.0;
  std::optional<Eigen::Vector3d> molecule;  // explicit position overrides height_fraction
  double height_fraction = 0.5;             // on-axis height above the plane, in units of the gap
  Eigen::Vector3d orientation = Eigen::Vector3d::UnitZ();

  void validate() const;
  Eigen::Vector3d molecule_position() const;
  ConductorSet conductors() const;
};

struct NpomEnergy {
  double U = 0.0;
  std::size_t images = 0;
  double residual = 0.0;
};

// Induced energy of a dipole of magnitude mu along the geometry's orientation.
NpomEnergy npom_energy(double mu, const NpomGeometry& geom, double tol = 1e-10, std::size_t max_images = 10000);
NpomEnergy npom_energy(const Eigen::Vector3d& mu, const NpomGeometry& geom, double tol = 1e-10,
                       std::size_t max_images = 10000);

struct NpomSweepRow {
  double gap = 0.0;
  double U = 0.0;       // at the minimum dipole
  double delta_Eb = 0.0;
  double lambda_eff = 0.0;
  double V_eff = 0.0;   // bohr^3
  std::size_t images = 0;
  double residual = 0.0;
  bool ok = true;
  std::string status;
};

struct DipolePair {
  double mu_min = 0.0;
  double mu_ts = 0.0;
};

// Permanent dipoles of the ground state at the left minimum and the barrier top.
DipolePair critical_dipoles(const ElectronicStructureTable& table);

// One row per gap; failures are recorded per row.
std::vector<NpomSweepRow> npom_barrier_sweep(const DipolePair& dipoles, const std::vector<double>& gaps,
                                             const NpomGeometry& geom_template, double tol = 1e-10,
                                             std::size_t max_images = 10000, int threads = 1);

}  // namespace cavchem
