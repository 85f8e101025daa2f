#include "cavchem/npom.hpp"

#include <cmath>
#include <sstream>

#include "cavchem/fedvr.hpp"
#include "cavchem/parallel.hpp"

namespace cavchem {

namespace {

void require_finite(const ImageElement& e, const char* who) {
  if (!e.position.allFinite() || !std::isfinite(e.charge) || !e.dipole.allFinite())
    throw ValidationError(std::string(who) + ": non-finite source");
}

}  // namespace

ImageElement image_in_sphere(const ImageElement& src, const Sphere& sphere) {
  require_finite(src, "image_in_sphere");
  if (!(sphere.radius > 0.0)) throw ValidationError("image_in_sphere: radius must be positive");
  const Eigen::Vector3d r = src.position - sphere.center;
  const double d = r.norm();
  if (!(d > sphere.radius)) throw DomainError("image_in_sphere: source is not outside the sphere");
  const double k = sphere.radius / d;
  const double rmu = r.dot(src.dipole);
  ImageElement img;
  img.position = sphere.center + k * k * r;
  img.charge = -k * src.charge + sphere.radius * rmu / (d * d * d);
  img.dipole = k * k * k * (2.0 * r * rmu / (d * d) - src.dipole);
  return img;
}

ImageElement image_in_plane(const ImageElement& src, const Plane& plane) {
  require_finite(src, "image_in_plane");
  const Eigen::Vector3d n = plane.normal.normalized();
  const double h = (src.position - plane.point).dot(n);
  if (std::abs(h) <= 1e-12 * std::max(1.0, src.position.norm())) throw DomainError("image_in_plane: source lies on the plane");
  ImageElement img;
  img.position = src.position - 2.0 * h * n;
  img.charge = -src.charge;
  img.dipole = 2.0 * src.dipole.dot(n) * n - src.dipole;
  return img;
}

double potential_at(const ImageElement& e, const Eigen::Vector3d& r) {
  const Eigen::Vector3d d = r - e.position;
  const double s = d.norm();
  if (s == 0.0) throw DomainError("potential_at: evaluation point coincides with the element");
  return e.charge / s + e.dipole.dot(d) / (s * s * s);
}

Eigen::Vector3d field_at(const ImageElement& e, const Eigen::Vector3d& r) {
  const Eigen::Vector3d d = r - e.position;
  const double s = d.norm();
  if (s == 0.0) throw DomainError("field_at: evaluation point coincides with the element");
  const Eigen::Vector3d u = d / s;
  const double s3 = s * s * s;
  return e.charge * u / (s * s) + (3.0 * u * u.dot(e.dipole) - e.dipole) / s3;
}

ImageSeries image_series(const std::vector<ImageElement>& sources, const ConductorSet& conductors, double tol,
                         std::size_t max_images) {
  if (sources.empty()) throw ValidationError("image_series: no sources");
  if (!(tol > 0.0)) throw ValidationError("image_series: tolerance must be positive");
  auto energy_of = [&](const std::vector<ImageElement>& imgs) {
    double u = 0.0;
    for (const auto& s : sources)
      for (const auto& im : imgs) u += 0.5 * (s.charge * potential_at(im, s.position) - s.dipole.dot(field_at(im, s.position)));
    return u;
  };
  ImageSeries out;
  if (!conductors.sphere && !conductors.plane) return out;

  // Chain A starts in the sphere, chain B in the plane; each generation images
  // the previous one in the other conductor.
  std::vector<ImageElement> chain_a, chain_b;
  if (conductors.sphere)
    for (const auto& s : sources) chain_a.push_back(image_in_sphere(s, *conductors.sphere));
  if (conductors.plane)
    for (const auto& s : sources) chain_b.push_back(image_in_plane(s, *conductors.plane));
  bool a_in_sphere = true;
  const bool both = conductors.sphere && conductors.plane;
  while (true) {
    std::vector<ImageElement> gen = chain_a;
    gen.insert(gen.end(), chain_b.begin(), chain_b.end());
    const double inc = energy_of(gen);
    out.U += inc;
    out.increments.push_back(inc);
    out.images.insert(out.images.end(), gen.begin(), gen.end());
    out.residual = out.U != 0.0 ? std::abs(inc / out.U) : 0.0;
    if (!both || out.U == 0.0 || std::abs(inc) < tol * std::abs(out.U)) break;
    if (out.images.size() + gen.size() > max_images) {
      std::ostringstream os;
      os << "image_series: not converged after " << out.images.size() << " images (residual " << out.residual
         << ", partial U " << out.U << ")";
      throw ImageConvergenceError(os.str(), out.U, out.images.size());
    }
    for (auto& e : chain_a) e = a_in_sphere ? image_in_plane(e, *conductors.plane) : image_in_sphere(e, *conductors.sphere);
    for (auto& e : chain_b) e = a_in_sphere ? image_in_sphere(e, *conductors.sphere) : image_in_plane(e, *conductors.plane);
    a_in_sphere = !a_in_sphere;
  }
  return out;
}

void NpomGeometry::validate() const {
  if (!(sphere_radius >= 0.0) || !std::isfinite(sphere_radius)) throw ValidationError("NpomGeometry: sphere radius must be >= 0");
  if (!(gap > 0.0) || !std::isfinite(gap)) throw ValidationError("NpomGeometry: gap must be positive");
  if (!(orientation.norm() > 0.0) || !orientation.allFinite()) throw ValidationError("NpomGeometry: orientation must be non-zero");
  if (!molecule && !(height_fraction > 0.0 && height_fraction < 1.0))
    throw ValidationError("NpomGeometry: height fraction must lie strictly inside (0, 1)");
  const Eigen::Vector3d r = molecule_position();
  if (!(r.z() > 0.0)) throw DomainError("NpomGeometry: molecule must lie above the plane");
  if (sphere_radius > 0.0) {
    const Eigen::Vector3d c(0.0, 0.0, gap + sphere_radius);
    if (!((r - c).norm() > sphere_radius)) throw DomainError("NpomGeometry: molecule lies inside the sphere");
  }
}

Eigen::Vector3d NpomGeometry::molecule_position() const {
  if (molecule) return *molecule;
  return {0.0, 0.0, height_fraction * gap};
}

ConductorSet NpomGeometry::conductors() const {
  ConductorSet c;
  c.plane = Plane{};
  if (sphere_radius > 0.0) c.sphere = Sphere{Eigen::Vector3d(0.0, 0.0, gap + sphere_radius), sphere_radius};
  return c;
}

NpomEnergy npom_energy(const Eigen::Vector3d& mu, const NpomGeometry& geom, double tol, std::size_t max_images) {
  geom.validate();
  ImageElement src;
  src.position = geom.molecule_position();
  src.dipole = mu;
  const auto s = image_series({src}, geom.conductors(), tol, max_images);
  return {s.U, s.images.size(), s.residual};
}

NpomEnergy npom_energy(double mu, const NpomGeometry& geom, double tol, std::size_t max_images) {
  return npom_energy(Eigen::Vector3d(mu * geom.orientation.normalized()), geom, tol, max_images);
}

DipolePair critical_dipoles(const ElectronicStructureTable& table) {
  const auto fit = harmonic_fit(table, table.params.M, Well::left);
  const auto top = barrier_top(table);
  const auto grid = build_grid(table.R_grid_spec);
  return {fit.mu0, grid.interpolate(table.dipole(0, 0), top.R)};
}

std::vector<NpomSweepRow> npom_barrier_sweep(const DipolePair& dipoles, const std::vector<double>& gaps,
                                             const NpomGeometry& geom_template, double tol, std::size_t max_images,
                                             int threads) {
  if (gaps.empty()) throw ValidationError("npom_barrier_sweep: empty gap list");
  if (dipoles.mu_min == 0.0) throw ValidationError("npom_barrier_sweep: minimum dipole is zero, lambda_eff undefined");
  return parallel_map<NpomSweepRow>(gaps.size(), threads, [&](std::size_t i) {
    NpomSweepRow row;
    row.gap = gaps[i];
    try {
      NpomGeometry g = geom_template;
      g.gap = gaps[i];
      const auto emin = npom_energy(dipoles.mu_min, g, tol, max_images);
      const auto ets = npom_energy(dipoles.mu_ts, g, tol, max_images);
      row.U = emin.U;
      row.delta_Eb = ets.U - emin.U;
      row.lambda_eff = emin.U < 0.0 ? std::sqrt(-2.0 * emin.U) / std::abs(dipoles.mu_min) : 0.0;
      row.V_eff = row.lambda_eff > 0.0 ? 4.0 * M_PI / (row.lambda_eff * row.lambda_eff) : INFINITY;
      row.images = emin.images + ets.images;
      row.residual = std::max(emin.residual, ets.residual);
      row.ok = true;
      row.status = "ok";
    } catch (const std::exception& e) {
      row.ok = false;
      row.status = e.what();
    }
    return row;
  });
}

}  // namespace cavchem
