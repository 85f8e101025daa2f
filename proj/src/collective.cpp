#include "cavchem/collective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "cavchem/fedvr.hpp"
#include "cavchem/npom.hpp"
#include "cavchem/numerics.hpp"
#include "cavchem/parallel.hpp"
#include "cavchem/scan.hpp"
#include "cavchem/units.hpp"

namespace cavchem {

Eigen::VectorXd Ensemble::cos_theta() const { return (axes.array() * field_dir.array()).rowwise().sum(); }

double Ensemble::mean_lambda() const {
  if (lambda.size() != size() || size() == 0) throw ValidationError("Ensemble: couplings not assigned");
  return lambda.mean();
}

Eigen::VectorXd Ensemble::relative_couplings() const { return lambda / mean_lambda(); }

double Ensemble::alignment() const {
  return relative_couplings().dot(cos_theta()) / static_cast<double>(size());
}

Ensemble Ensemble::prefix(Eigen::Index n) const {
  if (n < 1 || n > size()) throw ValidationError("Ensemble::prefix: size out of range");
  Ensemble e = *this;
  e.positions = positions.topRows(n);
  e.axes = axes.topRows(n);
  e.field_dir = field_dir.topRows(n);
  if (lambda.size() == size()) e.lambda = lambda.head(n);
  return e;
}

Eigen::Vector3d mode_field_direction(const Eigen::Vector3d& r) {
  const double d = r.norm();
  if (d == 0.0) throw DomainError("mode_field_direction: point at the sphere centre");
  const Eigen::Vector3d u = r / d;
  return (3.0 * u.z() * u - Eigen::Vector3d::UnitZ()).normalized();
}

namespace {

// Uniform cell grid over the cube [-extent, extent]^3 with cells of size >= min_dist.
class CellList {
 public:
  CellList(double extent, double cell) : extent_(extent), cell_(cell) {
    n_ = std::max(1, static_cast<int>(std::ceil(2.0 * extent / cell)));
    cells_.resize(static_cast<std::size_t>(n_) * n_ * n_);
  }
  bool clear_of(const Eigen::Vector3d& p, const std::vector<Eigen::Vector3d>& pts, double min_dist) const {
    const auto c = coords(p);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
          if (x < 0 || y < 0 || z < 0 || x >= n_ || y >= n_ || z >= n_) continue;
          for (auto idx : cells_[index(x, y, z)])
            if ((pts[idx] - p).norm() < min_dist) return false;
        }
    return true;
  }
  void insert(const Eigen::Vector3d& p, std::size_t idx) {
    const auto c = coords(p);
    cells_[index(c[0], c[1], c[2])].push_back(idx);
  }

 private:
  std::array<int, 3> coords(const Eigen::Vector3d& p) const {
    std::array<int, 3> c;
    for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] = std::clamp(static_cast<int>((p(k) + extent_) / cell_), 0, n_ - 1);
    return c;
  }
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(y)) * static_cast<std::size_t>(n_) +
           static_cast<std::size_t>(z);
  }
  double extent_, cell_;
  int n_;
  std::vector<std::vector<std::size_t>> cells_;
};

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double ct = 2.0 * u(rng) - 1.0, phi = 2.0 * M_PI * u(rng);
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  return {st * std::cos(phi), st * std::sin(phi), ct};
}

}  // namespace

Ensemble sample_ensemble(Eigen::Index N, const ShellSpec& shell, std::uint64_t seed, Orientation orientation,
                         std::size_t attempts_per_molecule) {
  if (N < 1) throw ValidationError("sample_ensemble: N must be >= 1");
  if (!(shell.r_in > 0.0) || !(shell.r_out > shell.r_in)) throw ValidationError("sample_ensemble: need 0 < r_in < r_out");
  if (!(shell.min_dist >= 0.0)) throw ValidationError("sample_ensemble: min_dist must be >= 0");
  if (orientation == Orientation::mirror_paired && N % 2 != 0)
    throw ValidationError("sample_ensemble: mirror-paired ensembles need an even N");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r3_in = std::pow(shell.r_in, 3), r3_out = std::pow(shell.r_out, 3);
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(N));
  const bool check = shell.min_dist > 0.0;
  CellList cells(shell.r_out, check ? shell.min_dist : 2.0 * shell.r_out);
  auto accept = [&](const Eigen::Vector3d& p) { return !check || cells.clear_of(p, pts, shell.min_dist); };
  auto add = [&](const Eigen::Vector3d& p) {
    cells.insert(p, pts.size());
    pts.push_back(p);
  };

  const std::size_t budget = attempts_per_molecule * static_cast<std::size_t>(N);
  std::size_t attempts = 0;
  while (static_cast<Eigen::Index>(pts.size()) < N) {
    if (attempts++ >= budget) {
      std::ostringstream os;
      os << "sample_ensemble: rejection budget exhausted after placing " << pts.size() << " of " << N << " molecules";
      throw PackingError(os.str(), static_cast<Eigen::Index>(pts.size()));
    }
    const double r = std::cbrt(r3_in + u(rng) * (r3_out - r3_in));
    const Eigen::Vector3d p = r * random_unit(rng);
    if (!accept(p)) continue;
    if (orientation == Orientation::mirror_paired) {
      const Eigen::Vector3d m(p.x(), p.y(), -p.z());
      if (check && 2.0 * std::abs(p.z()) < shell.min_dist) continue;
      if (!accept(m)) continue;
      add(p);
      add(m);
    } else {
      add(p);
    }
  }

  Ensemble e;
  e.seed = seed;
  e.min_dist = shell.min_dist;
  e.positions.resize(N, 3);
  e.axes.resize(N, 3);
  e.field_dir.resize(N, 3);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& p = pts[static_cast<std::size_t>(i)];
    e.positions.row(i) = p.transpose();
    const Eigen::Vector3d f = mode_field_direction(p);
    e.field_dir.row(i) = f.transpose();
    switch (orientation) {
      case Orientation::aligned:
        e.axes.row(i) = f.transpose();
        break;
      case Orientation::mirror_paired:
        e.axes.row(i) = (i % 2 == 0 ? f : Eigen::Vector3d(-f)).transpose();
        break;
      case Orientation::isotropic:
        e.axes.row(i) = random_unit(rng).transpose();
        break;
    }
  }
  return e;
}

void assign_mode_couplings(Ensemble& ens, const SphereMode& sphere) {
  if (!(sphere.a > 0.0) || !(sphere.omega_0 > 0.0)) throw ValidationError("assign_mode_couplings: invalid sphere mode");
  const double scale = std::sqrt(2.0 / sphere.omega_0) * sphere.mu_eg;
  ens.lambda.resize(ens.size());
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    const Eigen::Vector3d r = ens.positions.row(i).transpose();
    if (!(r.norm() > sphere.a)) throw DomainError("assign_mode_couplings: molecule inside the sphere");
    ens.lambda(i) = scale * dipole_field(Eigen::Vector3d::UnitZ(), r).norm();
  }
}

ShinMetiuDipoles shin_metiu_dipoles(const ElectronicStructureTable& table) {
  const auto left = harmonic_fit(table, table.params.M, Well::left);
  const auto right = harmonic_fit(table, table.params.M, Well::right);
  const auto top = barrier_top(table);
  const auto grid = build_grid(table.R_grid_spec);
  ShinMetiuDipoles d;
  d.left = left.mu0;
  d.right = right.mu0;
  d.ts = grid.interpolate(table.dipole(0, 0), top.R);
  d.R_left = left.R0;
  d.R_right = right.R0;
  d.R_ts = top.R;
  return d;
}

Eigen::Index most_strongly_coupled(const Ensemble& ens) {
  if (ens.lambda.size() != ens.size() || ens.size() == 0) throw ValidationError("most_strongly_coupled: couplings not assigned");
  Eigen::Index k;
  ens.lambda.maxCoeff(&k);
  return k;
}

double dipole_pair_energy(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2, const Eigen::Vector3d& r) {
  const double d = r.norm();
  if (d == 0.0) throw DomainError("dipole_pair_energy: coincident dipoles");
  const Eigen::Vector3d n = r / d;
  return (p1.dot(p2) - 3.0 * p1.dot(n) * p2.dot(n)) / (d * d * d);
}

double dipole_dipole_energy(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& dipoles) {
  if (positions.rows() != dipoles.rows() || positions.cols() != 3 || dipoles.cols() != 3)
    throw ValidationError("dipole_dipole_energy: expected matching (N, 3) arrays");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < positions.rows(); ++i)
    for (Eigen::Index j = i + 1; j < positions.rows(); ++j)
      sum += dipole_pair_energy(dipoles.row(i).transpose(), dipoles.row(j).transpose(),
                                (positions.row(j) - positions.row(i)).transpose());
  return sum;
}

double dipole_dipole_energy(const Ensemble& ens, double mu) { return dipole_dipole_energy(ens.positions, mu * ens.axes); }

CollectiveBarrier collective_barrier(const Ensemble& ens, Eigen::Index k, const BarrierDipoles& d) {
  const Eigen::Index N = ens.size();
  if (ens.lambda.size() != N) throw ValidationError("collective_barrier: couplings not assigned");
  if (k < 0 || k >= N) throw ValidationError("collective_barrier: reacting index out of range");
  const Eigen::VectorXd cos = ens.cos_theta();
  const double l1 = ens.lambda(k), c1 = cos(k);
  const double m_ts = d.mu_ts * c1, m_st = d.mu_start * c1;

  CollectiveBarrier b;
  b.reacting = k;
  b.single = -0.5 * l1 * l1 * (m_ts * m_ts - m_st * m_st);
  double S = 0.0, lam_sum = 0.0, dd = 0.0;
  const Eigen::Vector3d r1 = ens.positions.row(k).transpose(), u1 = ens.axes.row(k).transpose();
  for (Eigen::Index i = 0; i < N; ++i) {
    if (i == k) continue;
    S += ens.lambda(i) * d.mu_others * cos(i);
    lam_sum += ens.lambda(i);
    dd += dipole_pair_energy(u1, d.mu_others * ens.axes.row(i).transpose(), (ens.positions.row(i).transpose() - r1));
  }
  b.collective = -l1 * S * (m_ts - m_st);
  b.total = b.single + b.collective;
  b.dipole_dipole = (d.mu_ts - d.mu_start) * dd;

  const auto Np = static_cast<double>(N - 1);
  b.total_weighted = b.single;
  if (N > 1 && lam_sum > 0.0) {
    const double lbar = lam_sum / Np;
    const double sgn = d.mu_others < 0.0 ? -1.0 : 1.0;
    double w = 0.0;
    for (Eigen::Index i = 0; i < N; ++i)
      if (i != k) w += ens.lambda(i) / lbar * sgn * cos(i);
    b.mean_lambda_others = lbar;
    b.alignment_others = w / Np;
    b.relative_coupling = l1 / lbar;
    b.total_weighted -= Np * lbar * lbar * b.alignment_others * std::abs(d.mu_others) * b.relative_coupling * (m_ts - m_st);
  }
  return b;
}

CollectivePes collective_pes(const Ensemble& ens, Eigen::Index k, const ElectronicStructureTable& table,
                             double mu_others) {
  if (ens.lambda.size() != ens.size()) throw ValidationError("collective_pes: couplings not assigned");
  if (k < 0 || k >= ens.size()) throw ValidationError("collective_pes: reacting index out of range");
  if (table.mu.empty() || table.V.rows() == 0) throw ValidationError("collective_pes: table has no dipole data");
  const Eigen::VectorXd cos = ens.cos_theta();
  CollectivePes p;
  for (Eigen::Index i = 0; i < ens.size(); ++i)
    if (i != k) p.S += ens.lambda(i) * mu_others * cos(i);
  p.R = table.R;
  p.bare = table.surface(0);
  const Eigen::ArrayXd lm = ens.lambda(k) * cos(k) * table.dipole(0, 0).array();
  p.single = p.bare.array() - 0.5 * lm.square();
  p.collective = p.bare.array() - 0.5 * (lm + p.S).square() + 0.5 * p.S * p.S;
  return p;
}

PesBarrier curve_barrier(const Eigen::VectorXd& R, const Eigen::VectorXd& V, int side) {
  const Eigen::Index n = R.size();
  if (n != V.size() || n < 5) throw ValidationError("curve_barrier: need >= 5 paired samples");
  if (side != -1 && side != 1) throw ValidationError("curve_barrier: side must be -1 or +1");
  Eigen::Index top = -1;
  for (Eigen::Index i = 1; i + 1 < n; ++i)
    if (V(i) > V(i - 1) && V(i) >= V(i + 1) && (top < 0 || V(i) > V(top))) top = i;
  if (top < 0) throw NumericalError("curve_barrier: no interior maximum");
  Eigen::Index lo = 0, hi = n - 1;
  if (side < 0) hi = top;
  else lo = top;
  Eigen::Index mn = lo;
  for (Eigen::Index i = lo; i <= hi; ++i)
    if (V(i) < V(mn)) mn = i;
  if (mn == 0 || mn == n - 1 || mn == top) throw NumericalError("curve_barrier: minimum not bracketed on the requested side");
  const CubicSpline s(R, V);
  auto refine = [&](Eigen::Index i, double sgn) {
    const auto r = numerics::brent_minimize([&](double x) { return sgn * s(x); }, R(std::max<Eigen::Index>(i - 2, 0)),
                                            R(std::min<Eigen::Index>(i + 2, n - 1)), 1e-12);
    return std::make_pair(r.x, sgn * r.f);
  };
  const auto m = refine(mn, 1.0), t = refine(top, -1.0);
  return {m.first, t.first, t.second - m.second};
}

CollectiveEnergyReport energy_decomposition(const std::vector<Eigen::Index>& Ns, const std::vector<std::uint64_t>& seeds,
                                            const CollectiveOptions& opt) {
  if (Ns.empty()) throw ValidationError("energy_decomposition: empty N list");
  if (seeds.empty()) throw ValidationError("energy_decomposition: need at least one realization");
  std::vector<Eigen::Index> N = Ns;
  std::sort(N.begin(), N.end());
  N.erase(std::unique(N.begin(), N.end()), N.end());
  if (N.front() < 1) throw ValidationError("energy_decomposition: N must be >= 1");
  const Eigen::Index n_max = N.back();
  const double kT = units::boltzmann * opt.T;
  const double mu = opt.dipoles.mu_others;

  auto per_seed = parallel_map<std::vector<EnsembleRow>>(seeds.size(), opt.threads, [&](std::size_t s) {
    Ensemble ens = sample_ensemble(n_max, opt.shell, seeds[s], opt.orientation);
    assign_mode_couplings(ens, opt.sphere);
    const Eigen::VectorXd cos = ens.cos_theta();
    std::vector<EnsembleRow> rows;
    double sum_lm = 0.0, e_dd = 0.0;
    std::size_t next = 0;
    for (Eigen::Index j = 0; j < n_max && next < N.size(); ++j) {
      const Eigen::Vector3d rj = ens.positions.row(j).transpose(), pj = mu * ens.axes.row(j).transpose();
      for (Eigen::Index i = 0; i < j; ++i)
        e_dd += dipole_pair_energy(mu * ens.axes.row(i).transpose(), pj, rj - ens.positions.row(i).transpose());
      sum_lm += ens.lambda(j) * mu * cos(j);
      if (j + 1 != N[next]) continue;
      ++next;
      const Ensemble sub = ens.prefix(j + 1);
      EnsembleRow r;
      r.seed = seeds[s];
      r.N = j + 1;
      r.E_ds = -0.5 * sum_lm * sum_lm;
      r.E_dd = e_dd;
      r.E_tot = r.E_ds + r.E_dd;
      r.alignment = sub.alignment();
      r.reacting = most_strongly_coupled(sub);
      r.lambda_reacting = sub.lambda(r.reacting);
      const auto b = collective_barrier(sub, r.reacting, opt.dipoles);
      r.dEb_ds = b.total;
      r.dEb_dd = b.dipole_dipole;
      r.rate_factor = std::exp(-r.dEb_ds / kT);
      rows.push_back(r);
    }
    return rows;
  });

  CollectiveEnergyReport rep;
  rep.N = N;
  const auto nN = static_cast<Eigen::Index>(N.size());
  rep.mean_E_ds = rep.mean_E_dd = rep.mean_E_tot = rep.mean_dEb_ds = rep.mean_dEb_dd = rep.std_dEb_ds =
      Eigen::VectorXd::Zero(nN);
  const auto ns = static_cast<double>(seeds.size());
  for (const auto& rows : per_seed)
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      rep.mean_E_ds(ii) += rows[i].E_ds / ns;
      rep.mean_E_dd(ii) += rows[i].E_dd / ns;
      rep.mean_E_tot(ii) += rows[i].E_tot / ns;
      rep.mean_dEb_ds(ii) += rows[i].dEb_ds / ns;
      rep.mean_dEb_dd(ii) += rows[i].dEb_dd / ns;
      rep.rows.push_back(rows[i]);
    }
  for (const auto& rows : per_seed)
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double dv = rows[i].dEb_ds - rep.mean_dEb_ds(ii);
      rep.std_dEb_ds(ii) += dv * dv / ns;
    }
  rep.std_dEb_ds = rep.std_dEb_ds.cwiseSqrt();
  return rep;
}

double sphere_image_barrier(const Ensemble& ens, Eigen::Index k, double a, const BarrierDipoles& d) {
  if (k < 0 || k >= ens.size()) throw ValidationError("sphere_image_barrier: reacting index out of range");
  const Sphere sphere{Eigen::Vector3d::Zero(), a};
  const Eigen::Vector3d r1 = ens.positions.row(k).transpose(), u1 = ens.axes.row(k).transpose();
  // Induced field at r1 from a unit-strength source at r, for a neutral sphere:
  // the grounded image charge is compensated at the centre.
  auto induced_field = [&](const Eigen::Vector3d& r, const Eigen::Vector3d& p) {
    ImageElement src;
    src.position = r;
    src.dipole = p;
    const auto img = image_in_sphere(src, sphere);
    ImageElement comp;
    comp.charge = -img.charge;
    return Eigen::Vector3d(field_at(img, r1) + field_at(comp, r1));
  };
  const double self = u1.dot(induced_field(r1, u1));
  Eigen::Vector3d others = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < ens.size(); ++i)
    if (i != k) others += induced_field(ens.positions.row(i).transpose(), d.mu_others * ens.axes.row(i).transpose());
  const double c = u1.dot(others);
  return -0.5 * (d.mu_ts * d.mu_ts - d.mu_start * d.mu_start) * self - (d.mu_ts - d.mu_start) * c;
}

}  // namespace cavchem
