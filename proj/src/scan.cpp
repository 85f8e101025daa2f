#include "cavchem/scan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "cavchem/errors.hpp"
#include "cavchem/numerics.hpp"
#include "cavchem/units.hpp"

namespace cavchem {

CubicSpline::CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y, std::optional<double> period)
    : x_(std::move(x)), y_(std::move(y)), period_(period) {
  const Eigen::Index n = x_.size();
  if (n != y_.size() || n < 3) throw ValidationError("CubicSpline: need >= 3 paired knots");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(x_(i) > x_(i - 1))) throw ValidationError("CubicSpline: knots must be strictly increasing");
  if (period_ && !(x_(n - 1) - x_(0) < *period_)) throw ValidationError("CubicSpline: knots span a full period");

  auto h = [&](Eigen::Index i) { return i + 1 < n ? x_(i + 1) - x_(i) : x_(0) + *period_ - x_(n - 1); };
  auto yy = [&](Eigen::Index i) { return y_((i % n + n) % n); };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  if (period_) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index im = (i + n - 1) % n, ip = (i + 1) % n;
      const double hm = h(im), hi = h(i);
      A(i, im) += hm;
      A(i, i) += 2.0 * (hm + hi);
      A(i, ip) += hi;
      b(i) = 6.0 * ((yy(i + 1) - yy(i)) / hi - (yy(i) - yy(i - 1)) / hm);
    }
  } else {
    A(0, 0) = 1.0;
    A(n - 1, n - 1) = 1.0;
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
      const double hm = x_(i) - x_(i - 1), hi = x_(i + 1) - x_(i);
      A(i, i - 1) = hm;
      A(i, i) = 2.0 * (hm + hi);
      A(i, i + 1) = hi;
      b(i) = 6.0 * ((y_(i + 1) - y_(i)) / hi - (y_(i) - y_(i - 1)) / hm);
    }
  }
  m_ = A.partialPivLu().solve(b);
}

std::size_t CubicSpline::locate(double& x) const {
  const Eigen::Index n = x_.size();
  if (period_) {
    x = x_(0) + std::fmod(std::fmod(x - x_(0), *period_) + *period_, *period_);
  } else if (x < x_(0) - 1e-12 * std::abs(x_(0)) - 1e-14 || x > x_(n - 1) + 1e-12 * std::abs(x_(n - 1)) + 1e-14) {
    throw DomainError("CubicSpline: extrapolation beyond the tabulated range");
  }
  auto it = std::upper_bound(x_.data(), x_.data() + n, x);
  Eigen::Index i = static_cast<Eigen::Index>(it - x_.data()) - 1;
  const Eigen::Index last = period_ ? n - 1 : n - 2;
  i = std::clamp<Eigen::Index>(i, 0, last);
  return static_cast<std::size_t>(i);
}

double CubicSpline::operator()(double x) const {
  const auto i = static_cast<Eigen::Index>(locate(x));
  const Eigen::Index n = x_.size();
  const Eigen::Index j = (i + 1) % n;
  const double x1 = i + 1 < n ? x_(i + 1) : x_(0) + *period_;
  const double h = x1 - x_(i);
  const double a = x1 - x, b = x - x_(i);
  return m_(i) * a * a * a / (6.0 * h) + m_(j) * b * b * b / (6.0 * h) + (y_(i) / h - m_(i) * h / 6.0) * a +
         (y_(j) / h - m_(j) * h / 6.0) * b;
}

double CubicSpline::derivative(double x) const {
  const auto i = static_cast<Eigen::Index>(locate(x));
  const Eigen::Index n = x_.size();
  const Eigen::Index j = (i + 1) % n;
  const double x1 = i + 1 < n ? x_(i + 1) : x_(0) + *period_;
  const double h = x1 - x_(i);
  const double a = x1 - x, b = x - x_(i);
  return -m_(i) * a * a / (2.0 * h) + m_(j) * b * b / (2.0 * h) - (y_(i) / h - m_(i) * h / 6.0) +
         (y_(j) / h - m_(j) * h / 6.0);
}

double ScanTable::period() const {
  if (unit == CoordinateUnit::degree) return 360.0;
  if (unit == CoordinateUnit::radian) return 2.0 * M_PI;
  throw ValidationError("ScanTable: non-angular coordinate has no period");
}

void ScanTable::validate() const {
  const Eigen::Index n = coordinate.size();
  if (n < 3) throw ValidationError("ScanTable: need at least 3 rows");
  if (V0.size() != n || mu.rows() != n || mu.cols() != 3 || (alpha0 && alpha0->size() != n))
    throw ValidationError("ScanTable: columns differ in length");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(coordinate(i) > coordinate(i - 1))) throw ValidationError("ScanTable: coordinate must be strictly increasing");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur.erase(0, cur.find_first_not_of(" \t\r"));
    cur.erase(cur.find_last_not_of(" \t\r") + 1);
    out.push_back(cur);
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

ScanTable read_scan_csv(std::istream& is) {
  std::map<std::string, std::string> units_decl = {
      {"coordinate", "degree"}, {"energy", "hartree"}, {"dipole", "au"}, {"alpha", "au"}};
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      const auto pos = line.find("units:");
      if (pos == std::string::npos) continue;
      std::istringstream ts(line.substr(pos + 6));
      std::string tok;
      while (ts >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ValidationError("scan csv: malformed unit declaration '" + tok + "'");
        const auto key = lower(tok.substr(0, eq));
        if (!units_decl.count(key)) throw ValidationError("scan csv: unknown unit key '" + key + "'");
        units_decl[key] = lower(tok.substr(eq + 1));
      }
      continue;
    }
    if (header.empty()) {
      header = split(line, ',');
      for (auto& h : header) h = lower(h);
      continue;
    }
    std::vector<double> row;
    for (const auto& f : split(line, ',')) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end == f.c_str()) throw ValidationError("scan csv: malformed number '" + f + "'");
      row.push_back(v);
    }
    if (row.size() != header.size()) throw ValidationError("scan csv: row width differs from header");
    rows.push_back(std::move(row));
  }
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c = col("coordinate"), e = col("energy"), mx = col("mu_x"), my = col("mu_y"), mz = col("mu_z");
  if (!c || !e) throw ValidationError("scan csv: coordinate and energy columns are required");
  if (!mx || !my || !mz) throw ValidationError("scan csv: dipole column missing (need mu_x, mu_y, mu_z)");

  ScanTable s;
  const auto& cu = units_decl["coordinate"];
  if (cu == "degree" || cu == "deg") s.unit = CoordinateUnit::degree;
  else if (cu == "radian" || cu == "rad") s.unit = CoordinateUnit::radian;
  else if (cu == "bohr") s.unit = CoordinateUnit::bohr;
  else if (cu == "angstrom") s.unit = CoordinateUnit::angstrom;
  else throw ValidationError("scan csv: unknown coordinate unit '" + cu + "'");
  double e_scale;
  const auto& eu = units_decl["energy"];
  if (eu == "hartree" || eu == "au") e_scale = 1.0;
  else if (eu == "ev") e_scale = 1.0 / units::hartree_ev;
  else if (eu == "kcal/mol") e_scale = 1.0 / 627.509474;
  else if (eu == "kj/mol") e_scale = 1.0 / 2625.49964;
  else throw ValidationError("scan csv: unknown energy unit '" + eu + "'");
  double d_scale;
  const auto& du = units_decl["dipole"];
  if (du == "au") d_scale = 1.0;
  else if (du == "debye") d_scale = 1.0 / 2.541746;
  else throw ValidationError("scan csv: unknown dipole unit '" + du + "'");
  double a_scale;
  const auto& au = units_decl["alpha"];
  if (au == "au" || au == "bohr3") a_scale = 1.0;
  else if (au == "angstrom3") a_scale = std::pow(units::angstrom_bohr, 3);
  else throw ValidationError("scan csv: unknown polarizability unit '" + au + "'");

  auto n = static_cast<Eigen::Index>(rows.size());
  s.coordinate.resize(n);
  s.V0.resize(n);
  s.mu.resize(n, 3);
  const auto a = col("alpha0");
  if (a) s.alpha0 = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    s.coordinate(i) = r[*c];
    s.V0(i) = r[*e] * e_scale;
    s.mu.row(i) << r[*mx] * d_scale, r[*my] * d_scale, r[*mz] * d_scale;
    if (a) (*s.alpha0)(i) = r[*a] * a_scale;
  }
  // A closing row one period after the first duplicates it.
  if (s.periodic() && n > 1 && std::abs(s.coordinate(n - 1) - s.coordinate(0) - s.period()) < 1e-9 * s.period()) {
    --n;
    s.coordinate.conservativeResize(n);
    s.V0.conservativeResize(n);
    s.mu.conservativeResize(n, 3);
    if (s.alpha0) s.alpha0->conservativeResize(n);
  }
  s.validate();
  return s;
}

ScanTable load_scan(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open scan: " + path);
  return read_scan_csv(is);
}

namespace {

struct ScanModel {
  CubicSpline V, mu, alpha;
  bool has_alpha = false;
  bool periodic = false;
  double period = 0.0;
  double lo = 0.0, hi = 0.0;
  Eigen::VectorXd knots;

  double shifted(double c, double lambda) const {
    const double m = mu(c);
    return V(c) - 0.5 * lambda * lambda * m * m;
  }
  double wrap(double c) const {
    if (!periodic) return c;
    return lo + std::fmod(std::fmod(c - lo, period) + period, period);
  }
  // Local optimum of the shifted path reached from c by walking the knots
  // downhill (minimum) or uphill (maximum), then refined between neighbours.
  std::pair<double, double> local(double c, double lambda, bool minimum) const {
    const Eigen::Index n = knots.size();
    const double sgn = minimum ? 1.0 : -1.0;
    auto f = [&](double x) { return sgn * shifted(wrap(x), lambda); };
    Eigen::Index i = 0;
    (knots.array() - wrap(c)).abs().minCoeff(&i);
    // Knot positions unwrapped along the walk so the bracket stays contiguous.
    double xi = knots(i);
    auto neighbour = [&](Eigen::Index j, int dir, double x) -> std::optional<std::pair<Eigen::Index, double>> {
      const Eigen::Index k = j + dir;
      if (k >= 0 && k < n) return std::make_pair(k, x + (knots(k) - knots(j)));
      if (!periodic) return std::nullopt;
      const Eigen::Index kw = (k + n) % n;
      return std::make_pair(kw, x + dir * (knots(0) + period - knots(n - 1)));
    };
    for (Eigen::Index steps = 0; steps < n; ++steps) {
      const auto l = neighbour(i, -1, xi), r = neighbour(i, 1, xi);
      const double fi = f(xi);
      if (l && f(l->second) < fi && (!r || f(l->second) <= f(r->second))) {
        std::tie(i, xi) = *l;
      } else if (r && f(r->second) < fi) {
        std::tie(i, xi) = *r;
      } else {
        break;
      }
    }
    const auto l = neighbour(i, -1, xi), r = neighbour(i, 1, xi);
    const double a = l ? l->second : xi, b = r ? r->second : xi;
    const auto res = numerics::brent_minimize(f, a, b, 1e-12);
    return {wrap(res.x), sgn * res.f};
  }
};

ScanModel build_model(const ScanTable& s, int axis) {
  if (axis < 0 || axis > 2) throw ValidationError("scan_analysis: axis must be 0, 1 or 2");
  ScanModel m;
  m.periodic = s.periodic();
  m.period = m.periodic ? s.period() : 0.0;
  std::optional<double> p;
  if (m.periodic) p = m.period;
  m.V = CubicSpline(s.coordinate, s.V0, p);
  m.mu = CubicSpline(s.coordinate, s.mu.col(axis), p);
  if (s.alpha0) {
    m.alpha = CubicSpline(s.coordinate, *s.alpha0, p);
    m.has_alpha = true;
  }
  m.lo = s.coordinate(0);
  m.hi = s.coordinate(s.coordinate.size() - 1);
  m.knots = s.coordinate;
  return m;
}

std::vector<ScanCritical> stationary_points(const ScanModel& m, double lambda) {
  const Eigen::Index n = m.knots.size();
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) f(i) = m.shifted(m.knots(i), lambda);
  std::vector<ScanCritical> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!m.periodic && (i == 0 || i == n - 1)) continue;
    const Eigen::Index im = (i + n - 1) % n, ip = (i + 1) % n;
    const bool is_min = f(i) < f(im) && f(i) <= f(ip);
    const bool is_max = f(i) > f(im) && f(i) >= f(ip);
    if (!is_min && !is_max) continue;
    const double left = m.knots(i) - (i == 0 ? m.knots(0) + m.period - m.knots(n - 1) : m.knots(i) - m.knots(im));
    const double right = m.knots(i) + (i == n - 1 ? m.knots(0) + m.period - m.knots(n - 1) : m.knots(ip) - m.knots(i));
    const double sgn = is_min ? 1.0 : -1.0;
    auto g = [&](double x) { return sgn * m.shifted(m.wrap(x), lambda); };
    const auto r = numerics::brent_minimize(g, left, right, 1e-12);
    ScanCritical c;
    c.coordinate = m.wrap(r.x);
    c.V = sgn * r.f;
    c.mu_axis = m.mu(c.coordinate);
    c.minimum = is_min;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.coordinate < b.coordinate; });
  return out;
}

}  // namespace

ScanReport scan_analysis(const ScanTable& scan, const std::vector<double>& lambdas, const ScanOptions& opt) {
  scan.validate();
  if (lambdas.empty()) throw ValidationError("scan_analysis: empty lambda list");
  if (!(opt.T > 0.0)) throw ValidationError("scan_analysis: temperature must be positive");
  const auto m = build_model(scan, opt.axis);
  ScanReport rep;
  rep.axis = opt.axis;
  rep.T = opt.T;
  rep.bare_critical = stationary_points(m, 0.0);

  std::vector<BarrierPair> pairs = opt.pairs;
  if (pairs.empty()) {
    const auto& bc = rep.bare_critical;
    const std::size_t n = bc.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (!bc[i].minimum) continue;
      for (int dir : {-1, 1}) {
        const auto j = static_cast<std::ptrdiff_t>(i) + dir;
        std::size_t k;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) {
          if (!m.periodic) continue;
          k = static_cast<std::size_t>((j + static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n));
        } else {
          k = static_cast<std::size_t>(j);
        }
        if (k == i || bc[k].minimum) continue;
        std::ostringstream os;
        os << bc[i].coordinate << "->" << bc[k].coordinate;
        pairs.push_back({bc[i].coordinate, bc[k].coordinate, os.str()});
      }
    }
  }
  for (const auto& p : pairs)
    if (!m.periodic && (p.from < m.lo || p.from > m.hi || p.to < m.lo || p.to > m.hi))
      throw DomainError("scan_analysis: barrier pair coordinate outside the scanned range (no extrapolation)");

  const double kT = units::boltzmann * opt.T;
  for (double lam : lambdas) {
    ScanLambdaReport lr;
    lr.lambda = lam;
    lr.critical = stationary_points(m, lam);
    for (const auto& p : pairs) {
      ScanBarrier b;
      b.pair = p;
      const auto min0 = m.local(p.from, 0.0, true);
      const auto ts0 = m.local(p.to, 0.0, false);
      const auto min1 = m.local(p.from, lam, true);
      const auto ts1 = m.local(p.to, lam, false);
      b.from_shifted = min1.first;
      b.to_shifted = ts1.first;
      b.E_bare = ts0.second - min0.second;
      b.E_cavity = ts1.second - min1.second;
      b.tst_ratio = std::exp(-(b.E_cavity - b.E_bare) / kT);
      lr.barriers.push_back(b);
    }
    for (const auto& c : rep.bare_critical)
      if (c.minimum) lr.minima_relocation.emplace_back(c.coordinate, m.local(c.coordinate, lam, true).first);
    if (m.has_alpha && opt.omega_c) {
      std::vector<double> london;
      for (const auto& c : lr.critical) london.push_back(-0.25 * lam * lam * *opt.omega_c * m.alpha(c.coordinate));
      lr.london_shift = london;
    }
    rep.per_lambda.push_back(std::move(lr));
  }
  return rep;
}

nlohmann::json to_json(const ScanReport& r) {
  auto crit = [](const std::vector<ScanCritical>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : v)
      a.push_back({{"coordinate", c.coordinate},
                   {"V_hartree", c.V},
                   {"V_eV", units::ev(c.V)},
                   {"mu_axis_au", c.mu_axis},
                   {"type", c.minimum ? "minimum" : "maximum"}});
    return a;
  };
  nlohmann::json j = {{"axis", r.axis}, {"T_K", r.T}, {"bare_stationary_points", crit(r.bare_critical)}};
  j["per_lambda"] = nlohmann::json::array();
  for (const auto& lr : r.per_lambda) {
    nlohmann::json l = {{"lambda_au", lr.lambda}, {"stationary_points", crit(lr.critical)}};
    l["barriers"] = nlohmann::json::array();
    for (const auto& b : lr.barriers)
      l["barriers"].push_back({{"label", b.pair.label},
                               {"from_bare", b.pair.from},
                               {"to_bare", b.pair.to},
                               {"from_shifted", b.from_shifted},
                               {"to_shifted", b.to_shifted},
                               {"E_bare_hartree", b.E_bare},
                               {"E_cavity_hartree", b.E_cavity},
                               {"E_bare_eV", units::ev(b.E_bare)},
                               {"E_cavity_eV", units::ev(b.E_cavity)},
                               {"tst_rate_ratio", b.tst_ratio}});
    l["minima_relocation"] = nlohmann::json::array();
    for (const auto& [a, b] : lr.minima_relocation) l["minima_relocation"].push_back({{"bare", a}, {"shifted", b}});
    if (lr.london_shift) l["london_shift_hartree"] = *lr.london_shift;
    j["per_lambda"].push_back(l);
  }
  return j;
}

}  // namespace cavchem
