#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hsl/common.hpp"
#include "hsl/interp.hpp"

namespace hsl {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// Coordinate split x = (xi, zeta) into blocks of dimensions k and N-k
/// (plane case) or k and N+1-k (sphere case, ambient R^{N+1}).
struct SplitDims {
  int N = 4;  ///< ambient dimension (sphere dimension for SphereGrid)
  int k = 2;  ///< first block dimension
};

inline void require_plane_split(const SplitDims& s) {
  if (s.N < 4 || s.k < 2 || s.N - s.k < 2) {
    std::ostringstream os;
    os << "invalid plane split (N, k) = (" << s.N << ", " << s.k
       << "): need k >= 2 and N-k >= 2";
    throw parameter_error(os.str());
  }
}

inline void require_sphere_split(const SplitDims& s) {
  if (s.N < 3 || s.k < 2 || s.N + 1 - s.k < 2) {
    std::ostringstream os;
    os << "invalid sphere split (N, k) = (" << s.N << ", " << s.k
       << "): need N >= 3, k >= 2 and N+1-k >= 2";
    throw parameter_error(os.str());
  }
}

// ---------------------------------------------------------------------------
// Log-uniform cell-centered axis
// ---------------------------------------------------------------------------

/// n cells tiling [log r_lo, log r_hi]; nodes sit at cell centers, so all
/// radii are strictly inside (r_lo, r_hi). Faces at t_lo + i*h carry the
/// flux coefficients of the difference operators.
struct LogAxis {
  int n = 0;
  double t_lo = 0, t_hi = 0, h = 0;
  Eigen::ArrayXd t;  ///< node log-radii (cell centers)
  Eigen::ArrayXd r;  ///< node radii

  double face_t(int i) const { return t_lo + i * h; }

  static LogAxis build(double r_lo, double r_hi, int n) {
    if (!(r_lo > 0.0) || !(r_hi > r_lo) || !std::isfinite(r_hi))
      throw parameter_error("log axis: need 0 < r_lo < r_hi");
    if (n < 8) throw parameter_error("log axis: need at least 8 cells");
    LogAxis a;
    a.n = n;
    a.t_lo = std::log(r_lo);
    a.t_hi = std::log(r_hi);
    a.h = (a.t_hi - a.t_lo) / n;
    a.t.resize(n);
    a.r.resize(n);
    for (int i = 0; i < n; ++i) {
      a.t[i] = a.t_lo + (i + 0.5) * a.h;
      a.r[i] = std::exp(a.t[i]);
    }
    return a;
  }

  bool compatible(const LogAxis& o) const {
    return n == o.n && t_lo == o.t_lo && t_hi == o.t_hi;
  }
};

namespace detail {

/// Exact cell integrals of exp(d*t) over the axis cells, so the total
/// measure of the truncated domain matches the analytic value to roundoff.
inline Eigen::ArrayXd exp_cell_masses(const LogAxis& a, int d) {
  Eigen::ArrayXd m(a.n);
  for (int i = 0; i < a.n; ++i)
    m[i] = (std::exp(d * a.face_t(i + 1)) - std::exp(d * a.face_t(i))) / d;
  return m;
}

/// Gauss-Legendre nodes/weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x,
                           std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Radial class on R^N: nodes r_i with weights approximating the measure
/// |S^{N-1}| r^{N-1} dr on the truncated shell.
struct RadialGrid {
  int N = 4;
  LogAxis axis;
  Eigen::ArrayXd w;

  int size() const { return axis.n; }
  double r(int i) const { return axis.r[i]; }
  double radius_sq(int i) const { return axis.r[i] * axis.r[i]; }

  bool compatible(const RadialGrid& o) const {
    return N == o.N && axis.compatible(o.axis);
  }
};

inline std::shared_ptr<const RadialGrid> build_radial_grid(int N, double r_min,
                                                           double r_max,
                                                           int n) {
  if (N < 3) throw parameter_error("radial grid: N must be >= 3");
  auto g = std::make_shared<RadialGrid>();
  g->N = N;
  g->axis = LogAxis::build(r_min, r_max, n);
  g->w = sphere_surface(N - 1) * detail::exp_cell_masses(g->axis, N);
  return g;
}

/// Biradial class on R^N = R^k x R^{N-k}: tensor nodes (rho1_i, rho2_j) with
/// weights approximating |S^{k-1}| |S^{N-k-1}| rho1^{k-1} rho2^{N-k-1}
/// drho1 drho2. Storage index p = i + n*j, axis-1 (rho1) fastest.
struct BiradialGrid {
  SplitDims split;
  LogAxis axis;            // shared by both directions
  Eigen::ArrayXd mass1;    // cell integrals of rho1^{k-1} drho1
  Eigen::ArrayXd mass2;    // cell integrals of rho2^{N-k-1} drho2
  double prefactor = 1.0;  // product of the factor-sphere surfaces
  Eigen::ArrayXd w;
  Eigen::ArrayXd rho1_, rho2_;

  int n() const { return axis.n; }
  int size() const { return axis.n * axis.n; }
  int index(int i, int j) const { return i + axis.n * j; }
  int i_of(int p) const { return p % axis.n; }
  int j_of(int p) const { return p / axis.n; }
  double rho1(int p) const { return rho1_[p]; }
  double rho2(int p) const { return rho2_[p]; }
  double radius_sq(int p) const {
    return rho1_[p] * rho1_[p] + rho2_[p] * rho2_[p];
  }

  bool compatible(const BiradialGrid& o) const {
    return split.N == o.split.N && split.k == o.split.k &&
           axis.compatible(o.axis);
  }
};

inline std::shared_ptr<const BiradialGrid> build_biradial_grid(SplitDims split,
                                                               double rho_min,
                                                               double rho_max,
                                                               int n) {
  require_plane_split(split);
  auto g = std::make_shared<BiradialGrid>();
  g->split = split;
  g->axis = LogAxis::build(rho_min, rho_max, n);
  g->mass1 = detail::exp_cell_masses(g->axis, split.k);
  g->mass2 = detail::exp_cell_masses(g->axis, split.N - split.k);
  g->prefactor =
      sphere_surface(split.k - 1) * sphere_surface(split.N - split.k - 1);
  g->w.resize(n * n);
  g->rho1_.resize(n * n);
  g->rho2_.resize(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int p = i + n * j;
      g->w[p] = g->prefactor * g->mass1[i] * g->mass2[j];
      g->rho1_[p] = g->axis.r[i];
      g->rho2_[p] = g->axis.r[j];
    }
  return g;
}

/// Latitude reduction of S^N embedded in R^k x R^{N+1-k}: nodes psi_i in
/// (0, pi/2), weights approximating C cos^{k-1} psi sin^{N-k} psi dpsi with
/// C the product of the factor-sphere surfaces. Cells tile [0, pi/2], so the
/// total weight reproduces the volume of S^N.
struct SphereGrid {
  SplitDims split;  // split.N is the sphere dimension
  int n = 0;
  double h = 0;
  double prefactor = 1.0;
  Eigen::ArrayXd psi;
  Eigen::ArrayXd w;

  int size() const { return n; }
  double face_psi(int i) const { return i * h; }
  /// Measure density without the surface prefactor.
  double density(double p) const {
    return std::pow(std::cos(p), split.k - 1) *
           std::pow(std::sin(p), split.N - split.k);
  }

  bool compatible(const SphereGrid& o) const {
    return split.N == o.split.N && split.k == o.split.k && n == o.n;
  }
};

inline std::shared_ptr<const SphereGrid> build_sphere_grid(SplitDims split,
                                                           int n) {
  require_sphere_split(split);
  if (n < 8) throw parameter_error("sphere grid: need at least 8 cells");
  auto g = std::make_shared<SphereGrid>();
  g->split = split;
  g->n = n;
  g->h = 0.5 * pi / n;
  g->prefactor =
      sphere_surface(split.k - 1) * sphere_surface(split.N - split.k);
  g->psi.resize(n);
  g->w.resize(n);
  std::vector<double> gx, gw;
  detail::gauss_legendre(8, gx, gw);
  for (int i = 0; i < n; ++i) {
    g->psi[i] = (i + 0.5) * g->h;
    const double a = g->face_psi(i), b = g->face_psi(i + 1);
    double cell = 0.0;
    for (size_t q = 0; q < gx.size(); ++q)
      cell += gw[q] * g->density(0.5 * (a + b) + 0.5 * (b - a) * gx[q]);
    g->w[i] = g->prefactor * 0.5 * (b - a) * cell;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Real values sampled on a grid. Arithmetic requires identical grids.
template <class G>
struct Field {
  std::shared_ptr<const G> grid;
  Eigen::ArrayXd v;

  Field() = default;
  explicit Field(std::shared_ptr<const G> g)
      : grid(std::move(g)), v(Eigen::ArrayXd::Zero(grid->size())) {}
  Field(std::shared_ptr<const G> g, Eigen::ArrayXd values)
      : grid(std::move(g)), v(std::move(values)) {
    if (v.size() != grid->size())
      throw parameter_error("field: value count does not match grid");
  }

  int size() const { return static_cast<int>(v.size()); }
};

template <class G>
inline void require_same_grid(const Field<G>& a, const Field<G>& b) {
  if (a.grid == b.grid) return;
  if (!a.grid || !b.grid || !a.grid->compatible(*b.grid))
    throw parameter_error("fields live on different grids");
}

template <class G>
inline Field<G> operator+(const Field<G>& a, const Field<G>& b) {
  require_same_grid(a, b);
  return Field<G>(a.grid, a.v + b.v);
}

template <class G>
inline Field<G> operator-(const Field<G>& a, const Field<G>& b) {
  require_same_grid(a, b);
  return Field<G>(a.grid, a.v - b.v);
}

template <class G>
inline Field<G> operator*(double c, const Field<G>& a) {
  return Field<G>(a.grid, c * a.v);
}

/// Integral of f against the grid measure.
template <class G>
inline double integrate(const Field<G>& f) {
  return (f.grid->w * f.v).sum();
}

/// Weighted inner product <f, g>.
template <class G>
inline double inner(const Field<G>& a, const Field<G>& b) {
  require_same_grid(a, b);
  return (a.grid->w * a.v * b.v).sum();
}

template <class G>
inline double norm(const Field<G>& f) {
  return std::sqrt((f.grid->w * f.v.square()).sum());
}

inline Field<RadialGrid> sample(std::shared_ptr<const RadialGrid> g,
                                const std::function<double(double)>& f) {
  Field<RadialGrid> out(g);
  for (int i = 0; i < g->size(); ++i) out.v[i] = f(g->r(i));
  return out;
}

inline Field<BiradialGrid> sample(
    std::shared_ptr<const BiradialGrid> g,
    const std::function<double(double, double)>& f) {
  Field<BiradialGrid> out(g);
  for (int p = 0; p < g->size(); ++p) out.v[p] = f(g->rho1(p), g->rho2(p));
  return out;
}

inline Field<SphereGrid> sample(std::shared_ptr<const SphereGrid> g,
                                const std::function<double(double)>& f) {
  Field<SphereGrid> out(g);
  for (int i = 0; i < g->size(); ++i) out.v[i] = f(g->psi[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Inter-grid maps
// ---------------------------------------------------------------------------

/// Lift a radial field onto a biradial grid: out(rho1, rho2) =
/// f(sqrt(rho1^2 + rho2^2)), monotone cubic interpolation in log r.
/// The radial grid must span every radius occurring on the target.
inline Field<BiradialGrid> embed_radial_as_biradial(
    const Field<RadialGrid>& f, std::shared_ptr<const BiradialGrid> bg) {
  if (f.grid->N != bg->split.N)
    throw parameter_error("embed: ambient dimensions differ");
  Pchip interp(f.grid->axis.t.matrix(), f.v.matrix());
  Field<BiradialGrid> out(bg);
  for (int p = 0; p < bg->size(); ++p)
    out.v[p] = interp(0.5 * std::log(bg->radius_sq(p)));
  return out;
}

namespace detail {

/// Radial grid whose node span covers [r_lo, r_hi].
inline std::shared_ptr<const RadialGrid> covering_radial_grid(int N,
                                                              double r_lo,
                                                              double r_hi,
                                                              int n) {
  const double L = std::log(r_hi / r_lo);
  const double delta = 1.01 * L / (2.0 * (n - 1)) + 1e-12;
  return build_radial_grid(N, r_lo * std::exp(-2.0 * delta),
                           r_hi * std::exp(2.0 * delta), n);
}

/// Radial grid whose first and last nodes land on [r_first, r_last].
inline std::shared_ptr<const RadialGrid> node_span_radial_grid(int N,
                                                               double r_first,
                                                               double r_last,
                                                               int n) {
  const double h = std::log(r_last / r_first) / (n - 1);
  return build_radial_grid(N, r_first * std::exp(-0.5 * h),
                           r_last * std::exp(0.5 * h), n);
}

inline Pchip2D field_interpolant(const Field<BiradialGrid>& f) {
  const int n = f.grid->n();
  Eigen::MatrixXd values(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) values(i, j) = f.v[f.grid->index(i, j)];
  return Pchip2D(f.grid->axis.t.matrix(), f.grid->axis.t.matrix(),
                 std::move(values));
}

}  // namespace detail

/// Measure-weighted average of a biradial field over the arcs
/// rho1^2 + rho2^2 = r^2, at the nodes of the target radial grid. Arcs are
/// clipped to the node hull of the source grid; a node whose arc misses the
/// hull entirely is a resolution error.
inline Field<RadialGrid> radial_average(const Field<BiradialGrid>& f,
                                        std::shared_ptr<const RadialGrid> rg) {
  if (rg->N != f.grid->split.N)
    throw parameter_error("radial_average: ambient dimensions differ");
  const Pchip2D interp = detail::field_interpolant(f);
  const double lo = f.grid->axis.r[0];
  const double hi = f.grid->axis.r[f.grid->n() - 1];
  const int k = f.grid->split.k;
  const int nk = f.grid->split.N - f.grid->split.k;

  std::vector<double> gx, gw;
  detail::gauss_legendre(48, gx, gw);

  Field<RadialGrid> out(rg);
  for (int idx = 0; idx < rg->size(); ++idx) {
    const double r = rg->r(idx);
    auto clamp01 = [](double x) { return std::min(1.0, std::max(-1.0, x)); };
    const double alpha_lo =
        std::max(std::asin(clamp01(lo / r)), std::acos(clamp01(hi / r)));
    const double alpha_hi =
        std::min(std::asin(clamp01(hi / r)), std::acos(clamp01(lo / r)));
    if (!(alpha_hi - alpha_lo > 1e-14)) {
      std::ostringstream os;
      os << "radial_average: empty arc sample at r = " << r;
      throw range_error(os.str());
    }
    double num = 0.0, den = 0.0;
    for (size_t q = 0; q < gx.size(); ++q) {
      const double alpha =
          0.5 * (alpha_lo + alpha_hi) + 0.5 * (alpha_hi - alpha_lo) * gx[q];
      const double c = std::cos(alpha), s = std::sin(alpha);
      const double weight =
          gw[q] * std::pow(c, k - 1) * std::pow(s, nk - 1);
      num += weight * interp.eval_clamped(std::log(r * c), std::log(r * s));
      den += weight;
    }
    out.v[idx] = num / den;
  }
  return out;
}

/// Convenience overload averaging onto a covering radial grid with twice the
/// axis resolution.
inline Field<RadialGrid> radial_average(const Field<BiradialGrid>& f) {
  // node span shrunk slightly inside the occurring radii so every arc is
  // nonempty
  const double lo = f.grid->axis.r[0] * std::sqrt(2.0) * (1.0 + 1e-9);
  const double hi = f.grid->axis.r[f.grid->n() - 1] * std::sqrt(2.0) * (1.0 - 1e-9);
  auto rg = detail::node_span_radial_grid(f.grid->split.N, lo, hi,
                                          2 * f.grid->n());
  return radial_average(f, rg);
}

// ---------------------------------------------------------------------------
// CSV dumps (17 significant digits; reload is bit-exact)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<double> parse_csv_row(const std::string& line, int count,
                                         const std::string& path) {
  std::vector<double> out;
  const char* p = line.c_str();
  char* end = nullptr;
  for (int i = 0; i < count; ++i) {
    out.push_back(std::strtod(p, &end));
    if (end == p) throw parameter_error("malformed CSV row in " + path);
    p = end;
    if (i + 1 < count) {
      if (*p != ',') throw parameter_error("malformed CSV row in " + path);
      ++p;
    }
  }
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parameter_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

inline void write_csv(const Field<RadialGrid>& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parameter_error("cannot open " + path);
  out << "r,value\n";
  for (int i = 0; i < f.size(); ++i)
    out << detail::format_g17(f.grid->r(i)) << ","
        << detail::format_g17(f.v[i]) << "\n";
}

inline void write_csv(const Field<BiradialGrid>& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parameter_error("cannot open " + path);
  out << "rho1,rho2,value\n";
  for (int p = 0; p < f.size(); ++p)
    out << detail::format_g17(f.grid->rho1(p)) << ","
        << detail::format_g17(f.grid->rho2(p)) << ","
        << detail::format_g17(f.v[p]) << "\n";
}

inline void write_csv(const Field<SphereGrid>& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw parameter_error("cannot open " + path);
  out << "psi,value\n";
  for (int i = 0; i < f.size(); ++i)
    out << detail::format_g17(f.grid->psi[i]) << ","
        << detail::format_g17(f.v[i]) << "\n";
}

namespace detail {

template <class G>
Field<G> read_csv_impl(std::shared_ptr<const G> grid, const std::string& path,
                       const std::string& header, int coord_count,
                       const std::function<double(const G&, int, int)>& coord) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != header)
    throw parameter_error("unexpected CSV header in " + path);
  if (static_cast<int>(lines.size()) - 1 != grid->size())
    throw parameter_error("CSV row count does not match grid in " + path);
  Field<G> f(grid);
  for (int i = 0; i < grid->size(); ++i) {
    const auto row = parse_csv_row(lines[i + 1], coord_count + 1, path);
    for (int c = 0; c < coord_count; ++c)
      if (row[c] != coord(*grid, i, c))
        throw parameter_error("CSV coordinates do not match grid in " + path);
    f.v[i] = row[coord_count];
  }
  return f;
}

}  // namespace detail

inline Field<RadialGrid> read_csv(std::shared_ptr<const RadialGrid> grid,
                                  const std::string& path) {
  return detail::read_csv_impl<RadialGrid>(
      grid, path, "r,value", 1,
      [](const RadialGrid& g, int i, int) { return g.r(i); });
}

inline Field<BiradialGrid> read_csv(std::shared_ptr<const BiradialGrid> grid,
                                    const std::string& path) {
  return detail::read_csv_impl<BiradialGrid>(
      grid, path, "rho1,rho2,value", 2,
      [](const BiradialGrid& g, int p, int c) {
        return c == 0 ? g.rho1(p) : g.rho2(p);
      });
}

inline Field<SphereGrid> read_csv(std::shared_ptr<const SphereGrid> grid,
                                  const std::string& path) {
  return detail::read_csv_impl<SphereGrid>(
      grid, path, "psi,value", 1,
      [](const SphereGrid& g, int i, int) { return g.psi[i]; });
}

}  // namespace hsl
