#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <type_traits>
#include <vector>

#include "hsl/grids.hpp"

namespace hsl {

// All operators are stored as symmetric form matrices S with
// u^T S v = <L u, v> in the grid's weighted inner product; the pointwise
// action of L on a field is then W^{-1} (S u). Assembly is flux-form in the
// log variable: second order, symmetric positive semidefinite. Boundary
// handling: Dirichlet ghost values at the outer truncation wall, where
// solutions decay like r^delta; natural (no-flux) conditions at the inner
// wall, which truncates a coordinate singularity where solutions stay
// regular. A Dirichlet inner wall would cost O(1) spurious energy on k = 2
// blocks (the axis has only logarithmic capacity). The sphere reduction has
// natural walls on both sides, where the measure density vanishes.

namespace detail {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Stiffness of one log axis against exp((d-2) t) face coefficients.
/// `stride` and `offset` place the axis inside a tensor grid; `scale`
/// multiplies every face (carries the other axis' cell mass and the
/// angular prefactor). The ghost-reflection Dirichlet term is applied at
/// the outer wall only.
inline void add_axis_stiffness(Triplets& trip, const LogAxis& axis, int d,
                               int offset, int stride, double scale) {
  const double inv_h = 1.0 / axis.h;
  for (int f = 1; f < axis.n; ++f) {
    const double c = scale * std::exp((d - 2) * axis.face_t(f)) * inv_h;
    const int a = offset + (f - 1) * stride;
    const int b = offset + f * stride;
    trip.emplace_back(a, a, c);
    trip.emplace_back(b, b, c);
    trip.emplace_back(a, b, -c);
    trip.emplace_back(b, a, -c);
  }
  const double c1 =
      scale * std::exp((d - 2) * axis.face_t(axis.n)) * 2.0 * inv_h;
  const int last = offset + (axis.n - 1) * stride;
  trip.emplace_back(last, last, c1);
}

}  // namespace detail

/// Form matrix of -Delta on the radial class: -u'' - (N-1)/r u'.
inline Eigen::SparseMatrix<double> laplacian_form(const RadialGrid& g) {
  detail::Triplets trip;
  detail::add_axis_stiffness(trip, g.axis, g.N, 0, 1, sphere_surface(g.N - 1));
  Eigen::SparseMatrix<double> S(g.size(), g.size());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// Form matrix of -Delta on the biradial class:
/// -d_11 - (k-1)/rho1 d_1 - d_22 - (N-k-1)/rho2 d_2.
inline Eigen::SparseMatrix<double> laplacian_form(const BiradialGrid& g) {
  detail::Triplets trip;
  const int n = g.n();
  const int k = g.split.k;
  const int nk = g.split.N - g.split.k;
  for (int j = 0; j < n; ++j)
    detail::add_axis_stiffness(trip, g.axis, k, g.index(0, j), 1,
                               g.prefactor * g.mass2[j]);
  for (int i = 0; i < n; ++i)
    detail::add_axis_stiffness(trip, g.axis, nk, g.index(i, 0), n,
                               g.prefactor * g.mass1[i]);
  Eigen::SparseMatrix<double> S(g.size(), g.size());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// Form matrix of -Delta on the latitude reduction of S^N:
/// -d_pp - ((N-k) cot psi - (k-1) tan psi) d_p. The measure density
/// vanishes at both poles, so no wall terms appear (natural conditions).
inline Eigen::SparseMatrix<double> laplacian_form(const SphereGrid& g) {
  detail::Triplets trip;
  const double inv_h = 1.0 / g.h;
  for (int f = 1; f < g.n; ++f) {
    const double c = g.prefactor * g.density(g.face_psi(f)) * inv_h;
    trip.emplace_back(f - 1, f - 1, c);
    trip.emplace_back(f, f, c);
    trip.emplace_back(f - 1, f, -c);
    trip.emplace_back(f, f - 1, -c);
  }
  Eigen::SparseMatrix<double> S(g.size(), g.size());
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// -Delta restricted to a symmetry class, as a weighted symmetric form.
template <class G>
struct ReducedLaplacian {
  std::shared_ptr<const G> grid;
  Eigen::SparseMatrix<double> form;

  Field<G> apply(const Field<G>& u) const {
    if (u.grid != grid && !u.grid->compatible(*grid))
      throw parameter_error("operator and field grids differ");
    return Field<G>(u.grid, (form * u.v.matrix()).array() / grid->w);
  }
};

template <class G>
inline ReducedLaplacian<G> neg_laplacian(std::shared_ptr<const G> grid) {
  return {grid, laplacian_form(*grid)};
}

/// Symmetric form for L = -Delta + V with a nodal potential V.
template <class G>
struct LinearizedOperator {
  std::shared_ptr<const G> grid;
  Eigen::SparseMatrix<double> form;

  Field<G> apply(const Field<G>& u) const {
    if (u.grid != grid && !u.grid->compatible(*grid))
      throw parameter_error("operator and field grids differ");
    return Field<G>(u.grid, (form * u.v.matrix()).array() / grid->w);
  }
};

template <class G>
inline LinearizedOperator<G> linearized_with_potential(
    std::shared_ptr<const G> grid, const Eigen::ArrayXd& potential) {
  LinearizedOperator<G> L{grid, laplacian_form(*grid)};
  for (int p = 0; p < grid->size(); ++p)
    L.form.coeffRef(p, p) += grid->w[p] * potential[p];
  return L;
}

/// <L f, f> in the weighted inner product.
template <class G>
inline double quadratic_form(const LinearizedOperator<G>& L,
                             const Field<G>& f) {
  if (f.grid != L.grid && !f.grid->compatible(*L.grid))
    throw parameter_error("quadratic_form: grids differ");
  return f.v.matrix().dot(L.form * f.v.matrix());
}

// ---------------------------------------------------------------------------
// Discrete gradients for the diagnostic quantities (angular derivative,
// cutoff bound, defect norms): fourth-order central stencils in the
// interior, second-order central one cell in, one-sided at the walls. Every
// row stays within 4/3 of the Lipschitz constant of the sampled values, so
// the logarithmic cutoff bound (slack factor sqrt(3)) survives
// discretization at every node. The operator stiffness keeps its own
// second-order flux form.
// ---------------------------------------------------------------------------

namespace detail {

/// d/dt along one axis of a tensor field, nodes offset + i*stride.
inline void axis_log_derivative(const Eigen::ArrayXd& u, Eigen::ArrayXd& out,
                                const LogAxis& axis, int offset, int stride) {
  const int n = axis.n;
  const double h = axis.h;
  auto at = [&](int i) { return u[offset + i * stride]; };
  auto put = [&](int i, double value) { out[offset + i * stride] = value; };
  put(0, (at(1) - at(0)) / h);
  put(1, (at(2) - at(0)) / (2.0 * h));
  for (int i = 2; i + 2 < n; ++i)
    put(i, (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) /
               (12.0 * h));
  put(n - 2, (at(n - 1) - at(n - 3)) / (2.0 * h));
  put(n - 1, (at(n - 1) - at(n - 2)) / h);
}

}  // namespace detail

/// Partial derivative with respect to r on a radial grid.
inline Field<RadialGrid> d_dr(const Field<RadialGrid>& u) {
  Field<RadialGrid> out(u.grid);
  detail::axis_log_derivative(u.v, out.v, u.grid->axis, 0, 1);
  out.v /= u.grid->axis.r;
  return out;
}

/// Partial derivative with respect to rho1 on a biradial grid.
inline Field<BiradialGrid> d_drho1(const Field<BiradialGrid>& u) {
  Field<BiradialGrid> out(u.grid);
  const int n = u.grid->n();
  for (int j = 0; j < n; ++j)
    detail::axis_log_derivative(u.v, out.v, u.grid->axis, u.grid->index(0, j),
                                1);
  out.v /= u.grid->rho1_;
  return out;
}

/// Partial derivative with respect to rho2 on a biradial grid.
inline Field<BiradialGrid> d_drho2(const Field<BiradialGrid>& u) {
  Field<BiradialGrid> out(u.grid);
  const int n = u.grid->n();
  for (int i = 0; i < n; ++i)
    detail::axis_log_derivative(u.v, out.v, u.grid->axis, u.grid->index(i, 0),
                                n);
  out.v /= u.grid->rho2_;
  return out;
}

// ---------------------------------------------------------------------------
// Quotient, angular shift, cutoff, exponents
// ---------------------------------------------------------------------------

namespace detail {

/// Interior masks: nodes at least `margin_decades` inside the truncation
/// walls (a fixed physical region, stable under refinement). Used by the
/// residual metrics, which exclude wall-affected rows.
inline Eigen::Array<bool, Eigen::Dynamic, 1> interior_mask(
    const RadialGrid& g, double margin_decades) {
  const double margin = margin_decades * std::log(10.0);
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(g.size());
  for (int i = 0; i < g.size(); ++i)
    mask[i] = g.axis.t[i] >= g.axis.t_lo + margin &&
              g.axis.t[i] <= g.axis.t_hi - margin;
  return mask;
}

inline Eigen::Array<bool, Eigen::Dynamic, 1> interior_mask(
    const BiradialGrid& g, double margin_decades) {
  const double margin = margin_decades * std::log(10.0);
  const double lo = g.axis.t_lo + margin;
  const double hi = g.axis.t_hi - margin;
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(g.size());
  for (int p = 0; p < g.size(); ++p) {
    const double s = g.axis.t[g.i_of(p)];
    const double t = g.axis.t[g.j_of(p)];
    mask[p] = s >= lo && s <= hi && t >= lo && t <= hi;
  }
  return mask;
}

template <class G>
inline double masked_norm(const Field<G>& f,
                          const Eigen::Array<bool, Eigen::Dynamic, 1>& mask) {
  double acc = 0.0;
  for (int p = 0; p < f.size(); ++p)
    if (mask[p]) acc += f.grid->w[p] * f.v[p] * f.v[p];
  return std::sqrt(acc);
}

template <class G>
inline double dirichlet_energy(const Eigen::SparseMatrix<double>& S0,
                               const Field<G>& u, double a) {
  double e = u.v.matrix().dot(S0 * u.v.matrix());
  if (a != 0.0)
    for (int p = 0; p < u.size(); ++p)
      e -= a * u.grid->w[p] * u.v[p] * u.v[p] / u.grid->radius_sq(p);
  return e;
}

template <class G>
inline double critical_mass(const Field<G>& u, double p) {
  return (u.grid->w * u.v.abs().pow(p)).sum();
}

}  // namespace detail

/// Sobolev quotient (integral of |grad u|^2 - a u^2/|x|^2) divided by the
/// critical mass to the power 2/2*. Scale invariant; u must be nonzero and
/// a must satisfy the coercivity bound.
template <class G>
inline double hardy_sobolev_quotient(const Field<G>& u, double a,
                                     const Eigen::SparseMatrix<double>& S0) {
  const int N = [&] {
    if constexpr (std::is_same_v<G, RadialGrid>)
      return u.grid->N;
    else
      return u.grid->split.N;
  }();
  require_hardy_coefficient(a, N);
  if (u.v.abs().maxCoeff() == 0.0)
    throw parameter_error("quotient of the zero field is undefined");
  const double p = critical_exponent(N);
  const double e = detail::dirichlet_energy(S0, u, a);
  const double mass = detail::critical_mass(u, p);
  return e / std::pow(mass, 2.0 / p);
}

template <class G>
inline double hardy_sobolev_quotient(const Field<G>& u, double a) {
  return hardy_sobolev_quotient(u, a, laplacian_form(*u.grid));
}

/// Angular eigenvalue shift of the toral mode (m1, m2):
/// m1^2/rho1^2 + m2^2/rho2^2. Mode (1, 1) is the shift appearing in the
/// equation satisfied by the angular derivative w.
inline Field<BiradialGrid> angular_shift(std::shared_ptr<const BiradialGrid> g,
                                         int m1, int m2) {
  if (m1 < 0 || m2 < 0)
    throw parameter_error("angular_shift: mode indices must be >= 0");
  Field<BiradialGrid> out(g);
  for (int p = 0; p < g->size(); ++p)
    out.v[p] = m1 * m1 / (g->rho1(p) * g->rho1(p)) +
               m2 * m2 / (g->rho2(p) * g->rho2(p));
  return out;
}

namespace detail {

inline double log_ramp(double rho, double R1, double R2, double R3,
                       double R4) {
  if (rho <= R1 || rho >= R4) return 0.0;
  if (rho <= R2) return std::log(rho / R1) / std::log(R2 / R1);
  if (rho < R3) return 1.0;
  return 1.0 - std::log(rho / R3) / std::log(R4 / R3);
}

}  // namespace detail

/// Product cutoff eta(rho1, rho2) = eta1(rho1) eta1(rho2) with log-linear
/// ramps: 0 outside [R1, R4], 1 on [R2, R3].
inline Field<BiradialGrid> cutoff_eta(double R1, double R2, double R3,
                                      double R4,
                                      std::shared_ptr<const BiradialGrid> g) {
  if (!(0 < R1 && R1 < R2 && R2 <= R3 && R3 < R4))
    throw parameter_error("cutoff: need 0 < R1 < R2 <= R3 < R4");
  Field<BiradialGrid> out(g);
  for (int p = 0; p < g->size(); ++p)
    out.v[p] = detail::log_ramp(g->rho1(p), R1, R2, R3, R4) *
               detail::log_ramp(g->rho2(p), R1, R2, R3, R4);
  return out;
}

/// Decay/growth exponents of solutions near 0 and infinity: the two roots of
/// t(t + N - 2) = mu with mu = l(l + N - 2) - a.
struct Exponents {
  double gamma;  ///< root controlling behaviour at the origin
  double delta;  ///< root controlling behaviour at infinity
  double mu;     ///< angular eigenvalue used
};

inline Exponents asymptotic_exponents(double a, int N, int l) {
  if (N < 3) throw parameter_error("asymptotic_exponents: N must be >= 3");
  if (l < 0) throw parameter_error("asymptotic_exponents: l must be >= 0");
  const double mu = static_cast<double>(l) * (l + N - 2.0) - a;
  const double half = 0.5 * (N - 2.0);
  const double disc = half * half + mu;
  if (disc < 0.0) {
    std::ostringstream os;
    os << "asymptotic_exponents: ((N-2)/2)^2 + mu = " << disc
       << " < 0, exponents are not real";
    throw parameter_error(os.str());
  }
  const double root = std::sqrt(disc);
  return {-half + root, -half - root, mu};
}

}  // namespace hsl
