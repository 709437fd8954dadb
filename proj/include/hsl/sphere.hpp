#pragma once

#include <boost/numeric/odeint.hpp>
#include <array>
#include <memory>
#include <sstream>
#include <vector>

#include "hsl/eig.hpp"
#include "hsl/operators.hpp"

namespace hsl {

/// The critical equation on S^N reduced to the latitude of the split
/// S^N in R^k x R^{N+1-k}:
///   -v'' - ((N-k) cot psi - (k-1) tan psi) v' + c v = |v|^{p-2} v
/// with c = N(N-2)/4 and p = 2N/(N-2).
struct SphereProblem {
  SplitDims split;
  std::shared_ptr<const SphereGrid> grid;
  double c_lin = 2.0;
  double p = 4.0;

  static SphereProblem make(int N, int k, int n) {
    SphereProblem prob;
    prob.split = {N, k};
    prob.grid = build_sphere_grid(prob.split, n);
    prob.c_lin = 0.25 * N * (N - 2.0);
    prob.p = critical_exponent(N);
    return prob;
  }
};

/// The unique constant solution c = (N(N-2)/4)^{(N-2)/4}.
inline double sphere_constant_solution(int N) {
  if (N < 3) throw parameter_error("sphere constant: N must be >= 3");
  return std::pow(0.25 * N * (N - 2.0), 0.25 * (N - 2.0));
}

template <class G>
inline double critical_mass(const Field<G>& f, double p) {
  return (f.grid->w * f.v.abs().pow(p)).sum();
}

struct ShootingOptions {
  double psi_margin = 1e-4;   ///< series handoff distance from both poles
  double ode_tol = 1e-12;
  int scan_points = 140;
  double s_lo_factor = 0.1;   ///< scan lower bound as a multiple of c
  double s_hi_factor = 50.0;  ///< scan upper bound as a multiple of c
  int max_nodes = 4;
  int bisect_iterations = 90;
};

/// A converged sign-changing (or constant) latitude profile.
struct NodalSolution {
  Field<SphereGrid> v;
  double s = 0.0;  ///< shooting parameter v(0)
  int zeros = 0;
  double mass = 0.0;  ///< critical mass
  int index = 0;      ///< reduced biradial Morse index
  double boundary_residual_origin = 0.0;
  double boundary_residual_pole = 0.0;
};

namespace detail {

struct ShotResult {
  Eigen::ArrayXd values;  // at the requested latitudes
  double v_end = 0.0;
  double dv_end = 0.0;
  double mismatch = 0.0;  // regularity defect at the far pole
  int zeros = 0;
};

/// Integrate the reduced ODE from a series start at psi_margin and evaluate
/// at the requested latitudes (ascending, inside the open interval).
inline ShotResult integrate_profile(const SphereProblem& prob, double s,
                                    const std::vector<double>& eval_psi,
                                    const ShootingOptions& opts) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 2>;

  const int drift_k = prob.split.k;
  const int drift_nk = prob.split.N - prob.split.k;
  const double c = prob.c_lin;
  const double p = prob.p;
  auto nonlinearity = [p](double v) {
    return std::pow(std::abs(v), p - 2.0) * v;
  };
  auto rhs = [&](const State& y, State& dy, double psi) {
    const double drift =
        drift_nk / std::tan(psi) - (drift_k - 1) * std::tan(psi);
    dy[0] = y[1];
    dy[1] = -drift * y[1] + c * y[0] - nonlinearity(y[0]);
  };

  const double psi_a = opts.psi_margin;
  const double psi_b = 0.5 * pi - opts.psi_margin;
  const double alpha = (c * s - nonlinearity(s)) / (2.0 * (drift_nk + 1));

  std::vector<double> times;
  times.push_back(psi_a);
  for (double q : eval_psi) {
    if (q <= psi_a || q >= psi_b)
      throw parameter_error("integrate_profile: latitude outside span");
    times.push_back(q);
  }
  times.push_back(psi_b);

  State y{s + alpha * psi_a * psi_a, 2.0 * alpha * psi_a};
  std::vector<double> collected;
  auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(
      opts.ode_tol, opts.ode_tol);
  odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(),
                          1e-6, [&](const State& st, double) {
                            collected.push_back(st[0]);
                          });

  ShotResult out;
  out.values.resize(static_cast<int>(eval_psi.size()));
  for (size_t i = 0; i < eval_psi.size(); ++i)
    out.values[static_cast<int>(i)] = collected[i + 1];
  out.v_end = y[0];
  out.dv_end = y[1];
  // regular solutions behave like v_1 + beta (pi/2 - psi)^2 at the pole
  const double beta =
      (c * y[0] - nonlinearity(y[0])) / (2.0 * drift_k);
  out.mismatch = y[1] + 2.0 * beta * opts.psi_margin;
  for (int i = 0; i + 1 < out.values.size(); ++i)
    if (out.values[i] * out.values[i + 1] < 0.0) ++out.zeros;
  return out;
}

}  // namespace detail

/// Negative-eigenvalue count of the reduced linearization
/// -Delta_red + c - (p-1)|v|^{p-2} on the sphere grid.
inline int sphere_morse_index(const SphereProblem& prob,
                              const Field<SphereGrid>& v) {
  const Eigen::ArrayXd potential =
      prob.c_lin - (prob.p - 1.0) * v.v.abs().pow(prob.p - 2.0);
  const auto L = linearized_with_potential(v.grid, potential);
  const double zero_band = 1e-6 * std::max(1.0, potential.abs().maxCoeff());
  return count_below(L.form, v.grid->w, -zero_band);
}

/// Reduced spectrum of the linearization at v (for analytic comparisons).
inline EigenPairs sphere_linearization_eigenpairs(const SphereProblem& prob,
                                                  const Field<SphereGrid>& v,
                                                  int count) {
  const Eigen::ArrayXd potential =
      prob.c_lin - (prob.p - 1.0) * v.v.abs().pow(prob.p - 2.0);
  const auto L = linearized_with_potential(v.grid, potential);
  return smallest_eigenpairs(L.form, v.grid->w, count);
}

/// Shooting solver: bisect the initial value s = v(0) until the profile is
/// regular at both poles and changes sign `nodes` times. Failure reports the
/// whole scan trace.
inline NodalSolution shoot_nodal_solution(const SphereProblem& prob, int nodes,
                                          const ShootingOptions& opts = {}) {
  if (nodes < 0 || nodes > opts.max_nodes)
    throw parameter_error("shoot: node count outside the configured range");
  const double c = sphere_constant_solution(prob.split.N);

  // scan latitudes: fixed, independent of the storage grid
  std::vector<double> scan_psi;
  const int n_scan = 400;
  for (int i = 0; i < n_scan; ++i) {
    const double q = opts.psi_margin +
                     (0.5 * pi - 2.0 * opts.psi_margin) * (i + 0.5) / n_scan;
    scan_psi.push_back(q);
  }

  const double s_lo = c * opts.s_lo_factor;
  const double s_hi = c * opts.s_hi_factor;
  const int m = opts.scan_points;
  std::vector<double> svals(m);
  std::vector<detail::ShotResult> shots(m);
  for (int i = 0; i < m; ++i) {
    svals[i] = s_lo * std::pow(s_hi / s_lo, static_cast<double>(i) / (m - 1));
    shots[i] = detail::integrate_profile(prob, svals[i], scan_psi, opts);
  }

  auto solve_bracket = [&](double a, double fa, double b,
                           double fb) -> double {
    for (int it = 0; it < opts.bisect_iterations; ++it) {
      const double mid = 0.5 * (a + b);
      const double fm =
          detail::integrate_profile(prob, mid, scan_psi, opts).mismatch;
      if (fm == 0.0) return mid;
      if ((fm < 0.0) == (fa < 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
        fb = fm;
      }
      if (b - a <= 1e-15 * std::max(1.0, std::abs(b))) break;
    }
    return 0.5 * (a + b);
  };

  for (int i = 0; i + 1 < m; ++i) {
    if (shots[i].zeros != nodes || shots[i + 1].zeros != nodes) continue;
    if (shots[i].mismatch * shots[i + 1].mismatch > 0.0) continue;
    const double s_star = solve_bracket(svals[i], shots[i].mismatch,
                                        svals[i + 1], shots[i + 1].mismatch);
    const auto probe = detail::integrate_profile(prob, s_star, scan_psi, opts);
    if (probe.zeros != nodes) continue;

    std::vector<double> grid_psi(prob.grid->psi.data(),
                                 prob.grid->psi.data() + prob.grid->size());
    const auto final_shot =
        detail::integrate_profile(prob, s_star, grid_psi, opts);
    NodalSolution sol;
    sol.v = Field<SphereGrid>(prob.grid, final_shot.values);
    sol.s = s_star;
    sol.zeros = probe.zeros;
    sol.mass = critical_mass(sol.v, prob.p);
    sol.index = sphere_morse_index(prob, sol.v);
    // regularity at the near pole is imposed through the series start; the
    // far pole carries the bisected mismatch
    sol.boundary_residual_origin = 0.0;
    sol.boundary_residual_pole = std::abs(final_shot.mismatch);
    return sol;
  }

  std::ostringstream os;
  os << "shooting found no bracket with " << nodes
     << " interior zeros; scan trace (s, zeros, mismatch):";
  for (int i = 0; i < m; ++i)
    os << "\n  " << svals[i] << "  " << shots[i].zeros << "  "
       << shots[i].mismatch;
  throw convergence_error(os.str(), m, 0.0);
}

// ---------------------------------------------------------------------------
// Conformal transport between S^N and R^N (stereographic projection with the
// pole on the second block's axis; the first blocks of the two splits are
// identified).
// ---------------------------------------------------------------------------

/// Conformal weight mu(x) = (2/(1+|x|^2))^{(N-2)/2}.
inline double conformal_weight(double radius_sq, int N) {
  return std::pow(2.0 / (1.0 + radius_sq), 0.5 * (N - 2.0));
}

/// Latitude reached by the inverse stereographic image of a plane point.
inline double transport_latitude(double rho1, double rho2) {
  const double rsq = rho1 * rho1 + rho2 * rho2;
  const double c_part = 2.0 * rho1;
  const double s_part =
      std::sqrt(4.0 * rho2 * rho2 + (rsq - 1.0) * (rsq - 1.0));
  return std::atan2(s_part, c_part);
}

/// Sphere-to-plane transport u(x) = v(Psi(x)) mu(x); preserves the critical
/// mass up to quadrature and interpolation error.
inline Field<BiradialGrid> transport_to_plane(
    const SphereProblem& prob, const Field<SphereGrid>& v,
    std::shared_ptr<const BiradialGrid> bg) {
  if (bg->split.N != prob.split.N || bg->split.k != prob.split.k)
    throw parameter_error("transport: plane split must match the sphere split");
  Pchip interp(v.grid->psi.matrix(), v.v.matrix());
  Field<BiradialGrid> u(bg);
  for (int q = 0; q < bg->size(); ++q) {
    const double psi = transport_latitude(bg->rho1(q), bg->rho2(q));
    u.v[q] = interp.eval_clamped(psi) *
             conformal_weight(bg->radius_sq(q), prob.split.N);
  }
  return u;
}

/// Radial transport of a constant sphere field: u(r) = c mu(r) (the explicit
/// extremal profile). Non-constant fields have no radial image.
inline Field<RadialGrid> transport_constant_to_radial(
    const SphereProblem& prob, const Field<SphereGrid>& v,
    std::shared_ptr<const RadialGrid> rg) {
  if (rg->N != prob.split.N)
    throw parameter_error("transport: dimensions differ");
  const double lo = v.v.minCoeff(), hi = v.v.maxCoeff();
  if (hi - lo > 1e-8 * std::max(1.0, std::abs(hi)))
    throw parameter_error(
        "radial transport needs a constant sphere field; use the biradial "
        "target for general fields");
  const double bar = integrate(v) / v.grid->w.sum();
  Field<RadialGrid> u(rg);
  for (int i = 0; i < rg->size(); ++i)
    u.v[i] = bar * conformal_weight(rg->radius_sq(i), prob.split.N);
  return u;
}

/// Plane-to-sphere transport (inverse weighting), read off along the image
/// of the unit sphere |x| = 1 where the conformal weight is one. The plane
/// grid must cover the sampled points (cos psi, sin psi).
inline Field<SphereGrid> transport_to_sphere(const Field<BiradialGrid>& u,
                                             const SphereProblem& prob) {
  if (u.grid->split.N != prob.split.N || u.grid->split.k != prob.split.k)
    throw parameter_error("transport: plane split must match the sphere split");
  const double lo = u.grid->axis.r[0];
  const double hi = u.grid->axis.r[u.grid->n() - 1];
  const Pchip2D interp = detail::field_interpolant(u);
  Field<SphereGrid> v(prob.grid);
  for (int i = 0; i < prob.grid->size(); ++i) {
    const double r1 = std::cos(prob.grid->psi[i]);
    const double r2 = std::sin(prob.grid->psi[i]);
    if (r1 < lo || r2 < lo || r1 > hi || r2 > hi) {
      std::ostringstream os;
      os << "plane grid does not cover the unit-circle sample at psi = "
         << prob.grid->psi[i];
      throw range_error(os.str());
    }
    v.v[i] = interp.eval_clamped(std::log(r1), std::log(r2));
  }
  return v;
}

/// Interior residual of the plane equation -Delta u = |u|^{p-2} u satisfied
/// by transported sphere solutions (the curvature term collapses into the
/// conformal weight). Vanishes under refinement for genuine solutions.
template <class G>
inline double conformal_residual(const Field<G>& u,
                                 double margin_decades = 1.0) {
  int N = 0;
  if constexpr (std::is_same_v<G, RadialGrid>)
    N = u.grid->N;
  else
    N = u.grid->split.N;
  const double p = critical_exponent(N);
  const auto lap = neg_laplacian(u.grid);
  Field<G> res = lap.apply(u);
  res.v -= u.v.abs().pow(p - 2.0) * u.v;
  return detail::masked_norm(res,
                             detail::interior_mask(*u.grid, margin_decades));
}

}  // namespace hsl
