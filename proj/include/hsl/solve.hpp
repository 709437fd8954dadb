#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "hsl/operators.hpp"

namespace hsl {

enum class SymmetryClass { radial, biradial, biradial_equivariant };

inline const char* to_string(SymmetryClass c) {
  switch (c) {
    case SymmetryClass::radial: return "radial";
    case SymmetryClass::biradial: return "biradial";
    case SymmetryClass::biradial_equivariant: return "biradial-equivariant";
  }
  return "?";
}

struct GridParams {
  int n = 256;
  double r_min = 1e-3;
  double r_max = 1e3;
};

struct Tolerances {
  double flow_tol = 1e-5;      ///< quotient-gradient target, relative to max(1, Q)
  double newton_tol = 1e-9;    ///< Euler-Lagrange residual target
  double newton_basin = 1e-2;  ///< largest residual accepted as a Newton start
  int max_flow_iterations = 5000;
  int max_newton_iterations = 30;
};

/// Full description of one minimization problem.
struct ProblemSpec {
  int N = 4;
  int k = 2;
  double a = 0.0;
  int m = 0;  ///< equivariance winding, > 0 only with biradial_equivariant
  SymmetryClass cls = SymmetryClass::radial;
  GridParams grid;
  Tolerances tol;

  void validate() const {
    require_hardy_coefficient(a, N);
    if ((m > 0) != (cls == SymmetryClass::biradial_equivariant))
      throw parameter_error(
          "winding m > 0 requires (and is required by) the "
          "biradial-equivariant class");
    if (m < 0) throw parameter_error("winding m must be >= 0");
    if (cls != SymmetryClass::radial) require_plane_split({N, k});
    if (N < 3) throw parameter_error("N must be >= 3");
  }
};

struct IterationRecord {
  int iteration;
  double Q;
  double residual;
  double step;
};

/// A converged (or converging) minimizer. The stored field is normalized to
/// unit critical mass; `residual` measures the rescaled Euler-Lagrange
/// equation -Delta v - a v/|x|^2 (+ m^2 v/rho1^2) = |v|^{2*-2} v at the
/// multiplier-one scale v = Q^{(N-2)/4} u.
template <class G>
struct SolutionT {
  ProblemSpec spec;
  Field<G> u;
  double Q = 0.0;
  double residual = 0.0;
  int flow_iterations = 0;
  int newton_iterations = 0;
  double mass_concentration = 0.0;  ///< |u|^{2*} fraction within one decade
                                    ///< of the grid center
  std::vector<IterationRecord> history;
};

using Solution = std::variant<SolutionT<RadialGrid>, SolutionT<BiradialGrid>>;

namespace detail {

template <class G>
struct QuotientEngine {
  std::shared_ptr<const G> grid;
  ProblemSpec spec;
  double p = 4.0;  // critical exponent
  Eigen::SparseMatrix<double> S0;
  Eigen::ArrayXd potential;       // -a/|x|^2 (+ m^2/rho1^2)
  Eigen::SparseMatrix<double> A;  // S0 + diag(w * potential)
  Eigen::SparseMatrix<double> P;  // SPD preconditioner form
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> precond;

  static QuotientEngine make(const ProblemSpec& spec,
                             std::shared_ptr<const G> grid) {
    QuotientEngine e;
    e.grid = grid;
    e.spec = spec;
    e.p = critical_exponent(spec.N);
    e.S0 = laplacian_form(*grid);
    e.potential = Eigen::ArrayXd::Zero(grid->size());
    for (int q = 0; q < grid->size(); ++q)
      e.potential[q] = -spec.a / grid->radius_sq(q);
    if constexpr (std::is_same_v<G, BiradialGrid>) {
      if (spec.m > 0)
        for (int q = 0; q < grid->size(); ++q)
          e.potential[q] +=
              spec.m * spec.m / (grid->rho1(q) * grid->rho1(q));
    }
    e.A = e.S0;
    for (int q = 0; q < grid->size(); ++q)
      e.A.coeffRef(q, q) += grid->w[q] * e.potential[q];

    e.P = e.A;
    e.precond =
        std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    e.precond->compute(e.P);
    const bool spd = e.precond->info() == Eigen::Success &&
                     e.precond->vectorD().allFinite() &&
                     (e.precond->vectorD().array() > 0.0).all();
    if (!spd) {
      // indefinite Hardy part; fall back to a positive elliptic metric
      e.P = e.S0;
      const double c = 1.0 + std::abs(spec.a);
      for (int q = 0; q < grid->size(); ++q)
        e.P.coeffRef(q, q) += grid->w[q] * c / grid->radius_sq(q);
      e.precond->compute(e.P);
      if (e.precond->info() != Eigen::Success)
        throw spectral_error("flow preconditioner factorization failed");
    }
    return e;
  }

  double mass(const Eigen::ArrayXd& u) const {
    return (grid->w * u.abs().pow(p)).sum();
  }
  Eigen::ArrayXd phi(const Eigen::ArrayXd& u) const {
    return u.abs().pow(p - 2.0) * u;
  }
  double energy(const Eigen::ArrayXd& u) const {
    return u.matrix().dot(A * u.matrix());
  }
  double quotient(const Eigen::ArrayXd& u) const {
    return energy(u) / std::pow(mass(u), 2.0 / p);
  }
  Eigen::ArrayXd normalized(const Eigen::ArrayXd& u) const {
    const double f = mass(u);
    if (!(f > 0.0)) throw parameter_error("cannot normalize the zero field");
    return u / std::pow(f, 1.0 / p);
  }
  /// Integrated quotient gradient at unit mass: dQ[v] = G . v.
  Eigen::ArrayXd integrated_gradient(const Eigen::ArrayXd& u,
                                     double energy_u) const {
    return 2.0 * ((A * u.matrix()).array() - energy_u * grid->w * phi(u));
  }
  double gradient_norm(const Eigen::ArrayXd& g_int) const {
    return std::sqrt((g_int.square() / grid->w).sum());
  }
  /// Euler-Lagrange residual field of the multiplier-one equation.
  Eigen::ArrayXd el_residual(const Eigen::ArrayXd& v) const {
    return (A * v.matrix()).array() / grid->w - phi(v);
  }
  double el_residual_norm(const Eigen::ArrayXd& v) const {
    return std::sqrt((grid->w * el_residual(v).square()).sum());
  }
  /// Multiplier-one scale factor: v = Q^{1/(p-2)} u at unit mass.
  double solution_scale(double Q) const {
    if (!(Q > 0.0))
      throw parameter_error("nonpositive quotient has no solution scale");
    return std::pow(Q, 1.0 / (p - 2.0));
  }

  double concentration(const Eigen::ArrayXd& u) const {
    const double tc = 0.5 * (grid->axis.t_lo + grid->axis.t_hi);
    const double half_decade = 0.5 * std::log(10.0);
    double inside = 0.0, total = 0.0;
    for (int q = 0; q < grid->size(); ++q) {
      const double cell = grid->w[q] * std::pow(std::abs(u[q]), p);
      total += cell;
      if (std::abs(0.5 * std::log(grid->radius_sq(q)) - tc) <= half_decade)
        inside += cell;
    }
    return total > 0.0 ? inside / total : 0.0;
  }
};

template <class G>
std::shared_ptr<const G> make_grid_for(const ProblemSpec& spec);

template <>
inline std::shared_ptr<const RadialGrid> make_grid_for<RadialGrid>(
    const ProblemSpec& spec) {
  return build_radial_grid(spec.N, spec.grid.r_min, spec.grid.r_max,
                           spec.grid.n);
}

template <>
inline std::shared_ptr<const BiradialGrid> make_grid_for<BiradialGrid>(
    const ProblemSpec& spec) {
  return build_biradial_grid({spec.N, spec.k}, spec.grid.r_min,
                             spec.grid.r_max, spec.grid.n);
}

inline Field<RadialGrid> default_seed(const ProblemSpec& spec,
                                      std::shared_ptr<const RadialGrid> g) {
  const double e = 0.5 * (spec.N - 2.0);
  return sample(g, [e](double r) { return std::pow(1.0 + r * r, -e); });
}

/// Integrated Euler-Lagrange residual A v - W phi(v) (its weighted dual
/// norm is el_residual_norm).
template <class G>
inline Eigen::VectorXd integrated_el(const QuotientEngine<G>& engine,
                                     const Eigen::ArrayXd& v) {
  return ((engine.A * v.matrix()).array() - engine.grid->w * engine.phi(v))
      .matrix();
}

/// W-orthonormal basis of the soft eigenmodes of the linearization at v
/// (dilation remnant and the low near-essential band). Newton treats these
/// directions as explicit unknowns of a small nonlinear system; a plain
/// step along them overshoots because the linear model breaks at tiny
/// amplitudes relative to the residual.
template <class G>
inline Eigen::MatrixXd soft_mode_basis(const QuotientEngine<G>& engine,
                                       const Eigen::ArrayXd& v, double band) {
  Eigen::SparseMatrix<double> J = engine.A;
  const Eigen::ArrayXd fp =
      (engine.p - 1.0) * v.abs().pow(engine.p - 2.0);
  for (int q = 0; q < v.size(); ++q)
    J.coeffRef(q, q) -= engine.grid->w[q] * fp[q];
  SpectralOptions opts;
  opts.dense_threshold = 1;  // Lanczos path regardless of size
  opts.residual_tol = 1e-8;
  const int m = std::min<int>(8, static_cast<int>(v.size()));
  EigenPairs pairs;
  try {
    pairs = smallest_eigenpairs(J, engine.grid->w, m, opts);
  } catch (const spectral_error&) {
    return Eigen::MatrixXd(v.size(), 0);
  }
  std::vector<int> keep;
  for (int i = 0; i < pairs.values.size(); ++i)
    if (std::abs(pairs.values[i]) < band) keep.push_back(i);
  Eigen::MatrixXd basis(v.size(), keep.size());
  for (size_t i = 0; i < keep.size(); ++i)
    basis.col(static_cast<int>(i)) = pairs.fields.col(keep[i]);
  return basis;
}

/// Damped Gauss-Newton on the residual components along the soft modes,
/// with finite-difference derivatives of the full nonlinear residual.
/// Returns the corrected iterate (monotone in the full residual norm).
template <class G>
inline void reduced_soft_solve(const QuotientEngine<G>& engine,
                               const Eigen::MatrixXd& basis,
                               Eigen::ArrayXd& v, double& res) {
  const int m = static_cast<int>(basis.cols());
  if (m == 0) return;
  const double fd = 1e-7 * (1.0 + std::sqrt((engine.grid->w * v.square()).sum()));
  for (int sweep = 0; sweep < 12; ++sweep) {
    const Eigen::VectorXd g0 = integrated_el(engine, v);
    const Eigen::VectorXd r = basis.transpose() * g0;
    if (r.norm() <= 0.02 * res || r.norm() < 1e-16) break;
    Eigen::MatrixXd Jr(m, m);
    for (int j = 0; j < m; ++j) {
      const Eigen::ArrayXd vp = v + fd * basis.col(j).array();
      Jr.col(j) = (basis.transpose() * integrated_el(engine, vp) - r) / fd;
    }
    bool accepted = false;
    double damp = 0.0;
    for (int attempt = 0; attempt < 9; ++attempt) {
      Eigen::MatrixXd Jd = Jr + damp * Eigen::MatrixXd::Identity(m, m);
      Eigen::VectorXd c = Jd.fullPivLu().solve(-r);
      if (c.allFinite()) {
        const double cap = 0.5;
        if (c.norm() > cap) c *= cap / c.norm();
        const Eigen::ArrayXd vt = v + (basis * c).array();
        const double rt = engine.el_residual_norm(vt);
        if (rt < res) {
          v = vt;
          res = rt;
          accepted = true;
          break;
        }
      }
      damp = damp == 0.0 ? std::max(1e-8, 0.1 * Jr.norm() / m) : 10.0 * damp;
    }
    if (!accepted) break;
  }
}

inline Field<BiradialGrid> default_seed(const ProblemSpec& spec,
                                        std::shared_ptr<const BiradialGrid> g) {
  const double e = 0.5 * (spec.N - 2.0);
  if (spec.m > 0) {
    // the m^2 rho^2/rho1^2 term forces the amplitude to vanish on rho1 = 0
    return sample(g, [e](double r1, double r2) {
      const double q = r1 * r1 + r2 * r2;
      return std::pow(1.0 + q, -e) * r1 / (1.0 + r1);
    });
  }
  // radial bump plus a small non-radial perturbation the flow must remove
  return sample(g, [e](double r1, double r2) {
    const double q = r1 * r1 + r2 * r2;
    return std::pow(1.0 + q, -e) *
           (1.0 + 0.05 * (r1 * r1 - r2 * r2) / (1.0 + q));
  });
}

}  // namespace detail

/// Quotient gradient used by the flow (for derivative checks): the field g
/// with dQ(u)[v] = <g, v> in the weighted inner product. `m` adds the
/// equivariant energy term on biradial grids.
template <class G>
inline Field<G> quotient_gradient(const Field<G>& u, double a, int m = 0) {
  ProblemSpec spec;
  if constexpr (std::is_same_v<G, RadialGrid>) {
    spec.N = u.grid->N;
    spec.cls = SymmetryClass::radial;
    if (m != 0) throw parameter_error("winding requires a biradial grid");
  } else {
    spec.N = u.grid->split.N;
    spec.k = u.grid->split.k;
    spec.cls = m > 0 ? SymmetryClass::biradial_equivariant
                     : SymmetryClass::biradial;
  }
  spec.a = a;
  spec.m = m;
  spec.validate();
  auto e = detail::QuotientEngine<G>::make(spec, u.grid);
  const double f = e.mass(u.v);
  if (!(f > 0.0)) throw parameter_error("gradient of the zero field");
  const double energy_u = e.energy(u.v);
  const Eigen::ArrayXd g_int =
      2.0 * ((e.A * u.v.matrix()).array() - (energy_u / f) * u.grid->w * e.phi(u.v)) /
      std::pow(f, 2.0 / e.p);
  return Field<G>(u.grid, g_int / u.grid->w);
}

/// Evaluate a field as a Solution record (no iteration): quotient and
/// Euler-Lagrange residual at the multiplier-one scale. The zero field is
/// admitted (it solves the equation exactly) with Q = 0.
template <class G>
inline SolutionT<G> evaluate_state(const ProblemSpec& spec,
                                   const Field<G>& field) {
  spec.validate();
  if constexpr (std::is_same_v<G, RadialGrid>) {
    if (field.grid->N != spec.N)
      throw parameter_error("evaluate_state: field dimension differs from spec");
  } else {
    if (field.grid->split.N != spec.N || field.grid->split.k != spec.k)
      throw parameter_error("evaluate_state: field split differs from spec");
  }
  auto engine = detail::QuotientEngine<G>::make(spec, field.grid);
  SolutionT<G> sol;
  sol.spec = spec;
  sol.u = field;
  if (field.v.abs().maxCoeff() == 0.0) {
    sol.Q = 0.0;
    sol.residual = 0.0;
    return sol;
  }
  sol.u.v = engine.normalized(field.v);
  sol.Q = engine.quotient(sol.u.v);
  if (sol.Q > 0.0) {
    const double c = engine.solution_scale(sol.Q);
    sol.residual = engine.el_residual_norm(c * sol.u.v);
  } else {
    sol.residual = engine.el_residual_norm(sol.u.v);
  }
  sol.mass_concentration = engine.concentration(sol.u.v);
  return sol;
}

namespace detail {

/// Normalized-gradient-flow minimization of the quotient with
/// Barzilai-Borwein step proposals and monotone backtracking.
template <class G>
SolutionT<G> minimize_impl(const ProblemSpec& spec,
                           std::shared_ptr<const G> grid,
                           const Field<G>* init) {
  spec.validate();
  auto engine = QuotientEngine<G>::make(spec, grid);

  if (init && init->grid->size() != grid->size())
    throw parameter_error("initial field does not match the grid");
  Eigen::ArrayXd u = init ? init->v : default_seed(spec, grid).v;
  u = engine.normalized(u);
  // minimizers are taken nonnegative for m = 0; flipping signs never
  // increases the quotient because the stiffness off-diagonals are <= 0
  if (spec.m == 0 && (u < 0.0).any() && engine.quotient(u.abs()) <= engine.quotient(u))
    u = u.abs();

  SolutionT<G> sol;
  sol.spec = spec;

  double Q = engine.quotient(u);
  Eigen::ArrayXd g_int = engine.integrated_gradient(u, Q);
  double res = engine.gradient_norm(g_int);

  Eigen::ArrayXd u_prev, g_prev;
  double tau = 1.0;
  int iter = 0;
  auto target = [&] { return spec.tol.flow_tol * std::max(1.0, std::abs(Q)); };
  for (; iter < spec.tol.max_flow_iterations && res > target(); ++iter) {
    const Eigen::ArrayXd direction =
        engine.precond->solve(g_int.matrix()).array();

    if (iter > 0) {
      const Eigen::ArrayXd s = u - u_prev;
      const Eigen::ArrayXd y = g_int - g_prev;
      const double sp = s.matrix().dot(engine.P * s.matrix());
      const double sy = (s * y).sum();
      if (sy > 0.0 && std::isfinite(sp / sy)) tau = sp / sy;
    }
    tau = std::clamp(tau, 1e-8, 1e8);

    u_prev = u;
    g_prev = g_int;

    double Q_trial = Q;
    Eigen::ArrayXd u_trial;
    bool accepted = false;
    double step = tau;
    for (int bt = 0; bt < 40; ++bt) {
      u_trial = engine.normalized(u - step * direction);
      Q_trial = engine.quotient(u_trial);
      if (Q_trial <= Q) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stationary to floating point resolution

    u = u_trial;
    Q = Q_trial;
    g_int = engine.integrated_gradient(u, Q);
    res = engine.gradient_norm(g_int);
    sol.history.push_back({iter, Q, res, step});
  }

  sol.flow_iterations = iter;
  sol.u = Field<G>(grid, u);
  sol.Q = Q;
  sol.mass_concentration = engine.concentration(u);
  if (Q > 0.0)
    sol.residual = engine.el_residual_norm(engine.solution_scale(Q) * u);
  else
    sol.residual = engine.el_residual_norm(u);

  if (res > target()) {
    std::ostringstream os;
    os << "flow did not reach tolerance " << spec.tol.flow_tol << " in "
       << iter << " iterations (gradient norm " << res << ")";
    throw convergence_error(os.str(), iter, res);
  }
  return sol;
}

}  // namespace detail

inline SolutionT<RadialGrid> minimize_radial(
    const ProblemSpec& spec, const Field<RadialGrid>* init = nullptr) {
  if (spec.cls != SymmetryClass::radial)
    throw parameter_error("minimize_radial: spec class is not radial");
  return detail::minimize_impl<RadialGrid>(
      spec, detail::make_grid_for<RadialGrid>(spec), init);
}

inline SolutionT<BiradialGrid> minimize_biradial(
    const ProblemSpec& spec, const Field<BiradialGrid>* init = nullptr) {
  if (spec.cls == SymmetryClass::radial)
    throw parameter_error("minimize_biradial: spec class is radial");
  return detail::minimize_impl<BiradialGrid>(
      spec, detail::make_grid_for<BiradialGrid>(spec), init);
}

/// Minimize the Sobolev quotient over the class named by the spec.
inline Solution minimize_quotient(const ProblemSpec& spec) {
  if (spec.cls == SymmetryClass::radial) return minimize_radial(spec);
  return minimize_biradial(spec);
}

/// Newton refinement of the rescaled Euler-Lagrange equation. Requires the
/// input to sit inside the configured Newton basin; an already-converged
/// solution is returned unchanged.
template <class G>
inline SolutionT<G> refine_newton(const SolutionT<G>& sol) {
  auto engine = detail::QuotientEngine<G>::make(sol.spec, sol.u.grid);
  const double p = engine.p;
  const auto& w = sol.u.grid->w;

  if (sol.u.v.abs().maxCoeff() == 0.0) return sol;  // exact solution
  Eigen::ArrayXd u = engine.normalized(sol.u.v);
  double Q = engine.quotient(u);
  Eigen::ArrayXd v = engine.solution_scale(Q) * u;
  double res = engine.el_residual_norm(v);

  SolutionT<G> out = sol;
  if (res <= sol.spec.tol.newton_tol) {
    out.residual = res;
    return out;  // zero steps
  }
  if (res > sol.spec.tol.newton_basin) {
    std::ostringstream os;
    os << "Euler-Lagrange residual " << res
       << " exceeds the Newton basin threshold " << sol.spec.tol.newton_basin;
    throw convergence_error(os.str(), 0, res);
  }

  // Damped Newton with lazy deflation. The truncated problem keeps soft
  // near-zero modes (a dilation remnant and a low near-essential band on
  // biradial grids) along which the plain step overshoots; a
  // Levenberg-Marquardt diagonal handles mild cases, and on a stall the
  // soft modes are deflated into a small nonlinear reduced solve while the
  // orthogonal complement keeps the Newton step.
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool pattern_ready = false;
  double tau = 0.0;
  int steps = 0;
  int attempts = 0;
  int rejections = 0;
  Eigen::MatrixXd deflation(v.size(), 0);
  bool deflation_tried = false;
  while (res > sol.spec.tol.newton_tol) {
    if (steps >= sol.spec.tol.max_newton_iterations ||
        attempts > 8 * sol.spec.tol.max_newton_iterations)
      throw convergence_error("Newton did not converge", steps, res);

    if (deflation.cols() > 0) {
      detail::reduced_soft_solve(engine, deflation, v, res);
      if (res <= sol.spec.tol.newton_tol) break;
    }

    Eigen::SparseMatrix<double> J = engine.A;
    const Eigen::ArrayXd fp = (p - 1.0) * v.abs().pow(p - 2.0);
    for (int q = 0; q < v.size(); ++q)
      J.coeffRef(q, q) += w[q] * (tau - fp[q]);
    if (!pattern_ready) {
      lu.analyzePattern(J);
      pattern_ready = true;
    }
    lu.factorize(J);
    ++attempts;
    if (lu.info() != Eigen::Success) {
      tau = tau == 0.0 ? std::max(res, 1e-6) : 4.0 * tau;
      if (tau > 1e12)
        throw convergence_error("Newton Jacobian factorization failed", steps,
                                res);
      continue;
    }
    Eigen::VectorXd delta = lu.solve(-detail::integrated_el(engine, v));
    if (deflation.cols() > 0) {
      // keep the step off the deflated directions (W-metric projection)
      const Eigen::VectorXd weighted = (w * delta.array()).matrix();
      delta -= deflation * (deflation.transpose() * weighted);
    }
    const Eigen::ArrayXd v_trial = v + delta.array();
    const double res_trial = engine.el_residual_norm(v_trial);
    if (res_trial < res) {
      v = v_trial;
      res = res_trial;
      ++steps;
      rejections = 0;
      out.history.push_back({steps, engine.quotient(v), res, tau});
      tau = tau < 1e-12 ? 0.0 : tau / 3.0;
    } else {
      tau = tau == 0.0 ? std::max(res, 1e-6) : 4.0 * tau;
      ++rejections;
      if (tau > 1e12)
        throw convergence_error("Newton stalled against a singular Jacobian",
                                steps, res);
      if (rejections >= 2 && !deflation_tried) {
        deflation_tried = true;
        log_info("refine_newton: deflating soft modes of the linearization");
        deflation = detail::soft_mode_basis(
            engine, v, 3e-3 * std::max(1.0, std::abs(Q)));
        tau = 0.0;
      }
    }
  }

  out.u = Field<G>(sol.u.grid, engine.normalized(v));
  out.Q = engine.quotient(out.u.v);
  out.residual = res;
  out.newton_iterations = steps + 1;
  out.mass_concentration = engine.concentration(out.u.v);
  return out;
}

/// Flow followed by Newton refinement. The flow must run reasonably deep
/// (default 1e-5 on the quotient gradient); the truncated problem keeps a
/// soft dilation-type mode whose nonlinear correction Newton handles poorly
/// from far away.
template <class G>
inline SolutionT<G> solve_problem(const ProblemSpec& spec,
                                  const Field<G>* init = nullptr) {
  SolutionT<G> sol;
  if constexpr (std::is_same_v<G, RadialGrid>)
    sol = minimize_radial(spec, init);
  else
    sol = minimize_biradial(spec, init);
  return refine_newton(sol);
}

/// Linearized operator at a converged solution: -Delta - a/|x|^2 - f'(v)
/// plus the angular shift of the requested toral mode (biradial only).
/// f' is the derivative of the built-in critical power at the
/// multiplier-one scale. Non-converged inputs are rejected as stale.
template <class G>
inline LinearizedOperator<G> assemble_linearized(const SolutionT<G>& sol,
                                                 int m1 = 0, int m2 = 0,
                                                 double stale_threshold = 1e-6) {
  if (sol.residual > stale_threshold) {
    std::ostringstream os;
    os << "stale solution: Euler-Lagrange residual " << sol.residual
       << " exceeds " << stale_threshold;
    throw parameter_error(os.str());
  }
  auto engine = detail::QuotientEngine<G>::make(sol.spec, sol.u.grid);
  const double p = engine.p;
  Eigen::ArrayXd v = sol.u.v;
  if (sol.Q > 0.0) v *= engine.solution_scale(sol.Q);
  Eigen::ArrayXd potential = engine.potential - (p - 1.0) * v.abs().pow(p - 2.0);
  if constexpr (std::is_same_v<G, BiradialGrid>) {
    if (m1 != 0 || m2 != 0)
      potential += angular_shift(sol.u.grid, m1, m2).v;
  } else {
    if (m1 != 0 || m2 != 0)
      throw parameter_error("toral modes require a biradial grid");
  }
  return linearized_with_potential(sol.u.grid, potential);
}

/// Converged quotient extrapolated over two grid refinements.
inline double best_constant(SymmetryClass cls, double a, int m, int N, int k,
                            const GridParams& base = {},
                            const Tolerances& tol = {}) {
  ProblemSpec spec;
  spec.N = N;
  spec.k = k;
  spec.a = a;
  spec.m = m;
  spec.cls = cls;
  spec.grid = base;
  spec.tol = tol;
  spec.validate();

  if (cls == SymmetryClass::radial) {
    auto coarse = solve_problem<RadialGrid>(spec);
    ProblemSpec fine_spec = spec;
    fine_spec.grid.n = 2 * base.n;
    auto fine_grid = detail::make_grid_for<RadialGrid>(fine_spec);
    Pchip interp(coarse.u.grid->axis.t.matrix(), coarse.u.v.matrix());
    Field<RadialGrid> seed(fine_grid);
    for (int i = 0; i < fine_grid->size(); ++i)
      seed.v[i] = interp.eval_clamped(fine_grid->axis.t[i]);
    auto fine = solve_problem<RadialGrid>(fine_spec, &seed);
    return (4.0 * fine.Q - coarse.Q) / 3.0;
  }

  auto coarse = solve_problem<BiradialGrid>(spec);
  ProblemSpec fine_spec = spec;
  fine_spec.grid.n = 2 * base.n;
  auto fine_grid = detail::make_grid_for<BiradialGrid>(fine_spec);
  const Pchip2D interp = detail::field_interpolant(coarse.u);
  Field<BiradialGrid> seed(fine_grid);
  for (int q = 0; q < fine_grid->size(); ++q)
    seed.v[q] = interp.eval_clamped(std::log(fine_grid->rho1(q)),
                                    std::log(fine_grid->rho2(q)));
  auto fine = solve_problem<BiradialGrid>(fine_spec, &seed);
  return (4.0 * fine.Q - coarse.Q) / 3.0;
}

/// Closed-form symmetry-breaking certificate: breaking holds when
/// 1 + 4(m^2 - a)/(N-2)^2 > k^{2/N}.
struct BreakCheck {
  double lhs;
  double rhs;
  bool breaks;
};

inline BreakCheck symmetry_breaking_criterion(int N, double a, int m, int k) {
  if (k < 1) throw parameter_error("criterion: k must be >= 1");
  if (N < 3) throw parameter_error("criterion: N must be >= 3");
  require_hardy_coefficient(a, N);
  BreakCheck out;
  out.lhs = 1.0 + 4.0 * (static_cast<double>(m) * m - a) / ((N - 2.0) * (N - 2.0));
  out.rhs = std::pow(static_cast<double>(k), 2.0 / N);
  out.breaks = out.lhs > out.rhs;
  return out;
}

}  // namespace hsl
