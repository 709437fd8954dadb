#pragma once

#include <string>
#include <vector>

#include "hsl/morse.hpp"
#include "hsl/solve.hpp"

namespace hsl {

/// Angular derivative w = u_rho1 rho2 - u_rho2 rho1, the infinitesimal
/// variation of u under the rotations mixing the two blocks. Vanishes
/// identically (to stencil truncation) on radial fields. Uses the same
/// log-variable stencils as the discrete operators.
inline Field<BiradialGrid> angular_derivative(const Field<BiradialGrid>& u) {
  const Field<BiradialGrid> d1 = d_drho1(u);
  const Field<BiradialGrid> d2 = d_drho2(u);
  Field<BiradialGrid> w(u.grid);
  w.v = d1.v * u.grid->rho2_ - d2.v * u.grid->rho1_;
  return w;
}

/// Weighted-L2 residual, over interior nodes, of
/// -Delta w - a w/|x|^2 - f' w + (1/rho1^2 + 1/rho2^2) w
/// for an arbitrary field u and nodal derivative f'. The general entry point
/// also serves as a negative control with a mismatched f'.
inline double w_equation_residual(const Field<BiradialGrid>& u, double a,
                                  const Eigen::ArrayXd& fprime,
                                  double margin_decades = 1.0) {
  const Field<BiradialGrid> w = angular_derivative(u);
  Eigen::ArrayXd potential(u.size());
  for (int p = 0; p < u.size(); ++p)
    potential[p] = -a / u.grid->radius_sq(p) - fprime[p];
  potential += angular_shift(u.grid, 1, 1).v;
  const auto L = linearized_with_potential(u.grid, potential);
  const Field<BiradialGrid> res = L.apply(w);
  return detail::masked_norm(res, detail::interior_mask(*u.grid, margin_decades));
}

/// Residual of the equation satisfied by the angular derivative of a
/// converged solution; decreases at the stencil order under refinement.
inline double verify_w_equation(const SolutionT<BiradialGrid>& sol,
                                double margin_decades = 1.0) {
  auto engine = detail::QuotientEngine<BiradialGrid>::make(sol.spec, sol.u.grid);
  Eigen::ArrayXd v = sol.u.v;
  if (sol.Q > 0.0) v *= engine.solution_scale(sol.Q);
  const Eigen::ArrayXd fprime = (engine.p - 1.0) * v.abs().pow(engine.p - 2.0);
  return w_equation_residual(Field<BiradialGrid>(sol.u.grid, v), sol.spec.a,
                             fprime, margin_decades);
}

/// Partial integrals I(R) of (1/rho1^2 + 1/rho2^2) w^2 over {|x| <= R}.
/// For converged solutions the sequence is Cauchy:
/// I(R_max) - I(R_max/10) <= 0.01 I(R_max).
inline std::vector<double> integrability_check(
    const SolutionT<BiradialGrid>& sol, const std::vector<double>& radii) {
  for (size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1]))
      throw parameter_error("integrability_check: radii must increase");
  auto engine = detail::QuotientEngine<BiradialGrid>::make(sol.spec, sol.u.grid);
  Eigen::ArrayXd v = sol.u.v;
  if (sol.Q > 0.0) v *= engine.solution_scale(sol.Q);
  const Field<BiradialGrid> w =
      angular_derivative(Field<BiradialGrid>(sol.u.grid, v));
  const Field<BiradialGrid> shift = angular_shift(sol.u.grid, 1, 1);
  std::vector<double> out;
  for (const double R : radii) {
    double acc = 0.0;
    for (int p = 0; p < w.size(); ++p)
      if (sol.u.grid->radius_sq(p) <= R * R)
        acc += sol.u.grid->w[p] * shift.v[p] * w.v[p] * w.v[p];
    out.push_back(acc);
  }
  return out;
}

/// Normalized distance of a biradial field from its radial average
/// (weighted L2 over the interior region). The discrete proxy for exact
/// radial symmetry. The truncation-wall layers are excluded: the square
/// (rho1, rho2) domain is not rotation invariant near its walls, so the
/// layer carries an O(1) relative deviation that reflects the truncation
/// geometry, not the solution. The lift back onto the biradial grid clamps
/// at the extreme corner radii, where the arcs degenerate to points.
inline double radial_defect(const Field<BiradialGrid>& u,
                            double margin_decades = 1.0) {
  const Field<RadialGrid> avg = radial_average(u);
  Pchip interp(avg.grid->axis.t.matrix(), avg.v.matrix());
  Field<BiradialGrid> dev(u.grid);
  for (int p = 0; p < u.size(); ++p)
    dev.v[p] =
        u.v[p] - interp.eval_clamped(0.5 * std::log(u.grid->radius_sq(p)));
  const auto mask = detail::interior_mask(*u.grid, margin_decades);
  const double nu = detail::masked_norm(u, mask);
  if (!(nu > 0.0)) throw parameter_error("radial_defect: zero field");
  return detail::masked_norm(dev, mask) / nu;
}

/// Relative size of the angular derivative against the field's gradient,
/// over the same interior region as the defect.
inline double relative_angular_norm(const Field<BiradialGrid>& u,
                                    double margin_decades = 1.0) {
  const Field<BiradialGrid> w = angular_derivative(u);
  Field<BiradialGrid> grad(u.grid);
  grad.v = (d_drho1(u).v.square() + d_drho2(u).v.square()).sqrt();
  const auto mask = detail::interior_mask(*u.grid, margin_decades);
  const double g = detail::masked_norm(grad, mask);
  if (!(g > 0.0))
    throw parameter_error("relative_angular_norm: constant field");
  return detail::masked_norm(w, mask) / g;
}

enum class Verdict { radial_consistent, non_radial, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::radial_consistent: return "radial-consistent";
    case Verdict::non_radial: return "non-radial";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct VerdictThresholds {
  double defect = 1e-3;
  double w_rel = 1e-3;
};

/// Combined radiality verdict. A biradial index <= 1 together with a defect
/// beyond threshold contradicts the expected rigidity and is escalated via
/// `violation_candidate` rather than silently passed.
struct SymmetryVerdict {
  double defect = 0.0;
  double w_rel = 0.0;
  int biradial_index = 0;
  Verdict verdict = Verdict::inconclusive;
  bool violation_candidate = false;
  VerdictThresholds thresholds;
};

/// Pure decision logic, separated for property testing.
inline SymmetryVerdict classify_verdict(double defect, double w_rel,
                                        int biradial_index,
                                        const VerdictThresholds& thr) {
  SymmetryVerdict v;
  v.defect = defect;
  v.w_rel = w_rel;
  v.biradial_index = biradial_index;
  v.thresholds = thr;
  const bool looks_radial = defect < thr.defect && w_rel < thr.w_rel;
  if (looks_radial) {
    v.verdict = Verdict::radial_consistent;
  } else if (defect >= thr.defect) {
    v.verdict = Verdict::non_radial;
    if (biradial_index <= 1) v.violation_candidate = true;
  } else {
    v.verdict = Verdict::inconclusive;
    if (biradial_index <= 1) v.violation_candidate = true;
  }
  return v;
}

inline SymmetryVerdict symmetry_verdict(const SolutionT<BiradialGrid>& sol,
                                        const MorseReport& report,
                                        const VerdictThresholds& thr = {}) {
  if (report.symmetry_class != to_string(MorseClass::biradial))
    throw parameter_error("symmetry_verdict: report must be biradial class");
  const SymmetryVerdict v = classify_verdict(
      radial_defect(sol.u), relative_angular_norm(sol.u), report.total, thr);
  if (v.violation_candidate)
    log_warn("symmetry_verdict: biradial index <= 1 with non-radial "
             "diagnostics; flagged for escalation");
  return v;
}

}  // namespace hsl
