#pragma once

#include <json.hpp>
#include <string>

#include "hsl/morse.hpp"
#include "hsl/solve.hpp"
#include "hsl/sphere.hpp"
#include "hsl/symmetry.hpp"

namespace hsl {

using json = nlohmann::json;

inline json to_json(const GridParams& g) {
  return {{"n", g.n}, {"r_min", g.r_min}, {"r_max", g.r_max}};
}

inline json to_json(const Tolerances& t) {
  return {{"flow_tol", t.flow_tol},
          {"newton_tol", t.newton_tol},
          {"newton_basin", t.newton_basin},
          {"max_flow_iterations", t.max_flow_iterations},
          {"max_newton_iterations", t.max_newton_iterations}};
}

inline json to_json(const ProblemSpec& s) {
  return {{"N", s.N},          {"k", s.k},
          {"a", s.a},          {"m", s.m},
          {"class", to_string(s.cls)},
          {"grid", to_json(s.grid)},
          {"tolerances", to_json(s.tol)}};
}

template <class G>
inline json to_json(const SolutionT<G>& sol) {
  json grid;
  if constexpr (std::is_same_v<G, RadialGrid>)
    grid = {{"kind", "radial"}, {"n", sol.u.grid->size()}};
  else
    grid = {{"kind", "biradial"}, {"n", sol.u.grid->n()}};
  grid["r_min"] = std::exp(sol.u.grid->axis.t_lo);
  grid["r_max"] = std::exp(sol.u.grid->axis.t_hi);
  return {{"type", "solution"},
          {"spec", to_json(sol.spec)},
          {"Q", sol.Q},
          {"residual", sol.residual},
          {"iterations", sol.flow_iterations + sol.newton_iterations},
          {"grid", grid},
          {"diagnostics",
           {{"flow_iterations", sol.flow_iterations},
            {"newton_iterations", sol.newton_iterations},
            {"mass_concentration", sol.mass_concentration}}}};
}

inline json to_json(const Solution& sol) {
  return std::visit([](const auto& s) { return to_json(s); }, sol);
}

inline json to_json(const MorseReport& r) {
  json modes = json::array();
  for (const auto& m : r.modes)
    modes.push_back({{"m1", m.m1},
                     {"m2", m.m2},
                     {"multiplicity", m.multiplicity},
                     {"negatives", m.negatives},
                     {"eigenvalues", m.eigenvalues}});
  return {{"type", "morse"},
          {"class", r.symmetry_class},
          {"cutoff", r.cutoff},
          {"zero_band", r.zero_band},
          {"modes", modes},
          {"total", r.total},
          {"saturated", r.saturated}};
}

inline json to_json(const SymmetryVerdict& v) {
  return {{"type", "verdict"},
          {"defect", v.defect},
          {"w_rel", v.w_rel},
          {"index", v.biradial_index},
          {"verdict", to_string(v.verdict)},
          {"violation_candidate", v.violation_candidate},
          {"thresholds",
           {{"defect", v.thresholds.defect}, {"w_rel", v.thresholds.w_rel}}}};
}

inline json to_json(const NodalSolution& s, const SphereProblem& prob) {
  return {{"type", "sphere-solution"},
          {"N", prob.split.N},
          {"split", {prob.split.k, prob.split.N + 1 - prob.split.k}},
          {"nodes", s.zeros},
          {"s", s.s},
          {"mass", s.mass},
          {"index", s.index},
          {"boundary_residuals",
           {s.boundary_residual_origin, s.boundary_residual_pole}}};
}

inline json to_json(const BreakCheck& b) {
  return {{"type", "break-check"},
          {"lhs", b.lhs},
          {"rhs", b.rhs},
          {"breaks", b.breaks}};
}

inline json to_json(const Exponents& e) {
  return {{"type", "exponents"},
          {"gamma", e.gamma},
          {"delta", e.delta},
          {"mu", e.mu}};
}

}  // namespace hsl
