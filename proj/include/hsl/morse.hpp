#pragma once

#include <string>
#include <vector>

#include "hsl/eig.hpp"
#include "hsl/solve.hpp"

namespace hsl {

enum class MorseClass { radial, biradial, full_via_modes };

inline const char* to_string(MorseClass c) {
  switch (c) {
    case MorseClass::radial: return "radial";
    case MorseClass::biradial: return "biradial";
    case MorseClass::full_via_modes: return "full-via-modes";
  }
  return "?";
}

struct ModeReport {
  int m1 = 0;
  int m2 = 0;
  int multiplicity = 1;  ///< sin/cos pairs: 2 per nonzero winding per factor
  int negatives = 0;     ///< eigenvalues below -zero_band
  std::vector<double> eigenvalues;  ///< reported spectrum below +zero_band
};

/// Negative-eigenvalue bookkeeping per angular mode. Eigenvalues inside
/// (-zero_band, zero_band) count as numerically zero (translation/dilation
/// remnants) and are excluded from the index.
struct MorseReport {
  std::string symmetry_class;
  int cutoff = 0;
  double zero_band = 0.0;
  bool saturated = true;  ///< outermost mode ring contributed no negatives
  int total = 0;
  std::vector<ModeReport> modes;
};

/// The `count` smallest eigenpairs of a linearized operator in the weighted
/// inner product. Residual <= 1e-8 relative per pair; fields orthonormal.
template <class G>
inline EigenPairs negative_eigenpairs(const LinearizedOperator<G>& L,
                                      int count,
                                      const SpectralOptions& opts = {}) {
  SpectralOptions o = opts;
  o.residual_tol = std::min(o.residual_tol, 1e-8);
  return smallest_eigenpairs(L.form, L.grid->w, count, o);
}

namespace detail {

inline int strict_negatives(const Eigen::SparseMatrix<double>& form,
                            const Eigen::ArrayXd& w, double zero_band,
                            const SpectralOptions& opts) {
  return count_below(form, w, -zero_band, opts);
}

/// Eigenvalues below +zero_band for a mode known (by inertia) to hold
/// `below` of them.
inline std::vector<double> reported_eigenvalues(
    const Eigen::SparseMatrix<double>& form, const Eigen::ArrayXd& w,
    int below, double zero_band, const SpectralOptions& opts) {
  if (below <= 0) return {};
  const EigenPairs pairs = smallest_eigenpairs(form, w, below, opts);
  std::vector<double> out;
  for (int i = 0; i < pairs.values.size(); ++i)
    if (pairs.values[i] < zero_band) out.push_back(pairs.values[i]);
  return out;
}

}  // namespace detail

/// Morse index of a converged solution within a symmetry class. For
/// full_via_modes the linearization is decomposed over toral modes
/// (m1, m2), 0 <= m1, m2 <= cutoff, with multiplicity 2 per nonzero winding
/// per factor; the report flags non-saturation when the outermost ring still
/// contributes.
template <class G>
inline MorseReport morse_index(const SolutionT<G>& sol, MorseClass cls,
                               int cutoff = 4,
                               const SpectralOptions& opts = {}) {
  MorseReport report;
  report.symmetry_class = to_string(cls);
  report.zero_band = 1e-6 * std::max(1.0, std::abs(sol.Q));

  if constexpr (std::is_same_v<G, RadialGrid>) {
    if (cls != MorseClass::radial)
      throw parameter_error("radial solutions only carry the radial class");
  } else {
    if (cls == MorseClass::radial)
      throw parameter_error("the radial class needs a radial-grid solution");
  }
  if (cls != MorseClass::full_via_modes) cutoff = 0;
  if (cls == MorseClass::full_via_modes && cutoff < 2)
    throw parameter_error("full-via-modes needs cutoff >= 2");
  report.cutoff = cutoff;

  const auto& w = sol.u.grid->w;
  for (int m2 = 0; m2 <= cutoff; ++m2)
    for (int m1 = 0; m1 <= cutoff; ++m1) {
      const auto L = assemble_linearized(sol, m1, m2);
      ModeReport mode;
      mode.m1 = m1;
      mode.m2 = m2;
      mode.multiplicity = (m1 > 0 ? 2 : 1) * (m2 > 0 ? 2 : 1);
      mode.negatives =
          detail::strict_negatives(L.form, w, report.zero_band, opts);
      const int below_band = count_below(L.form, w, report.zero_band, opts);
      mode.eigenvalues = detail::reported_eigenvalues(
          L.form, w, below_band, report.zero_band, opts);
      report.total += mode.multiplicity * mode.negatives;
      report.modes.push_back(std::move(mode));
    }

  if (cls == MorseClass::full_via_modes) {
    int outer_ring = 0;
    for (const auto& mode : report.modes)
      if (std::max(mode.m1, mode.m2) == cutoff) outer_ring += mode.negatives;
    report.saturated = outer_ring == 0;
    if (!report.saturated)
      log_warn("morse_index: outermost mode ring still contributes; "
               "increase the cutoff");
  }
  return report;
}

}  // namespace hsl
