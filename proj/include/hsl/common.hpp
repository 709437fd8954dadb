#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsl {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes:
//   parameter_error, range_error -> 1, convergence_error -> 2,
//   spectral_error -> 3.
// ---------------------------------------------------------------------------

/// Invalid parameters, degenerate inputs, or stale solution objects.
class parameter_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query outside the range covered by a grid or interpolant.
class range_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iteration failed to reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, int iterations = 0,
                    double residual = 0.0)
      : std::runtime_error(what), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

/// Eigensolver failure; carries whatever converged before it gave up.
class spectral_error : public std::runtime_error {
 public:
  explicit spectral_error(const std::string& what,
                          std::vector<double> partial = {})
      : std::runtime_error(what), partial_eigenvalues(std::move(partial)) {}
  std::vector<double> partial_eigenvalues;
};

// ---------------------------------------------------------------------------
// Logging. Level comes from the HSL_LOG environment variable:
// silent | error | warn | info | debug (default warn).
// ---------------------------------------------------------------------------

enum class LogLevel { silent = 0, error = 1, warn = 2, info = 3, debug = 4 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("HSL_LOG");
    if (!env) return LogLevel::warn;
    const std::string value(env);
    if (value == "silent") return LogLevel::silent;
    if (value == "error") return LogLevel::error;
    if (value == "warn") return LogLevel::warn;
    if (value == "info") return LogLevel::info;
    if (value == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_message(LogLevel level, const char* tag,
                        const std::string& message) {
  if (static_cast<int>(level) <= static_cast<int>(log_level()))
    std::fprintf(stderr, "[hsl:%s] %s\n", tag, message.c_str());
}

inline void log_error(const std::string& m) { log_message(LogLevel::error, "error", m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::warn, "warn", m); }
inline void log_info(const std::string& m) { log_message(LogLevel::info, "info", m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::debug, "debug", m); }

// ---------------------------------------------------------------------------
// Shared constants and small helpers.
// ---------------------------------------------------------------------------

inline constexpr double pi = 3.14159265358979323846;

/// Surface measure of the unit sphere S^dim embedded in R^{dim+1}.
inline double sphere_surface(int dim) {
  if (dim < 0) throw parameter_error("sphere_surface: dimension must be >= 0");
  return 2.0 * std::pow(pi, 0.5 * (dim + 1)) / std::tgamma(0.5 * (dim + 1));
}

/// Critical Sobolev exponent 2N/(N-2).
inline double critical_exponent(int N) {
  if (N < 3) throw parameter_error("critical_exponent: N must be >= 3");
  return 2.0 * N / (N - 2.0);
}

/// Coercivity bound for the Hardy coefficient: a < (N-2)^2/4.
inline double hardy_threshold(int N) {
  return 0.25 * (N - 2.0) * (N - 2.0);
}

inline void require_hardy_coefficient(double a, int N) {
  if (!(a < hardy_threshold(N))) {
    std::ostringstream os;
    os << "Hardy coefficient a = " << a << " violates the coercivity bound a < (N-2)^2/4 = "
       << hardy_threshold(N) << " for N = " << N;
    throw parameter_error(os.str());
  }
}

}  // namespace hsl
