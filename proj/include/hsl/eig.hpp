#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "hsl/common.hpp"

namespace hsl {

// Weighted symmetric eigenproblems S v = lambda W v with W = diag(w) > 0,
// solved through the similarity C = W^{-1/2} S W^{-1/2}. Three paths:
// Sturm bisection when C is tridiagonal (1D reductions), a dense solve below
// `dense_threshold` unknowns, and shift-invert Lanczos around 0 with a sparse
// LDLT factorization above it. Negative counts use factorization inertia,
// which is exact up to roundoff.

struct SpectralOptions {
  int dense_threshold = 4000;
  double residual_tol = 1e-10;  ///< relative residual target per pair
  int max_iterations = 300;     ///< Lanczos subspace bound
};

struct EigenPairs {
  Eigen::VectorXd values;  ///< ascending
  Eigen::MatrixXd fields;  ///< columns, orthonormal in the weighted product
};

namespace detail {

inline Eigen::SparseMatrix<double> scaled_operator(
    const Eigen::SparseMatrix<double>& S, const Eigen::ArrayXd& w) {
  const Eigen::ArrayXd inv_sqrt = w.sqrt().inverse();
  Eigen::SparseMatrix<double> C = S;
  for (int o = 0; o < C.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(C, o); it; ++it)
      it.valueRef() *= inv_sqrt[it.row()] * inv_sqrt[it.col()];
  return C;
}

inline bool is_tridiagonal(const Eigen::SparseMatrix<double>& C) {
  for (int o = 0; o < C.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(C, o); it; ++it)
      if (std::abs(it.row() - it.col()) > 1 && it.value() != 0.0) return false;
  return true;
}

struct SymTridiag {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;  // size n-1
};

inline SymTridiag extract_tridiag(const Eigen::SparseMatrix<double>& C) {
  const int n = static_cast<int>(C.rows());
  SymTridiag T;
  T.diag = Eigen::VectorXd::Zero(n);
  T.off = Eigen::VectorXd::Zero(n - 1);
  for (int o = 0; o < C.outerSize(); ++o)
    for (Eigen::SparseMatrix<double>::InnerIterator it(C, o); it; ++it) {
      if (it.row() == it.col())
        T.diag[it.row()] = it.value();
      else if (it.row() == it.col() + 1)
        T.off[it.col()] = it.value();
    }
  return T;
}

/// Number of eigenvalues of T strictly below x (Sturm sequence).
inline int sturm_count_below(const SymTridiag& T, double x) {
  const int n = static_cast<int>(T.diag.size());
  const double pivmin = 1e-300;
  int count = 0;
  double d = T.diag[0] - x;
  if (d == 0.0) d = -pivmin;
  if (d < 0.0) ++count;
  for (int i = 1; i < n; ++i) {
    d = T.diag[i] - x - T.off[i - 1] * T.off[i - 1] / d;
    if (d == 0.0) d = -pivmin;
    if (d < 0.0) ++count;
  }
  return count;
}

/// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
inline double tridiag_eigenvalue(const SymTridiag& T, int k) {
  const int n = static_cast<int>(T.diag.size());
  double lo = T.diag[0], hi = T.diag[0];
  for (int i = 0; i < n; ++i) {
    const double b_prev = i > 0 ? std::abs(T.off[i - 1]) : 0.0;
    const double b_next = i + 1 < n ? std::abs(T.off[i]) : 0.0;
    lo = std::min(lo, T.diag[i] - b_prev - b_next);
    hi = std::max(hi, T.diag[i] + b_prev + b_next);
  }
  const double span = hi - lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count_below(T, mid) > k)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-16 * (std::abs(mid) + span * 1e-12) + 5e-324) break;
  }
  return 0.5 * (lo + hi);
}

/// Tridiagonal solve with partial pivoting; a/b/c are diag/sub/super.
inline Eigen::VectorXd tridiag_solve(Eigen::VectorXd a, Eigen::VectorXd b,
                                     Eigen::VectorXd c, Eigen::VectorXd rhs) {
  const int n = static_cast<int>(a.size());
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);  // second superdiagonal fill
  for (int i = 0; i + 1 < n; ++i) {
    if (std::abs(b[i]) > std::abs(a[i])) {
      std::swap(a[i], b[i]);
      std::swap(c[i], a[i + 1]);
      if (i + 2 < n) std::swap(d[i], c[i + 1]);
      std::swap(rhs[i], rhs[i + 1]);
    }
    if (a[i] == 0.0) a[i] = 1e-300;
    const double m = b[i] / a[i];
    a[i + 1] -= m * c[i];
    if (i + 2 < n) c[i + 1] -= m * d[i];
    rhs[i + 1] -= m * rhs[i];
  }
  if (a[n - 1] == 0.0) a[n - 1] = 1e-300;
  Eigen::VectorXd x(n);
  x[n - 1] = rhs[n - 1] / a[n - 1];
  if (n > 1) x[n - 2] = (rhs[n - 2] - c[n - 2] * x[n - 1]) / a[n - 2];
  for (int i = n - 3; i >= 0; --i)
    x[i] = (rhs[i] - c[i] * x[i + 1] - d[i] * x[i + 2]) / a[i];
  return x;
}

inline Eigen::VectorXd tridiag_eigenvector(const SymTridiag& T, double lambda,
                                           const Eigen::MatrixXd& previous) {
  const int n = static_cast<int>(T.diag.size());
  const double scale = T.diag.cwiseAbs().maxCoeff() +
                       (n > 1 ? T.off.cwiseAbs().maxCoeff() : 0.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.3 * std::sin(0.7 * i + 0.5);
  x.normalize();
  const double shifted = lambda + 1e-13 * scale;
  for (int it = 0; it < 4; ++it) {
    Eigen::VectorXd sub(n), sup(n);
    sub.setZero();
    sup.setZero();
    sub.head(n - 1) = T.off;
    sup.head(n - 1) = T.off;
    Eigen::VectorXd diag = T.diag.array() - shifted;
    x = tridiag_solve(diag, sub, sup, x);
    // project out already-computed vectors of nearby eigenvalues
    for (int c = 0; c < previous.cols(); ++c)
      x -= previous.col(c).dot(x) * previous.col(c);
    const double nrm = x.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      for (int i = 0; i < n; ++i) x[i] = std::cos(1.3 * i);
      x.normalize();
      continue;
    }
    x /= nrm;
  }
  return x;
}

/// Apply the tridiagonal matrix (for residual checks).
inline Eigen::VectorXd tridiag_apply(const SymTridiag& T,
                                     const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd y = T.diag.cwiseProduct(x);
  for (int i = 0; i + 1 < n; ++i) {
    y[i] += T.off[i] * x[i + 1];
    y[i + 1] += T.off[i] * x[i];
  }
  return y;
}

inline Eigen::SparseMatrix<double> shifted_matrix(
    const Eigen::SparseMatrix<double>& C, double sigma) {
  if (sigma == 0.0) return C;
  Eigen::SparseMatrix<double> I(C.rows(), C.cols());
  I.setIdentity();
  return Eigen::SparseMatrix<double>(C - sigma * I);
}

/// Inertia of C - x I through a sparse LDLT factorization. Retries with a
/// nudged shift when the unpivoted factorization hits a bad pivot.
inline int ldlt_count_below(const Eigen::SparseMatrix<double>& C, double x) {
  double scale = 0.0;
  for (int i = 0; i < C.rows(); ++i) scale = std::max(scale, std::abs(C.coeff(i, i)));
  scale += std::abs(x) + 1.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const double nudge = attempt == 0 ? 0.0 : scale * 1e-14 * std::pow(8.0, attempt);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(shifted_matrix(C, x - nudge));
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd D = ldlt.vectorD();
    if (!D.allFinite() || (D.array() == 0.0).any()) continue;
    return static_cast<int>((D.array() < 0.0).count());
  }
  throw spectral_error("inertia computation failed: LDLT pivot breakdown");
}

struct RitzPair {
  double value;
  Eigen::VectorXd vector;
};

enum class ShiftMode {
  below_spectrum,  ///< enumerate eigenvalues ascending from the bottom
  at_zero          ///< enumerate eigenvalues by distance from zero
};

/// Shift-invert Lanczos with full reorthogonalization. For below_spectrum
/// the shift walks down geometrically until C - sigma I is positive
/// definite, which keeps the unpivoted factorization safe and makes the
/// ordering strictly ascending; isolated bottom eigenvalues converge fast,
/// while eigenvalues the spectral map compresses (far from the shift,
/// relative gaps ~ gap/|sigma|) may not reach usable residuals. The at_zero
/// mode complements it for the near-zero part of the spectrum. Each
/// returned pair is verified against an explicit residual; fewer than
/// `need` may converge within the iteration budget.
inline std::vector<RitzPair> lanczos_shift_invert(
    const Eigen::SparseMatrix<double>& C, ShiftMode mode, int need,
    const SpectralOptions& opts) {
  const int n = static_cast<int>(C.rows());

  double norm_scale = 0.0;
  for (int i = 0; i < n; ++i)
    norm_scale = std::max(norm_scale, std::abs(C.coeff(i, i)));

  double sigma = mode == ShiftMode::below_spectrum ? -1.0 : 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  for (int attempt = 0;; ++attempt) {
    ldlt.compute(shifted_matrix(C, sigma));
    const bool ok = ldlt.info() == Eigen::Success &&
                    ldlt.vectorD().allFinite() &&
                    !(ldlt.vectorD().array() == 0.0).any();
    if (mode == ShiftMode::below_spectrum) {
      if (ok && (ldlt.vectorD().array() > 0.0).all()) break;
      if (attempt == 40)
        throw spectral_error("shift-invert factorization failed");
      sigma *= 4.0;
    } else {
      if (ok) break;
      if (attempt == 6)
        throw spectral_error("shift-invert factorization failed");
      sigma -= norm_scale * 1e-12 * std::pow(10.0, attempt);
    }
  }

  const int maxit = std::min(n, opts.max_iterations);
  Eigen::MatrixXd V(n, maxit + 1);
  Eigen::VectorXd alpha(maxit), beta(maxit);

  // explicit residuals cannot beat roundoff at the operator scale
  const double residual_floor = 1e-13 * norm_scale;

  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * std::sin(0.41 * i + 0.13);
  v.normalize();
  V.col(0) = v;

  std::vector<RitzPair> converged;
  int k = 0;
  for (; k < maxit; ++k) {
    Eigen::VectorXd w = ldlt.solve(V.col(k));
    alpha[k] = V.col(k).dot(w);
    w -= alpha[k] * V.col(k);
    if (k > 0) w -= beta[k - 1] * V.col(k - 1);
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      w -= V.leftCols(k + 1) * (V.leftCols(k + 1).transpose() * w);
    beta[k] = w.norm();
    if (beta[k] < 1e-14) {
      // invariant subspace; restart direction
      for (int i = 0; i < n; ++i) w[i] = std::cos(0.9 * i + 0.7 * k);
      for (int pass = 0; pass < 2; ++pass)
        w -= V.leftCols(k + 1) * (V.leftCols(k + 1).transpose() * w);
      beta[k] = w.norm();
      if (beta[k] < 1e-14) break;
    }
    V.col(k + 1) = w / beta[k];

    const int m = k + 1;
    if (m < std::min(need, maxit / 2)) continue;
    if (m % 5 != 0 && m != maxit) continue;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
    });

    converged.clear();
    const int want = std::min(need, m);
    for (int idx = 0; idx < m && static_cast<int>(converged.size()) < want;
         ++idx) {
      const int i = order[idx];
      const double theta = es.eigenvalues()[i];
      if (mode == ShiftMode::below_spectrum && theta <= 0.0) break;
      if (theta == 0.0) continue;
      const double bound = beta[k] * std::abs(es.eigenvectors()(m - 1, i));
      if (bound > 1e-6 * std::abs(theta)) break;  // later pairs not ready
      Eigen::VectorXd y = V.leftCols(m) * es.eigenvectors().col(i);
      y.normalize();
      const double lambda = sigma + 1.0 / theta;
      const double res = (C * y - lambda * y).norm();
      const double accept = std::max(
          opts.residual_tol * std::max(1.0, std::abs(lambda)), residual_floor);
      if (res <= accept)
        converged.push_back({lambda, std::move(y)});
      else
        break;
    }
    if (static_cast<int>(converged.size()) >= want) return converged;
  }
  return converged;
}

}  // namespace detail

/// Number of eigenvalues of the weighted problem strictly below `threshold`.
inline int count_below(const Eigen::SparseMatrix<double>& S,
                       const Eigen::ArrayXd& w, double threshold,
                       const SpectralOptions& opts = {}) {
  const Eigen::SparseMatrix<double> C = detail::scaled_operator(S, w);
  if (detail::is_tridiagonal(C))
    return detail::sturm_count_below(detail::extract_tridiag(C), threshold);
  if (C.rows() <= opts.dense_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(C),
                                                      Eigen::EigenvaluesOnly);
    return static_cast<int>((es.eigenvalues().array() < threshold).count());
  }
  return detail::ldlt_count_below(C, threshold);
}

/// The `count` smallest eigenpairs of S v = lambda W v. Eigenfields are
/// orthonormal in the weighted inner product; each pair satisfies the
/// residual tolerance or a spectral_error carries what converged.
inline EigenPairs smallest_eigenpairs(const Eigen::SparseMatrix<double>& S,
                                      const Eigen::ArrayXd& w, int count,
                                      const SpectralOptions& opts = {}) {
  const int n = static_cast<int>(S.rows());
  count = std::min(count, n);
  if (count <= 0) throw parameter_error("smallest_eigenpairs: count must be > 0");
  const Eigen::SparseMatrix<double> C = detail::scaled_operator(S, w);
  const Eigen::ArrayXd inv_sqrt = w.sqrt().inverse();

  EigenPairs out;
  out.values.resize(count);
  out.fields.resize(n, count);

  if (detail::is_tridiagonal(C)) {
    const detail::SymTridiag T = detail::extract_tridiag(C);
    Eigen::MatrixXd vecs(n, count);
    for (int k = 0; k < count; ++k) {
      out.values[k] = detail::tridiag_eigenvalue(T, k);
      // hand the previous vectors in only when eigenvalues cluster
      Eigen::MatrixXd prev(n, 0);
      if (k > 0 && std::abs(out.values[k] - out.values[k - 1]) <
                       1e-8 * (1.0 + std::abs(out.values[k])))
        prev = vecs.leftCols(k);
      vecs.col(k) = detail::tridiag_eigenvector(T, out.values[k], prev);
      const double res =
          (detail::tridiag_apply(T, vecs.col(k)) - out.values[k] * vecs.col(k))
              .norm();
      if (res > 1e-7 * std::max(1.0, std::abs(out.values[k])))
        throw spectral_error("tridiagonal inverse iteration failed",
                             {out.values.data(), out.values.data() + k});
    }
    for (int k = 0; k < count; ++k)
      out.fields.col(k) = vecs.col(k).array() * inv_sqrt;
    return out;
  }

  if (n <= opts.dense_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Eigen::MatrixXd(C)));
    if (es.info() != Eigen::Success)
      throw spectral_error("dense eigensolver failed");
    for (int k = 0; k < count; ++k) {
      out.values[k] = es.eigenvalues()[k];
      out.fields.col(k) = es.eigenvectors().col(k).array() * inv_sqrt;
    }
    return out;
  }

  // Sparse path, two complementary shifts: the below-spectrum phase
  // certifies and converges the separated negatives; the zero-shift phase
  // resolves the near-zero part of the spectrum, which the first transform
  // compresses beyond usable vector accuracy. Inertia arbitrates the
  // negative count.
  const int nu = detail::ldlt_count_below(C, 0.0);
  if (nu > 64)
    throw spectral_error(
        "operator has too many negative eigenvalues for the sparse path");

  std::vector<detail::RitzPair> pool;
  if (nu > 0) {
    auto low = detail::lanczos_shift_invert(
        C, detail::ShiftMode::below_spectrum, nu, opts);
    for (auto& p : low) pool.push_back(std::move(p));
  }
  int negatives_found = static_cast<int>(std::count_if(
      pool.begin(), pool.end(), [](const auto& p) { return p.value < 0.0; }));
  if (count > negatives_found || negatives_found < nu) {
    const int need_zero =
        std::min(n, std::max(count - negatives_found, nu - negatives_found) + 2);
    auto near = detail::lanczos_shift_invert(C, detail::ShiftMode::at_zero,
                                             need_zero, opts);
    for (auto& q : near) {
      bool duplicate = false;
      for (const auto& p : pool)
        if (std::abs(p.value - q.value) <= 1e-6 * (1.0 + std::abs(p.value)) &&
            std::abs(p.vector.dot(q.vector)) > 0.5) {
          duplicate = true;
          break;
        }
      if (!duplicate) pool.push_back(std::move(q));
    }
  }

  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.value < b.value; });
  negatives_found = static_cast<int>(std::count_if(
      pool.begin(), pool.end(), [](const auto& p) { return p.value < 0.0; }));
  std::vector<double> partial;
  for (const auto& p : pool) partial.push_back(p.value);
  if (negatives_found < nu)
    throw spectral_error(
        "Lanczos did not converge every certified negative eigenvalue",
        partial);
  if (static_cast<int>(pool.size()) < count)
    throw spectral_error("Lanczos converged too few eigenpairs", partial);
  for (int k = 0; k < count; ++k) {
    out.values[k] = pool[k].value;
    out.fields.col(k) = pool[k].vector.array() * inv_sqrt;
  }
  return out;
}

}  // namespace hsl
