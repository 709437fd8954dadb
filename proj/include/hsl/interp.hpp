#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>

#include "hsl/common.hpp"

namespace hsl {

namespace detail {

/// Shape-preserving slopes (Fritsch-Carlson weighted harmonic mean).
inline Eigen::VectorXd pchip_slopes(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd d(n);
  if (n < 2) throw parameter_error("pchip: need at least two knots");
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / (x[1] - x[0]);
    return d;
  }
  Eigen::VectorXd h(n - 1), delta(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    if (!(h[i] > 0)) throw parameter_error("pchip: knots must be increasing");
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  for (int i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  // One-sided three-point ends, clamped to preserve shape.
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0))
      s = 3.0 * d0;
    return s;
  };
  d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

inline double hermite_eval(double xl, double xr, double yl, double yr,
                           double dl, double dr, double q) {
  const double h = xr - xl;
  const double t = (q - xl) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return yl * (2 * t3 - 3 * t2 + 1) + h * dl * (t3 - 2 * t2 + t) +
         yr * (-2 * t3 + 3 * t2) + h * dr * (t3 - t2);
}

inline int locate_cell(const Eigen::VectorXd& x, double q) {
  // index i with x[i] <= q <= x[i+1]
  const int n = static_cast<int>(x.size());
  int i = static_cast<int>(std::upper_bound(x.data(), x.data() + n, q) -
                           x.data()) - 1;
  return std::clamp(i, 0, n - 2);
}

}  // namespace detail

/// Monotone (shape-preserving) cubic interpolant on sorted knots.
class Pchip {
 public:
  Pchip() = default;
  Pchip(Eigen::VectorXd x, Eigen::VectorXd y)
      : x_(std::move(x)), y_(std::move(y)), d_(detail::pchip_slopes(x_, y_)) {}

  /// Evaluate; throws range_error outside the knot span.
  double operator()(double q) const {
    const double lo = x_[0], hi = x_[x_.size() - 1];
    const double slack = 1e-12 * (std::abs(lo) + std::abs(hi) + 1.0);
    if (q < lo - slack || q > hi + slack) {
      std::ostringstream os;
      os << "interpolation query " << q << " outside knot range [" << lo
         << ", " << hi << "]";
      throw range_error(os.str());
    }
    return eval_clamped(q);
  }

  /// Evaluate with queries clamped to the end knots.
  double eval_clamped(double q) const {
    q = std::clamp(q, x_[0], x_[x_.size() - 1]);
    const int i = detail::locate_cell(x_, q);
    return detail::hermite_eval(x_[i], x_[i + 1], y_[i], y_[i + 1], d_[i],
                                d_[i + 1], q);
  }

  const Eigen::VectorXd& knots() const { return x_; }

 private:
  Eigen::VectorXd x_, y_, d_;
};

/// Tensor-product shape-preserving interpolation on a rectangular grid.
/// Values stored column-major as V(i,j) with axis-1 index i fastest.
/// Evaluation interpolates along axis 1 on up to four neighbouring rows,
/// then through those row values along axis 2.
class Pchip2D {
 public:
  Pchip2D() = default;
  Pchip2D(Eigen::VectorXd x1, Eigen::VectorXd x2, Eigen::MatrixXd values)
      : x1_(std::move(x1)), x2_(std::move(x2)), v_(std::move(values)) {
    if (v_.rows() != x1_.size() || v_.cols() != x2_.size())
      throw parameter_error("Pchip2D: value shape does not match axes");
    d1_.resize(v_.rows(), v_.cols());
    for (int j = 0; j < v_.cols(); ++j)
      d1_.col(j) = detail::pchip_slopes(x1_, v_.col(j));
  }

  double eval_clamped(double q1, double q2) const {
    q1 = std::clamp(q1, x1_[0], x1_[x1_.size() - 1]);
    q2 = std::clamp(q2, x2_[0], x2_[x2_.size() - 1]);
    const int j = detail::locate_cell(x2_, q2);
    const int j0 = std::max(0, j - 1);
    const int j1 = std::min<int>(static_cast<int>(x2_.size()) - 1, j + 2);
    const int m = j1 - j0 + 1;

    const int i = detail::locate_cell(x1_, q1);
    std::array<double, 4> rows{}, knots{};
    for (int r = 0; r < m; ++r) {
      const int jr = j0 + r;
      rows[r] = detail::hermite_eval(x1_[i], x1_[i + 1], v_(i, jr),
                                     v_(i + 1, jr), d1_(i, jr), d1_(i + 1, jr),
                                     q1);
      knots[r] = x2_[jr];
    }
    Eigen::VectorXd xs = Eigen::Map<Eigen::VectorXd>(knots.data(), m);
    Eigen::VectorXd ys = Eigen::Map<Eigen::VectorXd>(rows.data(), m);
    const Eigen::VectorXd slopes = detail::pchip_slopes(xs, ys);
    const int c = detail::locate_cell(xs, q2);
    return detail::hermite_eval(xs[c], xs[c + 1], ys[c], ys[c + 1], slopes[c],
                                slopes[c + 1], q2);
  }

 private:
  Eigen::VectorXd x1_, x2_;
  Eigen::MatrixXd v_;
  Eigen::MatrixXd d1_;  // slopes along axis 1, per column
};

}  // namespace hsl
