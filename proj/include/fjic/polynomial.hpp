#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "fjic/linalg.hpp"

namespace fjic {

using Complex = std::complex<double>;

/// Real polynomial with ascending coefficients: c[0] + c[1] s + ... + c[n] s^n.
class Polynomial {
 public:
  Polynomial() : c_(Vec::Zero(1)) {}
  explicit Polynomial(Vec ascending) : c_(std::move(ascending)) {
    if (c_.size() == 0) c_ = Vec::Zero(1);
  }
  Polynomial(std::initializer_list<double> ascending) : c_(ascending.size()) {
    Eigen::Index i = 0;
    for (double v : ascending) c_(i++) = v;
    if (c_.size() == 0) c_ = Vec::Zero(1);
  }

  const Vec& coeffs() const { return c_; }
  double operator[](Eigen::Index i) const { return i < c_.size() ? c_(i) : 0.0; }

  /// Degree after dropping exactly-zero leading coefficients (0 for the zero polynomial).
  int degree() const {
    for (Eigen::Index i = c_.size() - 1; i > 0; --i) {
      if (c_(i) != 0.0) return static_cast<int>(i);
    }
    return 0;
  }

  double leading() const { return c_(degree()); }
  double norm() const { return c_.norm(); }
  bool is_zero() const { return (c_.array() == 0.0).all(); }

  Polynomial trimmed() const { return Polynomial(Vec(c_.head(degree() + 1))); }

  template <typename T>
  T operator()(T s) const {
    T acc = T(0);
    for (Eigen::Index i = c_.size() - 1; i >= 0; --i) acc = acc * s + T(c_(i));
    return acc;
  }

  /// Evaluation scale sum |c_i| |s|^i, the natural yardstick for rounding in p(s).
  double magnitude_at(double abs_s) const {
    double acc = 0.0;
    for (Eigen::Index i = c_.size() - 1; i >= 0; --i) acc = acc * abs_s + std::abs(c_(i));
    return acc;
  }

  Polynomial derivative() const {
    const int n = degree();
    if (n == 0) return Polynomial{0.0};
    Vec d(n);
    for (int i = 1; i <= n; ++i) d(i - 1) = c_(i) * i;
    return Polynomial(d);
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    const int na = a.degree(), nb = b.degree();
    Vec r = Vec::Zero(na + nb + 1);
    for (int i = 0; i <= na; ++i)
      for (int j = 0; j <= nb; ++j) r(i + j) += a.c_(i) * b.c_(j);
    return Polynomial(r);
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    const auto n = std::max(a.c_.size(), b.c_.size());
    Vec r = Vec::Zero(n);
    r.head(a.c_.size()) += a.c_;
    r.head(b.c_.size()) += b.c_;
    return Polynomial(r);
  }

  friend Polynomial operator*(double k, const Polynomial& a) { return Polynomial(Vec(k * a.c_)); }

  /// Quotient of division by a monic divisor; the remainder is discarded.
  Polynomial deflated(const Polynomial& monic_divisor) const {
    const int n = degree();
    const int m = monic_divisor.degree();
    if (m > n) return Polynomial{0.0};
    Vec rem = c_.head(n + 1);
    Vec quot = Vec::Zero(n - m + 1);
    for (int k = n - m; k >= 0; --k) {
      quot(k) = rem(k + m);
      for (int j = 0; j <= m; ++j) rem(k + j) -= quot(k) * monic_divisor.c_(j);
    }
    return Polynomial(quot);
  }

  /// Real polynomial with leading coefficient `lead` and the given conjugate-closed roots.
  static Polynomial from_roots(const std::vector<Complex>& roots, double lead = 1.0) {
    std::vector<Complex> acc{Complex(lead)};
    for (const auto& r : roots) {
      std::vector<Complex> next(acc.size() + 1, Complex(0.0));
      for (std::size_t i = 0; i < acc.size(); ++i) {
        next[i + 1] += acc[i];
        next[i] -= r * acc[i];
      }
      acc = std::move(next);
    }
    Vec c(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) c(static_cast<Eigen::Index>(i)) = acc[i].real();
    return Polynomial(c);
  }

 private:
  Vec c_;
};

struct RootOptions {
  int max_iterations = 500;
  double residual_tolerance = 1e-8;  // relative to the coefficient norm
};

namespace detail {

/// Pairs every root having a clearly positive imaginary part with its nearest
/// conjugate partner and snaps the remaining ones to the real axis, so the set
/// is exactly closed under conjugation.
inline void enforce_conjugate_closure(std::vector<Complex>& roots) {
  const auto n = roots.size();
  std::vector<bool> done(n, false);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return roots[a].imag() > roots[b].imag(); });
  for (std::size_t idx : order) {
    if (done[idx]) continue;
    const Complex z = roots[idx];
    const double small = 1e-9 * std::max(1.0, std::abs(z));
    if (z.imag() <= small) {
      roots[idx] = Complex(z.real(), 0.0);
      done[idx] = true;
      continue;
    }
    std::size_t best = n;
    double best_dist = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (done[j] || j == idx || roots[j].imag() >= 0.0) continue;
      const double d = std::abs(roots[j] - std::conj(z));
      if (best == n || d < best_dist) {
        best = j;
        best_dist = d;
      }
    }
    done[idx] = true;
    if (best == n) {
      roots[idx] = Complex(z.real(), 0.0);
      continue;
    }
    const Complex avg = 0.5 * (z + std::conj(roots[best]));
    roots[idx] = avg;
    roots[best] = std::conj(avg);
    done[best] = true;
  }
  std::sort(roots.begin(), roots.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

/// Monic polynomial in t = s / rho after splitting off `zeros` roots at the
/// origin, with rho the Fujiwara bound on the root moduli. All roots of the
/// result lie in the unit disk, so the Horner rounding of q(t) at a root is
/// bounded by a small multiple of eps ||q||.
struct Balanced {
  Polynomial poly;
  double rho = 1.0;
  int zeros = 0;
};

inline Balanced balance(const Polynomial& p) {
  Balanced b;
  const int n = p.degree();
  while (b.zeros < n && p[b.zeros] == 0.0) ++b.zeros;
  const int m = n - b.zeros;
  Vec c = p.coeffs().segment(b.zeros, m + 1) / p.leading();
  double bound = 0.0;
  for (int k = 1; k <= m; ++k) {
    const double ck = k == m ? 0.5 * std::abs(c(0)) : std::abs(c(m - k));
    bound = std::max(bound, std::pow(ck, 1.0 / k));
  }
  b.rho = 2.0 * bound;
  if (!(b.rho > 0.0) || !std::isfinite(b.rho)) b.rho = 1.0;
  for (int k = 0; k <= m; ++k) c(k) /= std::pow(b.rho, m - k);
  b.poly = Polynomial(c);
  return b;
}

/// Starting points for the simultaneous iteration: one circle per edge of the
/// upper convex hull of (k, log|c_k|), with as many points as the edge spans
/// and radius (|c_i| / |c_j|)^(1 / (j - i)).
inline std::vector<Complex> newton_polygon_start(const Polynomial& q) {
  const int m = q.degree();
  std::vector<int> hull;
  const auto lg = [&](int k) { return q[k] == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::abs(q[k])); };
  for (int k = 0; k <= m; ++k) {
    if (q[k] == 0.0) continue;
    while (hull.size() >= 2) {
      const int i = hull[hull.size() - 2], j = hull.back();
      // Drop j when it lies on or below the chord from i to k.
      if ((lg(j) - lg(i)) * (k - i) <= (lg(k) - lg(i)) * (j - i)) hull.pop_back();
      else break;
    }
    hull.push_back(k);
  }
  std::vector<Complex> z;
  int placed = 0;
  for (std::size_t e = 0; e + 1 < hull.size(); ++e) {
    const int i = hull[e], j = hull[e + 1];
    const int count = j - i;
    const double radius = std::pow(std::abs(q[i]) / std::abs(q[j]), 1.0 / count);
    for (int k = 0; k < count; ++k) {
      z.push_back(std::polar(radius, 2.0 * std::numbers::pi * k / count + 0.4 + 0.7 * placed / m));
    }
    placed += count;
  }
  return z;
}

}  // namespace detail

/// Roots of a real polynomial by Aberth-Ehrlich simultaneous iteration followed
/// by Newton polishing, carried out on the balanced polynomial. Exact zero
/// roots are split off first. The residual test |q(t)| <= tol ||q|| applies to
/// the balanced form q.
inline std::vector<Complex> polynomial_roots(const Polynomial& poly, const RootOptions& opts = {}) {
  const Polynomial p = poly.trimmed();
  if (p.is_zero()) raise(ErrorKind::RootFinding, "zero polynomial has no isolated roots");
  std::vector<Complex> roots;
  if (p.degree() == 0) return roots;

  const auto bal = detail::balance(p);
  const Polynomial& q = bal.poly;
  const int m = q.degree();
  roots.assign(static_cast<std::size_t>(bal.zeros), Complex(0.0));

  std::vector<Complex> z(static_cast<std::size_t>(m));
  if (m == 1) {
    z[0] = -q[0];
  } else if (m >= 2) {
    const Polynomial dq = q.derivative();
    z = detail::newton_polygon_start(q);
    bool converged = false;
    for (int iter = 0; iter < opts.max_iterations && !converged; ++iter) {
      converged = true;
      for (int k = 0; k < m; ++k) {
        const Complex pv = q(z[k]);
        if (pv == Complex(0.0)) continue;
        const Complex ratio = pv / dq(z[k]);
        Complex repulsion(0.0);
        for (int j = 0; j < m; ++j) {
          if (j != k) repulsion += 1.0 / (z[k] - z[j]);
        }
        const Complex step = ratio / (1.0 - ratio * repulsion);
        if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
        z[k] -= step;
        if (std::abs(step) > 1e-14 * std::max(std::abs(z[k]), 1e-300)) converged = false;
      }
    }
    for (auto& root : z) {
      for (int polish = 0; polish < 3; ++polish) {
        const Complex d = dq(root);
        if (d == Complex(0.0)) break;
        const Complex next = root - q(root) / d;
        if (std::abs(q(next)) < std::abs(q(root))) root = next;
      }
    }
  }
  detail::enforce_conjugate_closure(z);

  const double bound = opts.residual_tolerance * q.norm();
  double worst = 0.0;
  std::ostringstream res;
  for (const auto& t : z) {
    const double r = std::abs(q(t));
    res << ' ' << r;
    worst = std::max(worst, r);
  }
  if (!(worst <= bound)) raise(ErrorKind::RootFinding, "root residuals exceed " + std::to_string(bound) + ":" + res.str());
  for (const auto& t : z) roots.push_back(bal.rho * t);
  detail::enforce_conjugate_closure(roots);
  return roots;
}

/// Largest |q(r / rho)| / ||q|| over the given nonzero roots, q the balanced form of p.
inline double max_relative_residual(const Polynomial& p, const std::vector<Complex>& roots) {
  const auto bal = detail::balance(p.trimmed());
  double worst = 0.0;
  for (const auto& r : roots) {
    if (r == Complex(0.0) && bal.zeros > 0) continue;
    worst = std::max(worst, std::abs(bal.poly(r / bal.rho)) / bal.poly.norm());
  }
  return worst;
}

}  // namespace fjic
