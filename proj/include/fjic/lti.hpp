#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fjic/control.hpp"
#include "fjic/polynomial.hpp"

namespace fjic {

struct StateSpace {
  Mat A, B, C, D;
  std::vector<std::string> state_labels, input_labels, output_labels;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  void validate() const {
    const auto n = states();
    require_shape(A, n, n, "A");
    require_shape(B, n, B.cols(), "B");
    require_shape(C, C.rows(), n, "C");
    require_shape(D, C.rows(), B.cols(), "D");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
      raise(ErrorKind::Assembly, "state-space matrices contain non-finite entries");
    }
  }

  CVec eigenvalues() const {
    Eigen::EigenSolver<Mat> es(A, false);
    return es.eigenvalues();
  }
};

/// SISO rational function num(s) / den(s). Factors cancelled while building it
/// are kept in `cancelled` for reporting.
struct RationalTF {
  Polynomial num;
  Polynomial den;
  std::vector<Complex> cancelled;

  Complex operator()(Complex s) const { return num(s) / den(s); }
};

struct EnvironmentImpedance {
  Mat M_h, D_h, K_h;

  static EnvironmentImpedance none(Eigen::Index n) { return {Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)}; }

  void validate(Eigen::Index n) const {
    require_shape(M_h, n, n, "M_h");
    require_shape(D_h, n, n, "D_h");
    require_shape(K_h, n, n, "K_h");
    require_spsd(M_h, "M_h");
    require_spsd(D_h, "D_h");
    require_spsd(K_h, "K_h");
  }

  bool is_zero() const {
    return M_h.cwiseAbs().maxCoeff() == 0.0 && D_h.cwiseAbs().maxCoeff() == 0.0 && K_h.cwiseAbs().maxCoeff() == 0.0;
  }
};

/// Desired dynamics M_d qddot + K_d qdot + D_d q = tau_e. The coefficient
/// placement follows the target equation as written: K_d multiplies the
/// velocity and D_d the position, even though the names suggest the reverse.
struct TargetImpedance {
  Mat M_d, K_d, D_d;
};

inline std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) raise(ErrorKind::Validation, "invalid logarithmic grid");
  std::vector<double> w(static_cast<std::size_t>(points));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < points; ++i) w[i] = std::pow(10.0, a + (b - a) * i / (points - 1));
  w.back() = hi;
  return w;
}

namespace detail {

/// Shaped closed loop with the environment merged into the link side. The
/// link momentum is taken with respect to the merged inertia M + M_h.
inline StateSpace coupled_state_space(const LinearRobotParams& m, const ShapedParams& sp, const EnvironmentImpedance& env,
                                      const std::optional<OuterLoop>& outer) {
  m.validate();
  const auto n = m.n();
  env.validate(n);
  if (outer) outer->validate(n);
  require_shape(sp.J_e, n, n, "J_e");
  require_shape(sp.K_e, n, n, "K_e");
  require_shape(sp.D_e, n, n, "D_e");
  const Mat Mi = checked_inverse(m.M + env.M_h, "M + M_h", ErrorKind::Assembly);
  const Mat Ji = checked_inverse(sp.J_e, "J_e", ErrorKind::Assembly);
  const Mat I = Mat::Identity(n, n);
  const Mat& Ke = sp.K_e;
  const Mat& De = sp.D_e;

  StateSpace ss;
  ss.A = Mat::Zero(4 * n, 4 * n);
  // rows: q, phi, p, z
  ss.A.block(0, 2 * n, n, n) = Mi;
  ss.A.block(n, 3 * n, n, n) = Ji;
  ss.A.block(2 * n, 0, n, n) = -Ke - env.K_h;
  ss.A.block(2 * n, n, n, n) = Ke;
  ss.A.block(2 * n, 2 * n, n, n) = -De * Mi - env.D_h * Mi;
  ss.A.block(2 * n, 3 * n, n, n) = De * Ji;
  ss.A.block(3 * n, 0, n, n) = Ke;
  ss.A.block(3 * n, n, n, n) = -Ke;
  ss.A.block(3 * n, 2 * n, n, n) = De * Mi;
  ss.A.block(3 * n, 3 * n, n, n) = -De * Ji;
  if (outer) {
    ss.A.block(3 * n, n, n, n) -= outer->K_phi;
    ss.A.block(3 * n, 3 * n, n, n) -= outer->D_phi * Ji;
  }
  ss.B = Mat::Zero(4 * n, n);
  ss.B.block(2 * n, 0, n, n) = I;
  ss.C = Mat::Zero(n, 4 * n);
  ss.C.block(0, 2 * n, n, n) = Mi;
  ss.D = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = std::to_string(i + 1);
    ss.input_labels.push_back("tau_e_" + idx);
    ss.output_labels.push_back("qdot_" + idx);
  }
  for (const char* block : {"q_", "phi_", "p_", "z_"}) {
    for (Eigen::Index i = 0; i < n; ++i) ss.state_labels.push_back(block + std::to_string(i + 1));
  }
  ss.validate();
  return ss;
}

}  // namespace detail

/// Plant without control (tau = 0): states (q, theta, p, s), input tau_e, output qdot.
inline StateSpace assemble_open_loop(const LinearRobotParams& m) {
  m.validate();
  const auto n = m.n();
  const Mat Mi = checked_inverse(m.M, "M", ErrorKind::Assembly);
  const Mat Ji = checked_inverse(m.J, "J", ErrorKind::Assembly);
  StateSpace ss;
  ss.A = Mat::Zero(4 * n, 4 * n);
  ss.A.block(0, 2 * n, n, n) = Mi;
  ss.A.block(n, 3 * n, n, n) = Ji;
  // pdot = K (theta - q) + D (J^-1 s - M^-1 p) + tau_e, sdot = -(same joint torque)
  ss.A.block(2 * n, 0, n, n) = -m.K;
  ss.A.block(2 * n, n, n, n) = m.K;
  ss.A.block(2 * n, 2 * n, n, n) = -m.D * Mi;
  ss.A.block(2 * n, 3 * n, n, n) = m.D * Ji;
  ss.A.block(3 * n, 0, n, 4 * n) = -ss.A.block(2 * n, 0, n, 4 * n).eval();
  ss.B = Mat::Zero(4 * n, n);
  ss.B.block(2 * n, 0, n, n) = Mat::Identity(n, n);
  ss.C = Mat::Zero(n, 4 * n);
  ss.C.block(0, 2 * n, n, n) = Mi;
  ss.D = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto idx = std::to_string(i + 1);
    ss.input_labels.push_back("tau_e_" + idx);
    ss.output_labels.push_back("qdot_" + idx);
  }
  for (const char* block : {"q_", "theta_", "p_", "s_"}) {
    for (Eigen::Index i = 0; i < n; ++i) ss.state_labels.push_back(block + std::to_string(i + 1));
  }
  ss.validate();
  return ss;
}

/// Shaped closed loop in (q, phi, p, z). A supplied outer loop is folded into A
/// as tau_u = -K_phi phi - D_phi J_e^-1 z (deviation from phi_d).
inline StateSpace assemble_closed_loop(const LinearRobotParams& m, const ShapedParams& sp,
                                       const std::optional<OuterLoop>& outer = std::nullopt) {
  return detail::coupled_state_space(m, sp, EnvironmentImpedance::none(m.n()), outer);
}

/// Closed loop interacting with a mass-damper-spring environment; the input is
/// an additional drive torque on the links.
inline StateSpace assemble_coupled(const LinearRobotParams& m, const ShapedParams& sp, const EnvironmentImpedance& env,
                                   const std::optional<OuterLoop>& outer = std::nullopt) {
  return detail::coupled_state_space(m, sp, env, outer);
}

/// Y(s) = (J_e s^2 + D_e s + K_e) / (s [J_e M s^2 + D_e (J_e + M) s + K_e (J_e + M)])
inline RationalTF admittance_1dof(const ShapedParams& sp, double M) {
  if (sp.n() != 1) raise(ErrorKind::NotApplicable, "closed-form admittance is defined for one joint only");
  const double je = sp.J_e(0, 0), ke = sp.K_e(0, 0), de = sp.D_e(0, 0);
  return {Polynomial{ke, de, je}, Polynomial{0.0, ke * (je + M), de * (je + M), je * M}, {}};
}

/// Y_d(s) = s / (M_d s^2 + K_d s + D_d)
inline RationalTF target_admittance(const TargetImpedance& t) {
  if (t.M_d.rows() != 1) raise(ErrorKind::NotApplicable, "target admittance is defined for one joint only");
  return {Polynomial{0.0, 1.0}, Polynomial{t.D_d(0, 0), t.K_d(0, 0), t.M_d(0, 0)}, {}};
}

/// Z_h(s) = (M_h s^2 + D_h s + K_h) / s
inline RationalTF env_impedance_tf(const EnvironmentImpedance& env) {
  if (env.M_h.rows() != 1) raise(ErrorKind::NotApplicable, "environment impedance is defined for one joint only");
  return {Polynomial{env.K_h(0, 0), env.D_h(0, 0), env.M_h(0, 0)}, Polynomial{0.0, 1.0}, {}};
}

namespace detail {

/// True when r is a root of p up to a coefficient perturbation of relative size
/// tol, measured after rescaling s = rho t.
inline bool near_root(const Polynomial& p, Complex r, double rho, double tol) {
  const Complex t = r / rho;
  Complex acc = 0.0;
  double bound = 0.0, peak = 0.0;
  for (int k = p.degree(); k >= 0; --k) {
    const double ck = p[k] * std::pow(rho, k);
    acc = acc * t + ck;
    bound = bound * std::abs(t) + 1.0;
    peak = std::max(peak, std::abs(ck));
  }
  return std::abs(acc) <= tol * peak * bound;
}

}  // namespace detail

/// Removes approximately common roots of num and den. A numerator root r is
/// cancelled when both polynomials vanish at r to relative accuracy tol after
/// rescaling s by the denominator's root bound.
inline RationalTF cancel_common_factors(RationalTF tf, double tol = 1e-8) {
  if (tf.num.is_zero() || tf.num.trimmed().degree() == 0 || tf.den.trimmed().degree() == 0) return tf;
  auto zeros = polynomial_roots(tf.num);
  bool changed = true;
  while (changed) {
    changed = false;
    const double rho = detail::balance(tf.den.trimmed()).rho;
    for (std::size_t i = 0; i < zeros.size(); ++i) {
      const Complex r = zeros[i];
      if (!detail::near_root(tf.den, r, rho, tol) || !detail::near_root(tf.num, r, rho, tol)) continue;
      Polynomial divisor;
      if (r.imag() != 0.0) {
        divisor = Polynomial{std::norm(r), -2.0 * r.real(), 1.0};
        tf.cancelled.push_back(r);
        tf.cancelled.push_back(std::conj(r));
      } else {
        divisor = Polynomial{-r.real(), 1.0};
        tf.cancelled.push_back(r);
      }
      tf.num = tf.num.deflated(divisor);
      tf.den = tf.den.deflated(divisor);
      changed = tf.num.degree() > 0 && tf.den.degree() > 0;
      if (changed) zeros = polynomial_roots(tf.num);
      break;
    }
  }
  return tf;
}

inline constexpr Eigen::Index kMaxTransferStates = 20;

namespace detail {

/// Diagonal similarity T^-1 A T with power-of-two entries that equalizes row
/// and column norms (Parlett-Reinsch). Returns the diagonal of T.
inline Vec balance_diagonal(Mat& A) {
  const auto n = A.rows();
  Vec t = Vec::Ones(n);
  bool done = false;
  for (int sweep = 0; sweep < 100 && !done; ++sweep) {
    done = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = A.col(i).cwiseAbs().sum() - std::abs(A(i, i));
      const double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0, cc = c, rr = r;
      while (cc < rr / 2.0) {
        cc *= 2.0;
        rr /= 2.0;
        f *= 2.0;
      }
      while (cc >= rr * 2.0) {
        cc /= 2.0;
        rr *= 2.0;
        f /= 2.0;
      }
      if ((cc + rr) < 0.95 * (c + r)) {
        done = false;
        t(i) *= f;
        A.col(i) *= f;
        A.row(i) /= f;
      }
    }
  }
  return t;
}

}  // namespace detail

namespace detail {

/// C (sI - A)^-1 B + D for one input/output pair; nullopt when sI - A is
/// numerically singular.
inline std::optional<Complex> resolvent_at(const StateSpace& ss, Eigen::Index input, Eigen::Index output, Complex s) {
  CMat R = -ss.A.cast<Complex>();
  R.diagonal().array() += s;
  Eigen::PartialPivLU<CMat> lu(R);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (min_pivot <= 1e-14 * std::max({matrix_norm(ss.A), std::abs(s), 1.0})) return std::nullopt;
  const CVec x = lu.solve(ss.B.col(input).cast<Complex>());
  return (ss.C.row(output).cast<Complex>() * x)(0) + ss.D(output, input);
}

/// Faddeev-LeVerrier on the balanced matrix scaled to unit norm, accumulated in
/// extended precision.
inline RationalTF faddeev_leverrier(const StateSpace& ss, Eigen::Index input, Eigen::Index output) {
  const auto n = ss.states();
  Mat A = ss.A;
  const Vec t = balance_diagonal(A);
  const double rho = std::max(matrix_norm(A), 1e-300);
  A /= rho;

  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const LMat Al = A.cast<long double>();
  const LVec b = ss.B.col(input).cwiseQuotient(t).cast<long double>();
  const LVec c = ss.C.row(output).transpose().cwiseProduct(t).cast<long double>();

  // det(sI - A) = s^n + a_1 s^{n-1} + ... + a_n, adj(sI - A) = sum_k N_k s^{n-k}
  Vec den = Vec::Zero(n + 1);
  Vec num = Vec::Zero(n + 1);
  den(n) = 1.0;
  LMat N = LMat::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    num(n - k) = static_cast<double>(c.dot(N * b));
    const LMat AN = Al * N;
    const long double a_k = -AN.trace() / static_cast<long double>(k);
    den(n - k) = static_cast<double>(a_k);
    N = AN;
    N.diagonal().array() += a_k;
  }
  // Undo the frequency scaling: s^k carries rho^(n-k) in den and rho^(n-1-k) in num.
  for (Eigen::Index k = 0; k <= n; ++k) {
    den(k) *= std::pow(rho, static_cast<double>(n - k));
    if (k < n) num(k) *= std::pow(rho, static_cast<double>(n - 1 - k));
  }
  num += ss.D(output, input) * den;
  return {Polynomial(num), Polynomial(den), {}};
}

/// Denominator from the eigenvalues of A and numerator from the finite
/// generalized eigenvalues of the system pencil ([A B; C D], diag(I, 0)), with
/// the gain fitted at one frequency from the resolvent.
inline RationalTF spectral_tf(const StateSpace& ss, Eigen::Index input, Eigen::Index output) {
  const auto n = ss.states();
  Mat A = ss.A;
  const Vec t = balance_diagonal(A);
  const CVec ev = Eigen::EigenSolver<Mat>(A, false).eigenvalues();
  std::vector<Complex> poles(ev.data(), ev.data() + n);
  enforce_conjugate_closure(poles);
  const Polynomial den = Polynomial::from_roots(poles);

  Mat S = Mat::Zero(n + 1, n + 1), T = Mat::Zero(n + 1, n + 1);
  S.topLeftCorner(n, n) = A;
  S.topRightCorner(n, 1) = ss.B.col(input).cwiseQuotient(t);
  S.bottomLeftCorner(1, n) = ss.C.row(output).cwiseProduct(t.transpose());
  S(n, n) = ss.D(output, input);
  T.topLeftCorner(n, n) = Mat::Identity(n, n);
  Eigen::GeneralizedEigenSolver<Mat> ges(S, T, false);
  const double big = 1e10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<Complex> zeros;
  for (Eigen::Index i = 0; i < n + 1; ++i) {
    const Complex a = ges.alphas()(i);
    const double be = ges.betas()(i);
    if (std::abs(be) == 0.0 || std::abs(a / be) > big) continue;
    zeros.push_back(a / be);
  }
  enforce_conjugate_closure(zeros);
  Polynomial num = Polynomial::from_roots(zeros);

  // Gain from the resolvent at the geometric-mean pole modulus.
  double logsum = 0.0;
  int count = 0;
  for (const auto& p : poles) {
    if (std::abs(p) > 0.0) {
      logsum += std::log(std::abs(p));
      ++count;
    }
  }
  const double w0 = count ? std::exp(logsum / count) : 1.0;
  Complex gain(0.0);
  for (double w : {w0, 1.37 * w0, w0 / 1.61}) {
    const auto h = resolvent_at(ss, input, output, Complex(0.0, w));
    const Complex nv = num(Complex(0.0, w));
    if (h && std::abs(nv) > 0.0) {
      gain = *h * den(Complex(0.0, w)) / nv;
      break;
    }
  }
  return {gain.real() * num, den, {}};
}

/// Largest relative mismatch between a transfer function and the resolvent
/// on probe frequencies spanning the pole moduli.
inline double resolvent_mismatch(const RationalTF& tf, const StateSpace& ss, Eigen::Index input, Eigen::Index output) {
  const CVec ev = ss.eigenvalues();
  const double hi = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  double lo = hi;
  for (const auto& e : ev) {
    // Poles at the origin come out of the eigensolver as tiny nonzero values.
    if (std::abs(e) > 1e-8 * hi) lo = std::min(lo, std::abs(e));
  }
  std::vector<Complex> ref, got;
  double href = 0.0;
  for (double w : log_grid(lo / 10.0, hi * 10.0 * (1.0 + 1e-9), 24)) {
    const auto h = resolvent_at(ss, input, output, Complex(0.0, w));
    if (!h) continue;
    ref.push_back(*h);
    got.push_back(tf(Complex(0.0, w)));
    href = std::max(href, std::abs(*h));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - ref[i]) / std::max(std::abs(ref[i]), 1e-14 * href + 1e-300));
  }
  return worst;
}

}  // namespace detail

/// SISO transfer function of a state-space model.
///
/// The Faddeev-LeVerrier recursion gives det(sI - A) and
/// C adj(sI - A) B + D det(sI - A). Its rounding grows with the spread of the
/// pole moduli, so the result is checked against the resolvent on probe
/// frequencies; above 1e-8 relative mismatch the coefficients are rebuilt from
/// the eigenvalues of A and the transmission zeros instead.
inline RationalTF ss_to_tf(const StateSpace& ss, Eigen::Index input, Eigen::Index output) {
  ss.validate();
  const auto n = ss.states();
  if (n > kMaxTransferStates) {
    raise(ErrorKind::NotApplicable, "refusing polynomial conversion of " + std::to_string(n) +
                                        " states (limit " + std::to_string(kMaxTransferStates) +
                                        "); evaluate the state-space model directly with freq_response");
  }
  if (input < 0 || input >= ss.inputs() || output < 0 || output >= ss.outputs()) {
    raise(ErrorKind::Dimension, "input/output index out of range");
  }
  auto tf = detail::faddeev_leverrier(ss, input, output);
  if (detail::resolvent_mismatch(tf, ss, input, output) <= 1e-8) return tf;
  auto alt = detail::spectral_tf(ss, input, output);
  if (detail::resolvent_mismatch(alt, ss, input, output) <= 1e-8) return alt;
  raise(ErrorKind::NotApplicable, "polynomial conversion is too ill-conditioned for this system; evaluate the "
                                  "state-space model directly with freq_response");
}

struct FrequencySample {
  double omega;
  Complex response;
  double mag_db;
  double phase_deg;
  bool infinite;
};

inline FrequencySample make_sample(double omega, Complex h, bool infinite) {
  if (infinite) {
    return {omega, h, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN(), true};
  }
  return {omega, h, 20.0 * std::log10(std::abs(h)), std::arg(h) * 180.0 / std::numbers::pi, false};
}

inline std::vector<FrequencySample> freq_response(const RationalTF& tf, const std::vector<double>& omegas) {
  std::vector<FrequencySample> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    if (!(w > 0.0)) raise(ErrorKind::Validation, "frequencies must be positive");
    const Complex s(0.0, w);
    const Complex den = tf.den(s);
    const double scale = tf.den.magnitude_at(w);
    const bool infinite = std::abs(den) <= 1e-15 * scale;
    out.push_back(make_sample(w, infinite ? Complex(0.0) : tf.num(s) / den, infinite));
  }
  return out;
}

/// Resolvent evaluation C (jw I - A)^-1 B + D through complex linear solves.
inline std::vector<FrequencySample> freq_response(const StateSpace& ss, Eigen::Index input, Eigen::Index output,
                                                  const std::vector<double>& omegas) {
  ss.validate();
  const CVec b = ss.B.col(input).cast<Complex>();
  const Eigen::RowVectorXcd c = ss.C.row(output).cast<Complex>();
  const double a_norm = std::max(matrix_norm(ss.A), 1.0);
  std::vector<FrequencySample> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    if (!(w > 0.0)) raise(ErrorKind::Validation, "frequencies must be positive");
    CMat resolvent = -ss.A.cast<Complex>();
    resolvent.diagonal().array() += Complex(0.0, w);
    Eigen::PartialPivLU<CMat> lu(resolvent);
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (min_pivot <= 1e-14 * std::max(a_norm, w)) {
      out.push_back(make_sample(w, Complex(0.0), true));
      continue;
    }
    const Complex h = (c * lu.solve(b))(0) + ss.D(output, input);
    out.push_back(make_sample(w, h, false));
  }
  return out;
}

struct PoleZero {
  std::vector<Complex> poles;
  std::vector<Complex> zeros;
};

inline PoleZero poles_zeros(const RationalTF& tf) {
  if (tf.den.degree() < 1 && tf.num.degree() < 1) raise(ErrorKind::Validation, "transfer function has degree 0");
  PoleZero pz;
  pz.poles = polynomial_roots(tf.den);
  if (!tf.num.is_zero()) pz.zeros = polynomial_roots(tf.num);
  return pz;
}

enum class PassivityVerdict { Passive, NotPassive, Inconclusive };

inline const char* to_string(PassivityVerdict v) {
  switch (v) {
    case PassivityVerdict::Passive: return "passive";
    case PassivityVerdict::NotPassive: return "not-passive";
    case PassivityVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct PassivityReport {
  PassivityVerdict verdict = PassivityVerdict::Passive;
  std::string reason;
  std::optional<Complex> witness_pole;
  std::optional<double> witness_omega;
  double min_real_part = 0.0;  // min Re tf(jw) over the grid
};

namespace detail {

/// Re[num(jw) conj(den(jw))] as a polynomial in x = w^2; its sign equals the
/// sign of Re tf(jw).
inline Polynomial hermitian_numerator(const RationalTF& tf) {
  const auto split = [](const Polynomial& p, Polynomial& re, Polynomial& im) {
    const int n = p.degree();
    Vec r = Vec::Zero(n + 1), i = Vec::Zero(n + 1);
    for (int k = 0; k <= n; ++k) {
      const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;  // j^k = (+1, +j, -1, -j, ...)
      if (k % 2 == 0) r(k) = sign * p[k];
      else i(k) = sign * p[k];
    }
    re = Polynomial(r);
    im = Polynomial(i);
  };
  Polynomial nr, ni, dr, di;
  split(tf.num, nr, ni);
  split(tf.den, dr, di);
  const Polynomial e = nr * dr + ni * di;  // even in w
  const int deg = e.degree();
  Vec x = Vec::Zero(deg / 2 + 1);
  for (int k = 0; k <= deg; k += 2) x(k / 2) = e[k];
  return Polynomial(x);
}

}  // namespace detail

/// Positive-real test on a frequency grid.
///
/// Passive requires: every pole in Re s <= 0; imaginary-axis poles simple with
/// nonnegative real residue; Re tf(jw) >= -1e-9 on the grid. When the grid
/// minimum of Re tf lands in the doubtful band [-1e-9, 1e-6] the sign of
/// Re tf(jw) is settled on the whole axis from the real roots of the even
/// polynomial Re[num(jw) conj(den(jw))]; if that cannot be decided the verdict
/// is inconclusive.
inline PassivityReport positive_real_check(const RationalTF& tf, const std::vector<double>& grid) {
  PassivityReport rep;
  const auto pz = poles_zeros(tf);
  const Polynomial dden = tf.den.derivative();
  for (const auto& p : pz.poles) {
    const double mag = std::max(1.0, std::abs(p));
    if (p.real() > 1e-9 * mag) {
      rep.verdict = PassivityVerdict::NotPassive;
      rep.reason = "pole in the open right half-plane";
      rep.witness_pole = p;
      return rep;
    }
    if (std::abs(p.real()) <= 1e-9 * mag) {
      const int multiplicity = static_cast<int>(std::count_if(pz.poles.begin(), pz.poles.end(), [&](const Complex& o) {
        return std::abs(o - p) <= 1e-6 * mag;
      }));
      if (multiplicity > 1) {
        rep.verdict = PassivityVerdict::NotPassive;
        rep.reason = "repeated pole on the imaginary axis";
        rep.witness_pole = p;
        return rep;
      }
      const Complex residue = tf.num(p) / dden(p);
      if (residue.real() < -1e-9 * std::max(1.0, std::abs(residue))) {
        rep.verdict = PassivityVerdict::NotPassive;
        rep.reason = "imaginary-axis pole with negative residue";
        rep.witness_pole = p;
        return rep;
      }
    }
  }

  const auto samples = freq_response(tf, grid);
  double min_re = std::numeric_limits<double>::infinity();
  double min_w = grid.empty() ? 0.0 : grid.front();
  for (const auto& s : samples) {
    if (s.infinite) continue;
    if (s.response.real() < min_re) {
      min_re = s.response.real();
      min_w = s.omega;
    }
  }
  rep.min_real_part = min_re;
  if (min_re < -1e-9) {
    rep.verdict = PassivityVerdict::NotPassive;
    rep.reason = "negative real part on the imaginary axis";
    rep.witness_omega = min_w;
    return rep;
  }
  if (min_re > 1e-6) {
    rep.reason = "all conditions hold on the grid";
    return rep;
  }

  // Doubtful band: decide from the sign structure of the even polynomial.
  const Polynomial e = detail::hermitian_numerator(tf);
  if (e.norm() == 0.0 || e.trimmed().degree() == 0) {
    if (e[0] >= 0.0) {
      rep.reason = "real part has constant sign (lossless or constant)";
      return rep;
    }
    rep.verdict = PassivityVerdict::NotPassive;
    rep.reason = "negative real part on the imaginary axis";
    rep.witness_omega = min_w;
    return rep;
  }
  std::vector<Complex> roots;
  try {
    roots = polynomial_roots(e);
  } catch (const Error&) {
    rep.verdict = PassivityVerdict::Inconclusive;
    rep.reason = "grid minimum in the doubtful band and the sign polynomial could not be resolved";
    rep.witness_omega = min_w;
    return rep;
  }
  std::vector<double> crossings{0.0};
  for (const auto& r : roots) {
    if (r.imag() == 0.0 && r.real() > 0.0) crossings.push_back(r.real());
  }
  std::sort(crossings.begin(), crossings.end());
  std::vector<double> probes;
  for (std::size_t i = 0; i + 1 < crossings.size(); ++i) probes.push_back(0.5 * (crossings[i] + crossings[i + 1]));
  probes.push_back(2.0 * crossings.back() + 1.0);
  const double w_lo = grid.empty() ? 0.0 : grid.front();
  const double w_hi = grid.empty() ? 0.0 : grid.back();
  for (double x : probes) {
    const double w = std::sqrt(x);
    const Complex h = tf(Complex(0.0, w));
    if (h.real() < -1e-9) {
      const bool inside = w >= w_lo && w <= w_hi;
      rep.verdict = inside ? PassivityVerdict::NotPassive : PassivityVerdict::Inconclusive;
      rep.reason = inside ? "negative real part between grid points" : "negative real part outside the grid range";
      rep.witness_omega = w;
      return rep;
    }
  }
  rep.reason = "real part nonnegative on the whole imaginary axis";
  return rep;
}

}  // namespace fjic
