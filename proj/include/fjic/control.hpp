#pragma once

#include <optional>
#include <string>

#include "fjic/model.hpp"

namespace fjic {

/// Closed-loop motor inertia, joint stiffness and joint damping.
struct ShapedParams {
  Mat J_e;
  Mat K_e;
  Mat D_e;
  /// Set when D_e is only positive semidefinite (e.g. an undamped plant).
  bool damping_semidefinite = false;

  Eigen::Index n() const { return J_e.rows(); }
};

/// Force feedback K_F, joint-torque feedback K_G and auxiliary-input gain K_H.
struct ImpedanceGains {
  Mat K_F;
  Mat K_G;
  Mat K_H;

  Eigen::Index n() const { return K_F.rows(); }
};

struct OuterLoop {
  Mat K_phi;
  Mat D_phi;
  Vec phi_d;
  bool gravity_comp = false;

  static OuterLoop none(Eigen::Index n) { return {Mat::Zero(n, n), Mat::Zero(n, n), Vec::Zero(n), false}; }

  void validate(Eigen::Index n) const {
    require_shape(K_phi, n, n, "K_phi");
    require_shape(D_phi, n, n, "D_phi");
    require_size(phi_d, n, "phi_d");
    require_spsd(K_phi, "K_phi");
    require_spsd(D_phi, "D_phi");
  }
};

struct GainSynthesis {
  ImpedanceGains gains;
  ShapedParams shaped;
};

namespace detail {

inline Mat symmetrized(const Mat& a) { return 0.5 * (a + a.transpose()); }

/// Checks the admissibility conditions on a shaped triple and symmetrizes it.
inline ShapedParams admit(Mat J_e, Mat K_e, Mat D_e) {
  const auto n = J_e.rows();
  require_shape(K_e, n, n, "K_e");
  require_shape(D_e, n, n, "D_e");
  if (!is_symmetric(J_e, 1e-9)) raise(ErrorKind::ShapingInfeasible, "J_e is not symmetric");
  if (!is_symmetric(K_e, 1e-9)) raise(ErrorKind::ShapingInfeasible, "K_e is not symmetric");
  if (!is_symmetric(D_e, 1e-9)) raise(ErrorKind::ShapingInfeasible, "D_e = D K^-1 K_e is not symmetric");
  J_e = symmetrized(J_e);
  K_e = symmetrized(K_e);
  D_e = symmetrized(D_e);
  if (!J_e.allFinite() || classify_symmetric(J_e) != Definiteness::PositiveDefinite) {
    raise(ErrorKind::ShapingInfeasible, "J_e is not positive definite");
  }
  if (!K_e.allFinite() || classify_symmetric(K_e) != Definiteness::PositiveDefinite) {
    raise(ErrorKind::ShapingInfeasible, "K_e is not positive definite");
  }
  const auto dd = classify_symmetric(D_e);
  if (!D_e.allFinite() || dd == Definiteness::Indefinite) {
    raise(ErrorKind::ShapingInfeasible, "D_e is not positive semidefinite");
  }
  return {std::move(J_e), std::move(K_e), std::move(D_e), dd != Definiteness::PositiveDefinite};
}

/// Gain formulas without admissibility checks; M is the link inertia at the
/// operating configuration.
inline ImpedanceGains gain_formulas(const Mat& M, const Mat& J, const Mat& K, const Mat& J_e, const Mat& K_e) {
  const auto n = M.rows();
  const Mat K_inv = checked_inverse(K, "K", ErrorKind::DegenerateModel);
  const Mat M_inv = checked_inverse(M, "M", ErrorKind::DegenerateModel);
  const Mat J_e_inv = checked_inverse(J_e, "J_e", ErrorKind::ShapingInfeasible);
  ImpedanceGains g;
  g.K_F = -J * K_inv * (K_e - K) * M_inv;
  g.K_H = J * K_inv * K_e * J_e_inv;
  g.K_G = g.K_H - g.K_F - Mat::Identity(n, n);
  return g;
}

}  // namespace detail

/// Gains that realize the shaped inertia J_e and stiffness K_e on the plant
/// (M, J, K, D); the shaped damping follows as D_e = D K^-1 K_e.
inline GainSynthesis synthesize_gains(const Mat& M, const Mat& J, const Mat& K, const Mat& D, const Mat& J_e,
                                      const Mat& K_e) {
  const auto n = M.rows();
  require_shape(J_e, n, n, "J_e");
  require_shape(K_e, n, n, "K_e");
  require_spd(J_e, "J_e", ErrorKind::ShapingInfeasible);
  require_spd(K_e, "K_e", ErrorKind::ShapingInfeasible);
  const Mat D_e = D * checked_inverse(K, "K", ErrorKind::DegenerateModel) * K_e;
  GainSynthesis out;
  out.shaped = detail::admit(J_e, K_e, D_e);
  out.gains = detail::gain_formulas(M, J, K, out.shaped.J_e, out.shaped.K_e);
  return out;
}

inline GainSynthesis synthesize_gains(const LinearRobotParams& m, const Mat& J_e, const Mat& K_e) {
  m.validate();
  return synthesize_gains(m.M, m.J, m.K, m.D, J_e, K_e);
}

/// Synthesis against M(q) at a chosen configuration.
inline GainSynthesis synthesize_gains(const NonlinearRobotModel& m, const Vec& q, const Mat& J_e, const Mat& K_e) {
  return synthesize_gains(m.mass_of(q), m.J(), m.K(), m.D(), J_e, K_e);
}

/// Inverse map: the shaped triple produced by a given (K_F, K_G) pair.
inline ShapedParams recover_shaped(const Mat& M, const Mat& J, const Mat& K, const Mat& D, const Mat& K_F,
                                   const Mat& K_G) {
  const auto n = M.rows();
  require_shape(K_F, n, n, "K_F");
  require_shape(K_G, n, n, "K_G");
  const Mat S = K_F + K_G + Mat::Identity(n, n);
  const auto lu = checked_lu(S, "K_F + K_G + I", ErrorKind::ParametrizationSingular);
  const Mat R = J - K_F * M;
  const Mat J_inv = checked_inverse(J, "J", ErrorKind::DegenerateModel);
  return detail::admit(lu.solve(R), K * J_inv * R, D * J_inv * R);
}

inline ShapedParams recover_shaped(const LinearRobotParams& m, const Mat& K_F, const Mat& K_G) {
  m.validate();
  return recover_shaped(m.M, m.J, m.K, m.D, K_F, K_G);
}

/// Full gain set for a (K_F, K_G) pair, K_H = K_F + K_G + I.
inline GainSynthesis gains_from_feedback(const LinearRobotParams& m, const Mat& K_F, const Mat& K_G) {
  GainSynthesis out;
  out.shaped = recover_shaped(m, K_F, K_G);
  out.gains = {K_F, K_G, K_F + K_G + Mat::Identity(m.n(), m.n())};
  return out;
}

struct OpenInterval {
  double lower;
  double upper;
  bool contains(double v) const { return v > lower && v < upper; }
};

/// Force-feedback gains K_F (with K_G = 0) giving a passive single-joint loop.
inline OpenInterval colgate_interval(const LinearRobotParams& m) {
  if (m.n() != 1) raise(ErrorKind::NotApplicable, "the force-feedback interval is defined for one joint only");
  return {-1.0, m.J(0, 0) / m.M(0, 0)};
}

/// Largest deviation of a gain set from the synthesis formulas for `shaped`.
/// M is the link inertia at the configuration the gains are meant for.
inline double gain_inconsistency(const ImpedanceGains& g, const ShapedParams& shaped, const Mat& M, const Mat& J,
                                 const Mat& K) {
  const auto expected = detail::gain_formulas(M, J, K, shaped.J_e, shaped.K_e);
  const auto n = M.rows();
  // Gains are dimensionless; the identity sets their natural scale.
  const auto diff = [](const Mat& a, const Mat& b) {
    return matrix_norm(a - b) / std::max({1.0, matrix_norm(a), matrix_norm(b)});
  };
  double worst = diff(g.K_F, expected.K_F);
  worst = std::max(worst, diff(g.K_G, expected.K_G));
  worst = std::max(worst, diff(g.K_H, expected.K_H));
  worst = std::max(worst, matrix_norm(g.K_H - g.K_G - g.K_F - Mat::Identity(n, n)) /
                              std::max(1.0, matrix_norm(g.K_H)));
  return worst;
}

/// Gains of the configuration-dependent law at q: K_F and K_G contain M(q)^-1,
/// K_H is constant.
inline ImpedanceGains gains_at(const NonlinearRobotModel& m, const ShapedParams& shaped, const Vec& q) {
  return detail::gain_formulas(m.mass_of(q), m.J(), m.K(), shaped.J_e, shaped.K_e);
}

/// Measured joint torque tau_a = K (theta - q) + D (thetadot - qdot).
inline Vec joint_torque(const OpenLoopState& x, const NonlinearRobotModel& m) {
  const Vec qdot = m.solve_mass(x.q, x.p);
  const Vec thetadot = checked_solve(m.J(), x.s, "J", ErrorKind::DegenerateModel);
  return m.K() * (x.theta - x.q) + m.D() * (thetadot - qdot);
}

inline void check_gains(const ImpedanceGains& g, Eigen::Index n) {
  require_shape(g.K_F, n, n, "K_F");
  require_shape(g.K_G, n, n, "K_G");
  require_shape(g.K_H, n, n, "K_H");
}

/// tau = K_F tau_e - K_G tau_a - K_F grad V(q) + K_H tau_u
inline Vec linear_control(const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u, const ImpedanceGains& g,
                          const NonlinearRobotModel& m) {
  x.check(m.n());
  check_gains(g, m.n());
  require_size(tau_e, m.n(), "tau_e");
  require_size(tau_u, m.n(), "tau_u");
  return g.K_F * (tau_e - m.gravity_grad_of(x.q)) - g.K_G * joint_torque(x, m) + g.K_H * tau_u;
}

inline Vec linear_control(const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u, const ImpedanceGains& g,
                          const LinearRobotParams& m) {
  return linear_control(x, tau_e, tau_u, g, NonlinearRobotModel::from_linear(m));
}

/// Linear law plus Coriolis compensation: adds -K_F C(q, qdot) qdot.
inline Vec nonlinear_control(const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u, const ImpedanceGains& g,
                             const NonlinearRobotModel& m) {
  x.check(m.n());
  check_gains(g, m.n());
  require_size(tau_e, m.n(), "tau_e");
  require_size(tau_u, m.n(), "tau_u");
  const Vec qdot = m.solve_mass(x.q, x.p);
  const Vec coriolis = m.coriolis_of(x.q, qdot) * qdot;
  return g.K_F * (tau_e - coriolis - m.gravity_grad_of(x.q)) - g.K_G * joint_torque(x, m) + g.K_H * tau_u;
}

/// tau_u = -K_phi (phi - phi_d) - D_phi phidot + gbar(phi)
inline Vec outer_loop_torque(const Vec& phi, const Vec& phi_dot, const OuterLoop& o, const NonlinearRobotModel& m) {
  const auto n = m.n();
  require_size(phi, n, "phi");
  require_size(phi_dot, n, "phi_dot");
  o.validate(n);
  Vec tau_u = -o.K_phi * (phi - o.phi_d) - o.D_phi * phi_dot;
  if (o.gravity_comp) tau_u += m.gravity_grad_of(phi);
  return tau_u;
}

}  // namespace fjic
