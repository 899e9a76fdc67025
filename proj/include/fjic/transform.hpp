#pragma once

#include <algorithm>

#include "fjic/control.hpp"

namespace fjic {

/// Shaped coordinates: link position, shaped motor position phi, link momentum
/// and shaped motor momentum z.
struct ClosedLoopState {
  Vec q, phi, p, z;

  static ClosedLoopState zero(Eigen::Index n) {
    return {Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
  }

  Eigen::Index n() const { return q.size(); }

  Vec stacked() const {
    Vec y(4 * n());
    y << q, phi, p, z;
    return y;
  }

  static ClosedLoopState unstack(const Vec& y) {
    if (y.size() % 4 != 0) raise(ErrorKind::Dimension, "closed-loop state length is not a multiple of 4");
    const auto n = y.size() / 4;
    return {y.segment(0, n), y.segment(n, n), y.segment(2 * n, n), y.segment(3 * n, n)};
  }

  void check(Eigen::Index n_joints) const {
    require_size(q, n_joints, "q");
    require_size(phi, n_joints, "phi");
    require_size(p, n_joints, "p");
    require_size(z, n_joints, "z");
  }
};

enum class ControlLaw { Linear, Nonlinear };

namespace detail {

inline Mat stiffness_inverse(const ShapedParams& sp) {
  return checked_inverse(sp.K_e, "K_e", ErrorKind::TransformSingular);
}

}  // namespace detail

/// phi = K_e^-1 (K_e - K) q + K_e^-1 K theta
/// z   = J_e K_e^-1 (K_e - K) M(q)^-1 p + J_e K_e^-1 K J^-1 s
inline ClosedLoopState to_closed(const OpenLoopState& x, const ShapedParams& sp, const NonlinearRobotModel& m) {
  x.check(m.n());
  const Mat Ke_inv = detail::stiffness_inverse(sp);
  const Mat& K = m.K();
  const Mat coupling = sp.K_e - K;
  const Vec qdot = m.solve_mass(x.q, x.p);
  const Vec thetadot = checked_solve(m.J(), x.s, "J", ErrorKind::DegenerateModel);
  ClosedLoopState y;
  y.q = x.q;
  y.phi = Ke_inv * (coupling * x.q + K * x.theta);
  y.p = x.p;
  y.z = sp.J_e * (Ke_inv * (coupling * qdot + K * thetadot));
  return y;
}

inline OpenLoopState from_closed(const ClosedLoopState& y, const ShapedParams& sp, const NonlinearRobotModel& m) {
  y.check(m.n());
  const auto K_lu = checked_lu(m.K(), "K", ErrorKind::TransformSingular);
  const Mat coupling = sp.K_e - m.K();
  const Vec qdot = m.solve_mass(y.q, y.p);
  const Vec phidot = checked_solve(sp.J_e, y.z, "J_e", ErrorKind::TransformSingular);
  OpenLoopState x;
  x.q = y.q;
  x.theta = K_lu.solve(sp.K_e * y.phi - coupling * y.q);
  x.p = y.p;
  x.s = m.J() * K_lu.solve(sp.K_e * phidot - coupling * qdot);
  return x;
}

inline ClosedLoopState to_closed(const OpenLoopState& x, const ShapedParams& sp, const LinearRobotParams& m) {
  return to_closed(x, sp, NonlinearRobotModel::from_linear(m));
}

inline OpenLoopState from_closed(const ClosedLoopState& y, const ShapedParams& sp, const LinearRobotParams& m) {
  return from_closed(y, sp, NonlinearRobotModel::from_linear(m));
}

/// H_CL = 1/2 p^T M(q)^-1 p + 1/2 z^T J_e^-1 z + 1/2 (phi-q)^T K_e (phi-q) + V(q)
inline double closed_loop_energy(const ClosedLoopState& y, const ShapedParams& sp, const NonlinearRobotModel& m) {
  y.check(m.n());
  const Vec qdot = m.solve_mass(y.q, y.p);
  const Vec phidot = checked_solve(sp.J_e, y.z, "J_e", ErrorKind::DegenerateModel);
  const Vec defl = y.phi - y.q;
  return 0.5 * y.p.dot(qdot) + 0.5 * y.z.dot(phidot) + 0.5 * defl.dot(sp.K_e * defl) + m.potential_of(y.q);
}

/// Gradient of H_CL laid out in the same blocks as the state.
inline ClosedLoopState closed_loop_gradient(const ClosedLoopState& y, const ShapedParams& sp,
                                            const NonlinearRobotModel& m) {
  y.check(m.n());
  ClosedLoopState grad;
  const Vec spring = sp.K_e * (y.phi - y.q);
  grad.p = m.solve_mass(y.q, y.p);
  grad.z = checked_solve(sp.J_e, y.z, "J_e", ErrorKind::DegenerateModel);
  grad.phi = spring;
  grad.q = -spring + m.gravity_grad_of(y.q);
  if (!m.has_constant_mass()) grad.q += m.kinetic_gradient(y.q, y.p);
  return grad;
}

namespace detail {

/// Closed-loop field with an optional extra link-side damper (used when a
/// damped environment is merged into the link dynamics).
inline ClosedLoopState closed_loop_field_with_link_damping(const ClosedLoopState& y, const Vec& tau_e,
                                                           const Vec& tau_u, const ShapedParams& sp,
                                                           const NonlinearRobotModel& m, const Mat* link_damping) {
  require_size(tau_e, m.n(), "tau_e");
  require_size(tau_u, m.n(), "tau_u");
  const auto grad = closed_loop_gradient(y, sp, m);
  const Vec relative = sp.D_e * (grad.z - grad.p);
  ClosedLoopState dy;
  dy.q = grad.p;
  dy.phi = grad.z;
  dy.p = -grad.q + relative + tau_e;
  dy.z = -grad.phi - relative + tau_u;
  if (link_damping) dy.p -= *link_damping * grad.p;
  return dy;
}

}  // namespace detail

/// Port-Hamiltonian closed loop: interconnection [[0, I], [-I, -R]] with the
/// shaped damping R = [[D_e, -D_e], [-D_e, D_e]] acting on grad H_CL.
inline ClosedLoopState closed_loop_field(const ClosedLoopState& y, const Vec& tau_e, const Vec& tau_u,
                                         const ShapedParams& sp, const NonlinearRobotModel& m) {
  return detail::closed_loop_field_with_link_damping(y, tau_e, tau_u, sp, m, nullptr);
}

inline ClosedLoopState closed_loop_field(const ClosedLoopState& y, const Vec& tau_e, const Vec& tau_u,
                                         const ShapedParams& sp, const LinearRobotParams& m) {
  return closed_loop_field(y, tau_e, tau_u, sp, NonlinearRobotModel::from_linear(m));
}

/// Time derivative of the shaped coordinates along an open-loop velocity dx.
/// The z map contains M(q)^-1, so its rate carries -M^-1 Mdot M^-1 p.
inline ClosedLoopState push_forward(const OpenLoopState& x, const OpenLoopState& dx, const ShapedParams& sp,
                                    const NonlinearRobotModel& m) {
  const Mat Ke_inv = detail::stiffness_inverse(sp);
  const Mat& K = m.K();
  const Mat coupling = sp.K_e - K;
  Vec qddot_like = m.solve_mass(x.q, dx.p);
  if (!m.has_constant_mass()) {
    const Vec qdot = m.solve_mass(x.q, x.p);
    qddot_like -= m.solve_mass(x.q, m.mass_rate(x.q, qdot) * qdot);
  }
  const Vec thetaddot = checked_solve(m.J(), dx.s, "J", ErrorKind::DegenerateModel);
  ClosedLoopState dy;
  dy.q = dx.q;
  dy.phi = Ke_inv * (coupling * dx.q + K * dx.theta);
  dy.p = dx.p;
  dy.z = sp.J_e * (Ke_inv * (coupling * qddot_like + K * thetaddot));
  return dy;
}

struct EquivalenceResidual {
  double absolute;  // max-norm of the mismatch
  double relative;  // absolute / max(field max-norm, 1e-12)
};

/// Evaluates the plant under the impedance law, maps its velocity into the
/// shaped chart and compares it against the closed-loop field there.
inline EquivalenceResidual equivalence_residual(const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u,
                                                const ImpedanceGains& g, const ShapedParams& sp,
                                                const NonlinearRobotModel& m, ControlLaw law) {
  x.check(m.n());
  check_gains(g, m.n());
  const double mismatch = gain_inconsistency(g, sp, m.mass_of(x.q), m.J(), m.K());
  if (mismatch > 1e-9) {
    raise(ErrorKind::Configuration, "gains are inconsistent with the shaped parameters (relative mismatch " +
                                        std::to_string(mismatch) + ")");
  }
  const Vec tau = law == ControlLaw::Nonlinear ? nonlinear_control(x, tau_e, tau_u, g, m)
                                               : linear_control(x, tau_e, tau_u, g, m);
  const auto dx = open_loop_field(x, tau_e, tau, m);
  const Vec pushed = push_forward(x, dx, sp, m).stacked();
  const Vec field = closed_loop_field(to_closed(x, sp, m), tau_e, tau_u, sp, m).stacked();
  const double abs_res = (pushed - field).lpNorm<Eigen::Infinity>();
  return {abs_res, abs_res / std::max(field.lpNorm<Eigen::Infinity>(), 1e-12)};
}

/// Residual with gains scheduled at the state's configuration and the law
/// matching the model (Coriolis compensation for configuration-dependent mass).
inline EquivalenceResidual equivalence_residual(const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u,
                                                const ShapedParams& sp, const NonlinearRobotModel& m) {
  return equivalence_residual(x, tau_e, tau_u, gains_at(m, sp, x.q), sp, m,
                              m.has_constant_mass() ? ControlLaw::Linear : ControlLaw::Nonlinear);
}

}  // namespace fjic
