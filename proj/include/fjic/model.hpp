#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fjic/linalg.hpp"

namespace fjic {

/// Flexible-joint plant with a constant link mass matrix.
struct LinearRobotParams {
  Mat M;  // link inertia
  Mat J;  // motor inertia
  Mat K;  // joint stiffness
  Mat D;  // joint damping

  Eigen::Index n() const { return M.rows(); }

  void validate() const {
    const auto dim = n();
    if (dim < 1) raise(ErrorKind::Validation, "plant has no joints");
    require_shape(M, dim, dim, "M");
    require_shape(J, dim, dim, "J");
    require_shape(K, dim, dim, "K");
    require_shape(D, dim, dim, "D");
    require_spd(M, "M");
    require_spd(J, "J");
    require_spd(K, "K");
    require_spsd(D, "D");
  }

  static LinearRobotParams scalar(double m, double j, double k, double d) {
    return {Mat::Constant(1, 1, m), Mat::Constant(1, 1, j), Mat::Constant(1, 1, k), Mat::Constant(1, 1, d)};
  }
};

/// Open-loop coordinates: link/motor positions and their momenta p = M(q) qdot, s = J thetadot.
struct OpenLoopState {
  Vec q, theta, p, s;

  static OpenLoopState zero(Eigen::Index n) {
    return {Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
  }

  Eigen::Index n() const { return q.size(); }

  Vec stacked() const {
    Vec x(4 * n());
    x << q, theta, p, s;
    return x;
  }

  static OpenLoopState unstack(const Vec& x) {
    if (x.size() % 4 != 0) raise(ErrorKind::Dimension, "open-loop state length is not a multiple of 4");
    const auto n = x.size() / 4;
    return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, n), x.segment(3 * n, n)};
  }

  void check(Eigen::Index n_joints) const {
    require_size(q, n_joints, "q");
    require_size(theta, n_joints, "theta");
    require_size(p, n_joints, "p");
    require_size(s, n_joints, "s");
  }
};

/// Flexible-joint plant with configuration-dependent link inertia M(q).
///
/// The model is described by providers for M(q), its partial derivatives
/// dM/dq_k, the potential V(q) and its gradient. The Coriolis matrix is built
/// from the mass partials with Christoffel symbols of the first kind, so
/// Mdot - 2C is skew-symmetric by construction.
class NonlinearRobotModel {
 public:
  struct Providers {
    std::function<Mat(const Vec&)> mass;
    std::function<std::vector<Mat>(const Vec&)> mass_partials;
    std::function<double(const Vec&)> potential;
    std::function<Vec(const Vec&)> gravity_grad;
  };

  NonlinearRobotModel(Eigen::Index n, Providers providers, Mat J, Mat K, Mat D, bool constant_mass = false)
      : n_(n),
        providers_(std::move(providers)),
        J_(std::move(J)),
        K_(std::move(K)),
        D_(std::move(D)),
        constant_mass_(constant_mass) {
    if (n_ < 1) raise(ErrorKind::Validation, "model has no joints");
    if (!providers_.mass || !providers_.mass_partials) raise(ErrorKind::Validation, "mass provider missing");
    if (!providers_.potential) providers_.potential = [](const Vec&) { return 0.0; };
    if (!providers_.gravity_grad) {
      const auto dim = n_;
      providers_.gravity_grad = [dim](const Vec&) { return Vec::Zero(dim); };
    }
    require_shape(J_, n_, n_, "J");
    require_shape(K_, n_, n_, "K");
    require_shape(D_, n_, n_, "D");
    require_spd(J_, "J");
    require_spd(K_, "K");
    require_spsd(D_, "D");
  }

  /// Constant-mass model with V == 0.
  static NonlinearRobotModel from_linear(const LinearRobotParams& lp) {
    lp.validate();
    const Mat M = lp.M;
    const auto n = lp.n();
    Providers providers;
    providers.mass = [M](const Vec&) { return M; };
    providers.mass_partials = [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); };
    return NonlinearRobotModel(n, std::move(providers), lp.J, lp.K, lp.D, true);
  }

  Eigen::Index n() const { return n_; }
  const Mat& J() const { return J_; }
  const Mat& K() const { return K_; }
  const Mat& D() const { return D_; }
  bool has_constant_mass() const { return constant_mass_; }

  Mat mass_of(const Vec& q) const {
    require_size(q, n_, "q");
    return providers_.mass(q);
  }

  std::vector<Mat> mass_partials_of(const Vec& q) const {
    require_size(q, n_, "q");
    return providers_.mass_partials(q);
  }

  double potential_of(const Vec& q) const {
    require_size(q, n_, "q");
    return providers_.potential(q);
  }

  Vec gravity_grad_of(const Vec& q) const {
    require_size(q, n_, "q");
    return providers_.gravity_grad(q);
  }

  /// Mdot along the velocity qdot: sum_k dM/dq_k * qdot_k.
  Mat mass_rate(const Vec& q, const Vec& qdot) const {
    require_size(qdot, n_, "qdot");
    const auto partials = mass_partials_of(q);
    Mat rate = Mat::Zero(n_, n_);
    for (Eigen::Index k = 0; k < n_; ++k) rate += partials[k] * qdot(k);
    return rate;
  }

  /// C_ij = sum_k 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) qdot_k
  Mat coriolis_of(const Vec& q, const Vec& qdot) const {
    require_size(qdot, n_, "qdot");
    const auto dM = mass_partials_of(q);
    Mat C = Mat::Zero(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index j = 0; j < n_; ++j) {
        double c = 0.0;
        for (Eigen::Index k = 0; k < n_; ++k) {
          c += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qdot(k);
        }
        C(i, j) = c;
      }
    }
    return C;
  }

  /// Gradient in q of the kinetic co-energy term 1/2 p^T M(q)^{-1} p at fixed p.
  Vec kinetic_gradient(const Vec& q, const Vec& p) const {
    const Vec v = solve_mass(q, p);
    const auto dM = mass_partials_of(q);
    Vec g(n_);
    for (Eigen::Index k = 0; k < n_; ++k) g(k) = -0.5 * v.dot(dM[k] * v);
    return g;
  }

  Vec solve_mass(const Vec& q, const Vec& rhs) const {
    return checked_solve(mass_of(q), rhs, "M(q)", ErrorKind::DegenerateModel);
  }

  Mat mass_inverse(const Vec& q) const {
    return checked_inverse(mass_of(q), "M(q)", ErrorKind::DegenerateModel);
  }

  /// Same model with extra constant link inertia and a quadratic spring potential.
  /// Used for merging a mass-spring environment into the link dynamics.
  NonlinearRobotModel with_added_link_terms(const Mat& extra_mass, const Mat& extra_stiffness) const {
    require_shape(extra_mass, n_, n_, "M_h");
    require_shape(extra_stiffness, n_, n_, "K_h");
    Providers p = providers_;
    const auto base = providers_;
    p.mass = [base, extra_mass](const Vec& q) -> Mat { return base.mass(q) + extra_mass; };
    p.potential = [base, extra_stiffness](const Vec& q) { return base.potential(q) + 0.5 * q.dot(extra_stiffness * q); };
    p.gravity_grad = [base, extra_stiffness](const Vec& q) -> Vec { return base.gravity_grad(q) + extra_stiffness * q; };
    return NonlinearRobotModel(n_, std::move(p), J_, K_, D_, constant_mass_);
  }

 private:
  Eigen::Index n_;
  Providers providers_;
  Mat J_, K_, D_;
  bool constant_mass_;
};

/// H_OL = 1/2 p^T M^-1 p + 1/2 s^T J^-1 s + 1/2 (theta-q)^T K (theta-q) + V(q)
inline double open_loop_energy(const OpenLoopState& x, const NonlinearRobotModel& m) {
  x.check(m.n());
  const Vec qdot = m.solve_mass(x.q, x.p);
  const Vec thetadot = checked_solve(m.J(), x.s, "J", ErrorKind::DegenerateModel);
  const Vec defl = x.theta - x.q;
  return 0.5 * x.p.dot(qdot) + 0.5 * x.s.dot(thetadot) + 0.5 * defl.dot(m.K() * defl) + m.potential_of(x.q);
}

/// Port-Hamiltonian open-loop vector field driven by the external torque tau_e
/// and the motor torque tau.
inline OpenLoopState open_loop_field(const OpenLoopState& x, const Vec& tau_e, const Vec& tau,
                                     const NonlinearRobotModel& m) {
  x.check(m.n());
  require_size(tau_e, m.n(), "tau_e");
  require_size(tau, m.n(), "tau");
  const Vec qdot = m.solve_mass(x.q, x.p);
  const Vec thetadot = checked_solve(m.J(), x.s, "J", ErrorKind::DegenerateModel);
  const Vec joint = m.K() * (x.theta - x.q) + m.D() * (thetadot - qdot);
  OpenLoopState dx;
  dx.q = qdot;
  dx.theta = thetadot;
  dx.p = -m.gravity_grad_of(x.q) + joint + tau_e;
  if (!m.has_constant_mass()) dx.p -= m.kinetic_gradient(x.q, x.p);
  dx.s = -joint + tau;
  return dx;
}

/// Constant-mass field; the kinetic gradient term vanishes identically.
inline OpenLoopState open_loop_field(const OpenLoopState& x, const Vec& tau_e, const Vec& tau,
                                     const LinearRobotParams& lp) {
  x.check(lp.n());
  require_size(tau_e, lp.n(), "tau_e");
  require_size(tau, lp.n(), "tau");
  const Vec qdot = checked_solve(lp.M, x.p, "M", ErrorKind::DegenerateModel);
  const Vec thetadot = checked_solve(lp.J, x.s, "J", ErrorKind::DegenerateModel);
  const Vec joint = lp.K * (x.theta - x.q) + lp.D * (thetadot - qdot);
  return {qdot, thetadot, joint + tau_e, -joint + tau};
}

struct TwoLinkArmParams {
  double length1 = 0.6;
  double length2 = 0.5;
  double mass1 = 4.0;
  double mass2 = 3.0;
  Eigen::Vector2d motor_inertia{0.5, 0.3};
  Eigen::Vector2d stiffness{1.0e4, 1.0e4};
  Eigen::Vector2d damping{0.0, 0.0};
  bool gravity = false;
  double g = 9.81;
};

/// Planar two-link arm with uniform slender links (centre of mass at mid-length,
/// inertia m l^2 / 12 about it). Angles are absolute for joint 1 and relative
/// for joint 2. With gravity on, the arm moves in a vertical plane and V is
/// offset so that V >= 0 everywhere.
inline NonlinearRobotModel two_link_arm(const TwoLinkArmParams& a) {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) raise(ErrorKind::Validation, std::string(name) + " must be positive");
  };
  positive(a.length1, "length1");
  positive(a.length2, "length2");
  positive(a.mass1, "mass1");
  positive(a.mass2, "mass2");
  positive(a.motor_inertia(0), "motor_inertia[0]");
  positive(a.motor_inertia(1), "motor_inertia[1]");
  positive(a.stiffness(0), "stiffness[0]");
  positive(a.stiffness(1), "stiffness[1]");
  if (a.damping.minCoeff() < 0.0 || !a.damping.allFinite()) raise(ErrorKind::Validation, "damping must be >= 0");
  if (a.gravity) positive(a.g, "g");

  const double l1 = a.length1, lc1 = 0.5 * a.length1, lc2 = 0.5 * a.length2;
  const double m1 = a.mass1, m2 = a.mass2;
  const double i1 = m1 * a.length1 * a.length1 / 12.0;
  const double i2 = m2 * a.length2 * a.length2 / 12.0;
  const double alpha = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2);
  const double beta = m2 * l1 * lc2;
  const double delta = i2 + m2 * lc2 * lc2;

  NonlinearRobotModel::Providers p;
  p.mass = [=](const Vec& q) -> Mat {
    const double c2 = std::cos(q(1));
    Mat M(2, 2);
    M << alpha + 2.0 * beta * c2, delta + beta * c2, delta + beta * c2, delta;
    return M;
  };
  p.mass_partials = [=](const Vec& q) {
    const double s2 = std::sin(q(1));
    Mat dq2(2, 2);
    dq2 << -2.0 * beta * s2, -beta * s2, -beta * s2, 0.0;
    return std::vector<Mat>{Mat::Zero(2, 2), dq2};
  };
  if (a.gravity) {
    const double g = a.g;
    const double offset = g * (m1 * lc1 + m2 * (l1 + lc2));
    p.potential = [=](const Vec& q) {
      return g * (m1 * lc1 * std::sin(q(0)) + m2 * (l1 * std::sin(q(0)) + lc2 * std::sin(q(0) + q(1)))) + offset;
    };
    p.gravity_grad = [=](const Vec& q) -> Vec {
      const double c12 = std::cos(q(0) + q(1));
      Vec grad(2);
      grad << g * (m1 * lc1 * std::cos(q(0)) + m2 * (l1 * std::cos(q(0)) + lc2 * c12)), g * m2 * lc2 * c12;
      return grad;
    };
  }
  return NonlinearRobotModel(2, std::move(p), a.motor_inertia.asDiagonal().toDenseMatrix(),
                             a.stiffness.asDiagonal().toDenseMatrix(), a.damping.asDiagonal().toDenseMatrix());
}

}  // namespace fjic
