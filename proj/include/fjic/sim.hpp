#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fjic/integrator.hpp"
#include "fjic/lti.hpp"
#include "fjic/transform.hpp"

namespace fjic {

/// External torque applied at the interaction port.
struct InputSignal {
  enum class Kind { Zero, Step, Sinusoid };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;   // N m
  Eigen::Index joint = 0;   // zero-based
  double start_time = 0.0;  // s, step only
  double frequency = 0.0;   // rad/s, sinusoid only

  static InputSignal zero() { return {}; }
  static InputSignal step(double amplitude, Eigen::Index joint, double start) {
    return {Kind::Step, amplitude, joint, start, 0.0};
  }
  static InputSignal sinusoid(double amplitude, Eigen::Index joint, double frequency) {
    return {Kind::Sinusoid, amplitude, joint, 0.0, frequency};
  }

  /// Steps are held over a whole integration step and switch on at the grid
  /// point nearest to start_time; sinusoids are evaluated at stage times.
  Vec value(Eigen::Index n, double t_stage, double t_step_start, double h) const {
    Vec tau = Vec::Zero(n);
    if (kind == Kind::Zero) return tau;
    if (joint < 0 || joint >= n) raise(ErrorKind::Validation, "input joint index out of range");
    if (kind == Kind::Step) {
      if (t_step_start + 0.5 * h > start_time) tau(joint) = amplitude;
    } else {
      tau(joint) = amplitude * std::sin(frequency * t_stage);
    }
    return tau;
  }
};

enum class ControllerKind { None, Linear, Nonlinear };

/// Impedance controller attached to the plant. The linear law uses the fixed
/// `gains`; the nonlinear law re-evaluates K_F and K_G at M(q) and adds
/// Coriolis compensation. `shaped` is needed in both cases for the shaped
/// coordinates that drive the outer loop and the storage function.
struct Controller {
  ControllerKind kind = ControllerKind::None;
  ImpedanceGains gains;
  ShapedParams shaped;
  std::optional<OuterLoop> outer;

  static Controller none() { return {}; }
  static Controller linear(const GainSynthesis& gs, std::optional<OuterLoop> outer = std::nullopt) {
    return {ControllerKind::Linear, gs.gains, gs.shaped, std::move(outer)};
  }
  static Controller nonlinear(const ShapedParams& sp, std::optional<OuterLoop> outer = std::nullopt) {
    return {ControllerKind::Nonlinear, {}, sp, std::move(outer)};
  }
};

struct Scenario {
  std::shared_ptr<const NonlinearRobotModel> plant;
  Controller controller;
  std::optional<EnvironmentImpedance> environment;
  InputSignal input;
  double horizon = 1.0;
  double dt = 0.0;  // 0 selects the stability-derived cap
  std::optional<OpenLoopState> initial;

  const NonlinearRobotModel& model() const {
    if (!plant) raise(ErrorKind::Configuration, "scenario has no plant");
    return *plant;
  }

  OpenLoopState initial_state() const { return initial ? *initial : OpenLoopState::zero(model().n()); }
};

/// Time series of one run. Both charts are recorded: (theta, s) and (phi, z).
struct SimResult {
  std::vector<double> t;
  std::vector<Vec> q, theta, phi, p, s, z;
  std::vector<Vec> tau, tau_e, tau_u;
  std::vector<double> energy, supply, passivity_residual;
  double dt = 0.0;
  double omega_max = 0.0;
  bool dt_capped = false;
  std::optional<double> diverged_at;

  std::size_t size() const { return t.size(); }
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(double time, SimResult partial)
      : Error(ErrorKind::Divergence, "state became non-finite at t = " + std::to_string(time)),
        partial_(std::move(partial)) {}
  const SimResult& partial() const { return partial_; }

 private:
  SimResult partial_;
};

/// Highest undamped natural frequency (rad/s) of the stiffness/mass pencil at q.
/// With a controller the pencil is the shaped one, (M(q) + M_h, J_e) against
/// [[K_e + K_h, -K_e], [-K_e, K_e + K_phi]].
inline double highest_natural_frequency(const Scenario& sc, const Vec& q) {
  const auto& m = sc.model();
  const auto n = m.n();
  const bool shaped = sc.controller.kind != ControllerKind::None;
  const Mat& Jm = shaped ? sc.controller.shaped.J_e : m.J();
  const Mat& Kj = shaped ? sc.controller.shaped.K_e : m.K();
  Mat mass = Mat::Zero(2 * n, 2 * n);
  Mat stiff = Mat::Zero(2 * n, 2 * n);
  mass.topLeftCorner(n, n) = m.mass_of(q);
  mass.bottomRightCorner(n, n) = Jm;
  stiff.topLeftCorner(n, n) = Kj;
  stiff.topRightCorner(n, n) = -Kj;
  stiff.bottomLeftCorner(n, n) = -Kj;
  stiff.bottomRightCorner(n, n) = Kj;
  if (sc.environment) {
    mass.topLeftCorner(n, n) += sc.environment->M_h;
    stiff.topLeftCorner(n, n) += sc.environment->K_h;
  }
  if (shaped && sc.controller.outer) stiff.bottomRightCorner(n, n) += sc.controller.outer->K_phi;
  stiff = 0.5 * (stiff + stiff.transpose()).eval();
  mass = 0.5 * (mass + mass.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(stiff, mass);
  if (ges.info() != Eigen::Success) raise(ErrorKind::DegenerateModel, "stiffness/mass pencil is degenerate");
  return std::sqrt(std::max(ges.eigenvalues().maxCoeff(), 0.0));
}

/// dt <= 1 / (20 omega_max).
inline double stable_step_cap(const Scenario& sc) {
  const double w = highest_natural_frequency(sc, sc.initial_state().q);
  return w > 0.0 ? 1.0 / (20.0 * w) : std::numeric_limits<double>::infinity();
}

namespace detail {

struct StepPlan {
  double h;
  long steps;
  double omega_max;
  bool capped;
};

inline StepPlan plan_steps(const Scenario& sc) {
  if (!(sc.horizon > 0.0)) raise(ErrorKind::Validation, "horizon must be positive");
  const double omega = highest_natural_frequency(sc, sc.initial_state().q);
  const double cap = omega > 0.0 ? 1.0 / (20.0 * omega) : std::numeric_limits<double>::infinity();
  if (sc.dt < 0.0) raise(ErrorKind::Validation, "dt must be positive");
  double dt = sc.dt > 0.0 ? sc.dt : cap;
  bool capped = false;
  if (dt > cap) {
    dt = cap;
    capped = true;
  }
  if (!std::isfinite(dt)) dt = sc.horizon / 1000.0;
  const long steps = step_count(std::min(dt, sc.horizon), sc.horizon);
  return {sc.horizon / static_cast<double>(steps), steps, omega, capped};
}

/// Signals evaluated at one state of the run.
struct Sample {
  OpenLoopState x;
  ClosedLoopState y;
  Vec tau, tau_e, tau_u;
  double energy;
};

inline ImpedanceGains active_gains(const Controller& c, const NonlinearRobotModel& m, const Vec& q) {
  return c.kind == ControllerKind::Linear ? c.gains : gains_at(m, c.shaped, q);
}

inline Vec apply_law(const Controller& c, const OpenLoopState& x, const Vec& tau_e, const Vec& tau_u,
                     const NonlinearRobotModel& m) {
  switch (c.kind) {
    case ControllerKind::None: return Vec::Zero(m.n());
    case ControllerKind::Linear: return linear_control(x, tau_e, tau_u, c.gains, m);
    case ControllerKind::Nonlinear: return nonlinear_control(x, tau_e, tau_u, active_gains(c, m, x.q), m);
  }
  return Vec::Zero(m.n());
}

inline Vec outer_torque(const Controller& c, const ClosedLoopState& y, const NonlinearRobotModel& m) {
  if (c.kind == ControllerKind::None || !c.outer) return Vec::Zero(m.n());
  const Vec phidot = checked_solve(c.shaped.J_e, y.z, "J_e", ErrorKind::DegenerateModel);
  return outer_loop_torque(y.phi, phidot, *c.outer, m);
}

inline void record(SimResult& r, double t, const Sample& s, double supply) {
  r.t.push_back(t);
  r.q.push_back(s.x.q);
  r.theta.push_back(s.x.theta);
  r.phi.push_back(s.y.phi);
  r.p.push_back(s.x.p);
  r.s.push_back(s.x.s);
  r.z.push_back(s.y.z);
  r.tau.push_back(s.tau);
  r.tau_e.push_back(s.tau_e);
  r.tau_u.push_back(s.tau_u);
  r.energy.push_back(s.energy);
  r.supply.push_back(supply);
  r.passivity_residual.push_back(s.energy - r.energy.front() - supply);
}

/// Shared fixed-step loop. `field(t, X, tau_e)` returns the derivative of the
/// augmented state [x; supply]; `sample(X, tau_e)` reconstructs the recorded
/// signals.
template <typename Field, typename Sampler>
SimResult run(const Scenario& sc, const Vec& x0, const Field& field, const Sampler& sample) {
  const auto plan = plan_steps(sc);
  const auto n = sc.model().n();
  SimResult r;
  r.dt = plan.h;
  r.omega_max = plan.omega_max;
  r.dt_capped = plan.capped;
  Vec X(x0.size() + 1);
  X << x0, 0.0;
  r.t.reserve(static_cast<std::size_t>(plan.steps) + 1);
  for (long k = 0; k <= plan.steps; ++k) {
    const double t = k * plan.h;
    const Vec tau_e_held = sc.input.value(n, t, t, plan.h);
    record(r, t, sample(X.head(x0.size()), tau_e_held), X(x0.size()));
    if (k == plan.steps) break;
    const auto f = [&](double ts, const Vec& Xs) -> Vec {
      return field(ts, Xs, sc.input.value(n, ts, t, plan.h));
    };
    X = rk4_step(f, t, X, plan.h);
    if (!X.allFinite()) {
      r.diverged_at = t + plan.h;
      throw SimulationDiverged(t + plan.h, std::move(r));
    }
  }
  return r;
}

}  // namespace detail

/// Integrates the plant in (q, theta, p, s) with the control torque evaluated at
/// every Runge-Kutta stage. Storage is H_CL (H_OL without a controller) and the
/// supply rate is qdot^T tau_e + phidot^T tau_u.
inline SimResult simulate_plant_with_controller(const Scenario& sc) {
  const auto& m = sc.model();
  const auto n = m.n();
  const auto& c = sc.controller;
  if (sc.environment) {
    raise(ErrorKind::Configuration, "environment interaction is simulated in the shaped chart (simulate_coupled)");
  }
  if (c.outer) c.outer->validate(n);
  const bool shaped = c.kind != ControllerKind::None;

  const auto field = [&](double, const Vec& X, const Vec& tau_e) -> Vec {
    const auto x = OpenLoopState::unstack(X.head(4 * n));
    Vec out(4 * n + 1);
    if (!shaped) {
      const auto dx = open_loop_field(x, tau_e, Vec::Zero(n), m);
      out << dx.stacked(), dx.q.dot(tau_e);
      return out;
    }
    const auto y = to_closed(x, c.shaped, m);
    const Vec tau_u = detail::outer_torque(c, y, m);
    const Vec tau = detail::apply_law(c, x, tau_e, tau_u, m);
    const auto dx = open_loop_field(x, tau_e, tau, m);
    const Vec phidot = checked_solve(c.shaped.J_e, y.z, "J_e", ErrorKind::DegenerateModel);
    out << dx.stacked(), dx.q.dot(tau_e) + phidot.dot(tau_u);
    return out;
  };
  const auto sample = [&](const Vec& X, const Vec& tau_e) {
    detail::Sample s;
    s.x = OpenLoopState::unstack(X);
    s.tau_e = tau_e;
    if (!shaped) {
      s.y = {s.x.q, s.x.theta, s.x.p, s.x.s};
      s.tau_u = Vec::Zero(n);
      s.tau = Vec::Zero(n);
      s.energy = open_loop_energy(s.x, m);
      return s;
    }
    s.y = to_closed(s.x, c.shaped, m);
    s.tau_u = detail::outer_torque(c, s.y, m);
    s.tau = detail::apply_law(c, s.x, tau_e, s.tau_u, m);
    s.energy = closed_loop_energy(s.y, c.shaped, m);
    return s;
  };
  return detail::run(sc, sc.initial_state().stacked(), field, sample);
}

namespace detail {

/// Closed-chart integration shared by the free and the coupled runs. `robot` is
/// the plant alone (outer-loop gravity compensation, reported motor torque);
/// `link` carries any merged environment inertia and stiffness.
inline SimResult simulate_shaped(const Scenario& sc, const ShapedParams& sp, const NonlinearRobotModel& link,
                                 const Mat* link_damping, const Mat* env_mass) {
  const auto& robot = sc.model();
  const auto n = robot.n();
  Controller c = sc.controller;
  if (c.kind == ControllerKind::None) c.outer.reset();
  if (c.outer) c.outer->validate(n);
  const auto outer_u = [&](const ClosedLoopState& y) -> Vec {
    if (!c.outer) return Vec::Zero(n);
    const Vec phidot = checked_solve(sp.J_e, y.z, "J_e", ErrorKind::DegenerateModel);
    return outer_loop_torque(y.phi, phidot, *c.outer, robot);
  };

  OpenLoopState x0 = sc.initial_state();
  if (env_mass) x0.p = (robot.mass_of(x0.q) + *env_mass) * robot.solve_mass(x0.q, x0.p);
  const Vec y0 = to_closed(x0, sp, link).stacked();

  const auto field = [&](double, const Vec& Y, const Vec& drive) -> Vec {
    const auto y = ClosedLoopState::unstack(Y.head(4 * n));
    const Vec tau_u = outer_u(y);
    const auto dy = closed_loop_field_with_link_damping(y, drive, tau_u, sp, link, link_damping);
    Vec out(4 * n + 1);
    out << dy.stacked(), dy.q.dot(drive) + dy.phi.dot(tau_u);
    return out;
  };
  const auto sample = [&](const Vec& Y, const Vec& drive) {
    Sample s;
    s.y = ClosedLoopState::unstack(Y);
    s.tau_u = outer_u(s.y);
    s.energy = closed_loop_energy(s.y, sp, link);
    s.tau_e = drive;
    const Vec qdot = link.solve_mass(s.y.q, s.y.p);
    if (env_mass) {
      // Port torque seen by the robot: drive minus the environment reaction.
      const auto dy = closed_loop_field_with_link_damping(s.y, drive, s.tau_u, sp, link, link_damping);
      const Vec qddot = link.solve_mass(s.y.q, dy.p - link.mass_rate(s.y.q, qdot) * qdot);
      const Mat& Dh = *link_damping;
      const Vec Kh_q = link.gravity_grad_of(s.y.q) - robot.gravity_grad_of(s.y.q);
      s.tau_e = drive - (*env_mass * qddot + Dh * qdot + Kh_q);
    }
    // Express the state in the robot's own open-loop chart.
    ClosedLoopState robot_y = s.y;
    robot_y.p = robot.mass_of(s.y.q) * qdot;
    s.x = from_closed(robot_y, sp, robot);
    s.y.p = robot_y.p;
    const ImpedanceGains g = gains_at(robot, sp, s.x.q);
    s.tau = robot.has_constant_mass() ? linear_control(s.x, s.tau_e, s.tau_u, g, robot)
                                      : nonlinear_control(s.x, s.tau_e, s.tau_u, g, robot);
    return s;
  };
  return run(sc, y0, field, sample);
}

}  // namespace detail

/// Integrates the shaped closed loop directly in (q, phi, p, z).
inline SimResult simulate_closed_form(const Scenario& sc, const ShapedParams& sp) {
  if (sc.environment) raise(ErrorKind::Configuration, "use simulate_coupled for environment interaction");
  return detail::simulate_shaped(sc, sp, sc.model(), nullptr, nullptr);
}

/// Shaped closed loop in contact with a mass-damper-spring environment. The
/// environment inertia is merged into the link mass and its spring into the
/// potential, so no algebraic loop on qddot arises. The recorded energy is the
/// robot storage plus the environment's kinetic and elastic energy.
inline SimResult simulate_coupled(const Scenario& sc) {
  if (!sc.environment) raise(ErrorKind::Configuration, "coupled simulation needs an environment");
  const auto& env = *sc.environment;
  const auto& robot = sc.model();
  env.validate(robot.n());
  const ShapedParams sp = sc.controller.kind == ControllerKind::None
                              ? ShapedParams{robot.J(), robot.K(), robot.D(), false}
                              : sc.controller.shaped;
  const auto link = robot.with_added_link_terms(env.M_h, env.K_h);
  checked_lu(robot.mass_of(sc.initial_state().q) + env.M_h, "M + M_h", ErrorKind::DegenerateModel);
  return detail::simulate_shaped(sc, sp, link, &env.D_h, &env.M_h);
}

/// max over t > 0 of H(t) - H(0) - supply(t); <= 0 (up to integration error)
/// when the dissipation inequality holds. A single-sample result gives 0.
inline double passivity_audit(const SimResult& r) {
  const auto& res = r.passivity_residual;
  if (res.empty()) raise(ErrorKind::Validation, "empty simulation result");
  if (res.size() == 1) return res.front();
  return *std::max_element(res.begin() + 1, res.end());
}

/// Desired link behaviour M(q) qddot + (C(q, qdot) + D_theta) qdot + K_theta (q - q_d) = tau_e.
struct TargetDynamics {
  Mat K_theta;
  Mat D_theta;
  Vec q_d;
};

struct TargetRun {
  std::vector<double> t;
  std::vector<Vec> q;
};

/// Integrates the target dynamics in momentum form with the same step plan as `sc`.
inline TargetRun simulate_target(const Scenario& sc, const TargetDynamics& target) {
  const auto& m = sc.model();
  const auto n = m.n();
  require_shape(target.K_theta, n, n, "K_theta");
  require_shape(target.D_theta, n, n, "D_theta");
  require_size(target.q_d, n, "q_d");
  const auto plan = detail::plan_steps(sc);
  const auto x0 = sc.initial_state();
  Vec X(2 * n);
  X << x0.q, x0.p;
  TargetRun run;
  for (long k = 0; k <= plan.steps; ++k) {
    const double t = k * plan.h;
    run.t.push_back(t);
    run.q.push_back(X.head(n));
    if (k == plan.steps) break;
    const auto f = [&](double ts, const Vec& Xs) -> Vec {
      const Vec q = Xs.head(n), p = Xs.tail(n);
      const Vec qdot = m.solve_mass(q, p);
      Vec out(2 * n);
      Vec pdot = -target.D_theta * qdot - target.K_theta * (q - target.q_d) + sc.input.value(n, ts, t, plan.h);
      if (!m.has_constant_mass()) pdot -= m.kinetic_gradient(q, p);
      out << qdot, pdot;
      return out;
    };
    X = rk4_step(f, t, X, plan.h);
    if (!X.allFinite()) raise(ErrorKind::Divergence, "target dynamics diverged at t = " + std::to_string(t + plan.h));
  }
  return run;
}

/// sqrt(integral (a - b)^2 dt) by the trapezoidal rule.
inline double l2_distance(const std::vector<double>& t, const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != t.size() || b.size() != t.size()) raise(ErrorKind::Dimension, "series lengths differ");
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) {
    const double e0 = a[k - 1] - b[k - 1], e1 = a[k] - b[k];
    acc += 0.5 * (e0 * e0 + e1 * e1) * (t[k] - t[k - 1]);
  }
  return std::sqrt(acc);
}

inline std::vector<double> component(const std::vector<Vec>& series, Eigen::Index i) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& v : series) out.push_back(v(i));
  return out;
}

}  // namespace fjic
