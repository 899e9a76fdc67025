#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fjic/linalg.hpp"

namespace fjic {

/// One classical fourth-order Runge-Kutta step of xdot = f(t, x).
template <typename Field>
Vec rk4_step(const Field& f, double t, const Vec& x, double dt) {
  const Vec k1 = f(t, x);
  const Vec k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
  const Vec k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
  const Vec k4 = f(t + dt, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Number of uniform steps covering [0, T] with a step no larger than dt.
inline long step_count(double dt, double T) {
  if (!(dt > 0.0) || !std::isfinite(dt)) raise(ErrorKind::Validation, "dt must be positive");
  if (!(T >= dt)) raise(ErrorKind::Validation, "horizon must be at least one step");
  return static_cast<long>(std::ceil(T / dt - 1e-9));
}

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> x;
};

/// Fixed-step RK4 on [0, T]. The step is shrunk to T / ceil(T / dt) so the grid
/// ends exactly at T. Throws a divergence error at the first non-finite state.
template <typename Field>
Trajectory integrate(const Field& f, const Vec& x0, double dt, double T) {
  const long steps = step_count(dt, T);
  const double h = T / static_cast<double>(steps);
  Trajectory traj;
  traj.t.reserve(static_cast<std::size_t>(steps) + 1);
  traj.x.reserve(static_cast<std::size_t>(steps) + 1);
  traj.t.push_back(0.0);
  traj.x.push_back(x0);
  Vec x = x0;
  for (long k = 0; k < steps; ++k) {
    const double t = k * h;
    x = rk4_step(f, t, x, h);
    const double t_next = (k + 1) * h;
    if (!x.allFinite()) raise(ErrorKind::Divergence, "state became non-finite at t = " + std::to_string(t_next));
    traj.t.push_back(t_next);
    traj.x.push_back(x);
  }
  return traj;
}

}  // namespace fjic
