#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <memory>

#include "test_support.hpp"

namespace fjic {
namespace {

using testing::paper_plant;

Mat s1(double v) { return Mat::Constant(1, 1, v); }

std::shared_ptr<const NonlinearRobotModel> linear_plant(const LinearRobotParams& lp) {
  return std::make_shared<const NonlinearRobotModel>(NonlinearRobotModel::from_linear(lp));
}

TwoLinkArmParams arm_params() { return TwoLinkArmParams{}; }

std::shared_ptr<const NonlinearRobotModel> arm() { return std::make_shared<const NonlinearRobotModel>(two_link_arm(arm_params())); }

OuterLoop arm_outer() {
  return {1000.0 * Mat::Identity(2, 2), 135.0 * Mat::Identity(2, 2), Vec::Zero(2), false};
}

/// Arm state at q = (0.3, 0.5) moving with |qdot| = 1 rad/s, joints unloaded.
OpenLoopState moving_arm_state(const NonlinearRobotModel& m) {
  Vec q(2), qdot(2);
  q << 0.3, 0.5;
  qdot << 0.6, -0.8;
  return {q, q, m.mass_of(q) * qdot, m.J() * qdot};
}

double sup_norm(const std::vector<Vec>& series) {
  double s = 0.0;
  for (const auto& v : series) s = std::max(s, v.cwiseAbs().maxCoeff());
  return s;
}

double sup_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  EXPECT_EQ(a.size(), b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) s = std::max(s, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return s;
}

double energy_drift(const SimResult& r) {
  double worst = 0.0;
  for (double h : r.energy) worst = std::max(worst, std::abs(h - r.energy.front()));
  return worst / std::abs(r.energy.front());
}

TEST(Integrate, ConstantFieldStaysPut) {
  const Vec x0 = (Vec(2) << 1.5, -2.0).finished();
  const auto traj = integrate([](double, const Vec& x) -> Vec { return Vec::Zero(x.size()); }, x0, 0.1, 1.0);
  ASSERT_EQ(traj.x.size(), 11u);
  for (const auto& x : traj.x) EXPECT_EQ(x, x0);
  EXPECT_DOUBLE_EQ(traj.t.back(), 1.0);
}

TEST(Integrate, ExponentialDecay) {
  const auto traj = integrate([](double, const Vec& x) -> Vec { return -x; }, Vec::Ones(1), 1e-3, 1.0);
  EXPECT_NEAR(traj.x.back()(0), std::exp(-1.0), 1e-8);
  EXPECT_NEAR(traj.x.back()(0), 0.367879, 1e-6);
}

TEST(Integrate, StepHalvingShowsFourthOrder) {
  // xddot = -w^2 x, x(0) = 1.
  const double w = 3.0;
  const auto field = [w](double, const Vec& x) -> Vec { return (Vec(2) << x(1), -w * w * x(0)).finished(); };
  const Vec x0 = (Vec(2) << 1.0, 0.0).finished();
  const auto err = [&](double dt) {
    const auto traj = integrate(field, x0, dt, 2.0);
    return std::abs(traj.x.back()(0) - std::cos(w * 2.0));
  };
  for (double dt : {0.02, 0.01, 0.005}) {
    const double ratio = err(dt) / err(0.5 * dt);
    EXPECT_GE(ratio, 12.0) << dt;
    EXPECT_LE(ratio, 20.0) << dt;
  }
}

TEST(Integrate, NonFiniteStateIsReported) {
  try {
    integrate([](double, const Vec& x) -> Vec { return x.cwiseProduct(x).cwiseProduct(x); }, Vec::Ones(1) * 10.0, 0.1, 5.0);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Divergence);
    EXPECT_NE(std::string(e.what()).find("t = "), std::string::npos);
  }
}

TEST(Integrate, RejectsBadSteps) {
  const auto f = [](double, const Vec& x) -> Vec { return x; };
  EXPECT_THROW(integrate(f, Vec::Ones(1), 0.0, 1.0), Error);
  EXPECT_THROW(integrate(f, Vec::Ones(1), 2.0, 1.0), Error);
}

TEST(StepPlan, PaperStiffnessCapsTheStep) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  sc.horizon = 5.0;
  sc.dt = 1e-3;
  const double w = std::sqrt(1e6 * (1.0 / 3.0 + 1.0 / 3.0));
  EXPECT_NEAR(highest_natural_frequency(sc, Vec::Zero(1)), w, 1e-9 * w);
  EXPECT_NEAR(stable_step_cap(sc), 1.0 / (20.0 * w), 1e-12);
  EXPECT_LT(stable_step_cap(sc), 6.2e-5);
  sc.initial = OpenLoopState{s1(0.01).col(0), Vec::Zero(1), Vec::Zero(1), Vec::Zero(1)};
  const auto r = simulate_plant_with_controller(sc);
  EXPECT_TRUE(r.dt_capped);
  EXPECT_LE(r.dt, 1.0 / (20.0 * w));
  EXPECT_DOUBLE_EQ(r.t.back(), 5.0);
  EXPECT_LE(sup_norm(r.q), 0.0101);
  EXPECT_LE(passivity_audit(r), 1e-6 * r.energy.front());
}

TEST(StepPlan, RejectsNonPositiveHorizon) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  sc.horizon = 0.0;
  EXPECT_THROW(simulate_plant_with_controller(sc), Error);
  sc.horizon = 1.0;
  sc.dt = -1e-4;
  EXPECT_THROW(simulate_plant_with_controller(sc), Error);
}

TEST(InputSignal, StepSwitchesAtNearestGridPoint) {
  const auto in = InputSignal::step(2.0, 1, 0.24);
  EXPECT_EQ(in.value(2, 0.1, 0.1, 0.1)(1), 0.0);
  EXPECT_EQ(in.value(2, 0.2, 0.2, 0.1)(1), 2.0);
  EXPECT_EQ(in.value(2, 0.25, 0.2, 0.1)(1), 2.0);
  EXPECT_EQ(in.value(2, 0.3, 0.3, 0.1)(0), 0.0);
  EXPECT_THROW(InputSignal::step(1.0, 3, 0.0).value(2, 0.0, 0.0, 0.1), Error);
  EXPECT_NEAR(InputSignal::sinusoid(2.0, 0, 3.0).value(1, 0.5, 0.4, 0.1)(0), 2.0 * std::sin(1.5), 1e-15);
}

TEST(SimulatePlant, EquilibriumIsStationary) {
  Scenario sc;
  sc.plant = arm();
  sc.controller = Controller::linear(synthesize_gains(*sc.plant, Vec::Zero(2), sc.plant->J(), sc.plant->K()));
  sc.horizon = 0.2;
  const auto r = simulate_plant_with_controller(sc);
  EXPECT_EQ(sup_norm(r.q), 0.0);
  EXPECT_EQ(sup_norm(r.p), 0.0);
  EXPECT_EQ(sup_norm(r.tau), 0.0);
  const auto free = [&] {
    Scenario s = sc;
    s.controller = Controller::none();
    return simulate_plant_with_controller(s);
  }();
  EXPECT_EQ(sup_norm(free.theta), 0.0);
}

TEST(SimulatePlant, SeriesHaveEqualLengths) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  sc.controller = Controller::linear(gains_from_feedback(paper_plant(), s1(0.9), s1(4.0)));
  sc.input = InputSignal::step(1.0, 0, 0.0);
  sc.horizon = 0.01;
  const auto r = simulate_plant_with_controller(sc);
  const auto n = r.size();
  for (std::size_t len : {r.q.size(), r.theta.size(), r.phi.size(), r.p.size(), r.s.size(), r.z.size(), r.tau.size(),
                          r.tau_e.size(), r.tau_u.size(), r.energy.size(), r.supply.size(),
                          r.passivity_residual.size()}) {
    EXPECT_EQ(len, n);
  }
}

TEST(SimulatePlant, EnvironmentBelongsToCoupledRun) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  sc.environment = EnvironmentImpedance::none(1);
  EXPECT_THROW(simulate_plant_with_controller(sc), Error);
}

TEST(SimulateClosedForm, IdentityShapingReproducesOpenLoop) {
  const auto lp = paper_plant();
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.input = InputSignal::step(1.0, 0, 0.0);
  sc.horizon = 0.5;
  const auto open = simulate_plant_with_controller(sc);
  const auto shaped = simulate_closed_form(sc, ShapedParams{lp.J, lp.K, lp.D, false});
  EXPECT_LE(sup_distance(open.q, shaped.q), 1e-9 * sup_norm(open.q));
  EXPECT_LE(sup_distance(open.theta, shaped.theta), 1e-9 * sup_norm(open.theta));
}

TEST(SimulateClosedForm, MatchesPlantRunOnPaperLoop) {
  const auto lp = paper_plant();
  const auto gs = gains_from_feedback(lp, s1(0.9), s1(4.0));
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.controller = Controller::linear(gs, OuterLoop{s1(100.0), s1(10.0), Vec::Zero(1), false});
  sc.input = InputSignal::step(1.0, 0, 0.0);
  sc.horizon = 2.0;
  const auto plant = simulate_plant_with_controller(sc);
  const auto closed = simulate_closed_form(sc, gs.shaped);
  EXPECT_LE(sup_distance(plant.q, closed.q), 1e-6 * sup_norm(plant.q));
  EXPECT_LE(sup_distance(plant.phi, closed.phi), 1e-6 * sup_norm(plant.phi));
  EXPECT_LE(sup_distance(plant.tau, closed.tau), 1e-6 * sup_norm(plant.tau));
  EXPECT_LE(passivity_audit(plant), 1e-6 * *std::max_element(plant.energy.begin(), plant.energy.end()));
}

TEST(SimulateClosedForm, MatchesPlantRunOnMovingArm) {
  const auto m = arm();
  const auto x0 = moving_arm_state(*m);
  const auto sp = synthesize_gains(*m, x0.q, 0.5 * m->J(), 2.0 * m->K()).shaped;
  Scenario sc;
  sc.plant = m;
  sc.controller = Controller::nonlinear(sp, arm_outer());
  sc.input = InputSignal::step(10.0, 1, 0.0);
  sc.initial = x0;
  sc.horizon = 2.0;
  sc.dt = 5e-5;
  const auto plant = simulate_plant_with_controller(sc);
  const auto closed = simulate_closed_form(sc, sp);
  EXPECT_EQ(plant.dt, 5e-5);
  EXPECT_LE(sup_distance(plant.q, closed.q), 1e-6 * sup_norm(plant.q));
  EXPECT_LE(sup_distance(plant.phi, closed.phi), 1e-6 * sup_norm(plant.phi));
}

TEST(SimulateClosedForm, LosslessLoopConservesEnergy) {
  auto lp = paper_plant();
  lp.D = s1(0.0);
  const auto gs = gains_from_feedback(lp, s1(0.9), s1(4.0));
  ASSERT_EQ(gs.shaped.D_e(0, 0), 0.0);
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.controller = Controller::linear(gs);
  sc.initial = OpenLoopState{s1(0.01).col(0), Vec::Zero(1), s1(0.3).col(0), Vec::Zero(1)};
  sc.horizon = 5.0;
  sc.dt = 1.5e-5;
  const auto r = simulate_closed_form(sc, gs.shaped);
  EXPECT_LE(energy_drift(r), 1e-6);
  EXPECT_LE(std::abs(passivity_audit(r)), 1e-8 * r.energy.front());
}

TEST(SimulateClosedForm, LosslessArmConservesEnergy) {
  const auto m = arm();
  const auto x0 = moving_arm_state(*m);
  const auto sp = synthesize_gains(*m, x0.q, 0.5 * m->J(), 2.0 * m->K()).shaped;
  Scenario sc;
  sc.plant = m;
  sc.controller = Controller::nonlinear(sp);
  sc.initial = x0;
  sc.horizon = 5.0;
  const auto r = simulate_closed_form(sc, sp);
  EXPECT_LE(energy_drift(r), 1e-6);
}

TEST(PassivityAudit, DampedRunDissipates) {
  const auto lp = paper_plant();
  const auto gs = gains_from_feedback(lp, s1(0.9), s1(4.0));
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.controller = Controller::linear(gs, OuterLoop{s1(100.0), s1(10.0), Vec::Zero(1), false});
  sc.initial = OpenLoopState{s1(0.01).col(0), Vec::Zero(1), s1(0.3).col(0), Vec::Zero(1)};
  sc.horizon = 1.0;
  const auto r = simulate_plant_with_controller(sc);
  EXPECT_LT(passivity_audit(r), 0.0);
  EXPECT_LT(r.passivity_residual.back(), -1e-3 * r.energy.front());
  EXPECT_THROW(passivity_audit(SimResult{}), Error);
}

TEST(SimulateCoupled, ZeroEnvironmentEqualsClosedForm) {
  const auto lp = paper_plant();
  const auto gs = gains_from_feedback(lp, s1(0.9), s1(4.0));
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.controller = Controller::linear(gs, OuterLoop{s1(100.0), s1(10.0), Vec::Zero(1), false});
  sc.input = InputSignal::step(1.0, 0, 0.0);
  sc.horizon = 0.5;
  const auto closed = simulate_closed_form(sc, gs.shaped);
  sc.environment = EnvironmentImpedance::none(1);
  const auto coupled = simulate_coupled(sc);
  EXPECT_LE(sup_distance(closed.q, coupled.q), 1e-12 * sup_norm(closed.q));
  EXPECT_LE(sup_distance(closed.z, coupled.z), 1e-12 * sup_norm(closed.z));
}

TEST(SimulateCoupled, EnergyIsNonIncreasingWithoutDrive) {
  const auto m = arm();
  const auto x0 = moving_arm_state(*m);
  const auto sp = synthesize_gains(*m, x0.q, 0.5 * m->J(), 2.0 * m->K()).shaped;
  Scenario sc;
  sc.plant = m;
  sc.controller = Controller::nonlinear(sp, arm_outer());
  sc.environment = EnvironmentImpedance{0.5 * Mat::Identity(2, 2), 3.0 * Mat::Identity(2, 2),
                                        200.0 * Mat::Identity(2, 2)};
  sc.initial = x0;
  sc.horizon = 2.0;
  const auto r = simulate_coupled(sc);
  // Robot, environment and outer-loop spring together.
  std::vector<double> total;
  for (std::size_t k = 0; k < r.size(); ++k) {
    total.push_back(r.energy[k] + 0.5 * r.phi[k].dot(arm_outer().K_phi * r.phi[k]));
  }
  const double scale = *std::max_element(total.begin(), total.end());
  for (std::size_t k = 1; k < total.size(); ++k) ASSERT_LE(total[k] - total[k - 1], 1e-9 * scale) << r.t[k];
  EXPECT_LT(total.back(), 0.5 * total.front());
}

TEST(SimulateCoupled, MatchesMatrixExponential) {
  const auto lp = paper_plant();
  const auto gs = gains_from_feedback(lp, s1(0.9), s1(4.0));
  const OuterLoop outer{s1(100.0), s1(10.0), Vec::Zero(1), false};
  const EnvironmentImpedance env{s1(1.0), s1(2.0), s1(50.0)};
  Scenario sc;
  sc.plant = linear_plant(lp);
  sc.controller = Controller::linear(gs, outer);
  sc.environment = env;
  sc.initial = OpenLoopState{s1(0.1).col(0), s1(0.1).col(0), s1(0.6).col(0), Vec::Zero(1)};
  sc.horizon = 1.0;
  const auto r = simulate_coupled(sc);

  const auto ss = assemble_coupled(lp, gs.shaped, env, outer);
  Eigen::EigenSolver<Mat> es(ss.A);
  const CMat V = es.eigenvectors();
  const CVec lambda = es.eigenvalues();
  const double merged = (lp.M(0, 0) + env.M_h(0, 0)) / lp.M(0, 0);
  Vec y0(4);
  y0 << r.q[0](0), r.phi[0](0), merged * r.p[0](0), r.z[0](0);
  const CVec c = V.partialPivLu().solve(y0.cast<Complex>());
  double worst = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < r.size(); k += 50) {
    const CVec e = (lambda * r.t[k]).array().exp();
    const Vec y = (V * e.cwiseProduct(c)).real();
    worst = std::max({worst, std::abs(y(0) - r.q[k](0)), std::abs(y(1) - r.phi[k](0)), std::abs(y(3) - r.z[k](0))});
    scale = std::max(scale, std::abs(y(0)));
  }
  EXPECT_LE(worst, 1e-6 * scale);
}

TEST(SimulateCoupled, RejectsSingularMergedMass) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  EXPECT_THROW(simulate_coupled(sc), Error);
  sc.environment = EnvironmentImpedance{s1(-3.0), s1(0.0), s1(0.0)};
  EXPECT_THROW(simulate_coupled(sc), Error);
}

TEST(ArmStep, SettlesNearTheShapedEquilibrium) {
  const auto m = arm();
  const auto sp = synthesize_gains(*m, Vec::Zero(2), m->J(), 2.0 * m->K()).shaped;
  Scenario sc;
  sc.plant = m;
  sc.controller = Controller::nonlinear(sp, arm_outer());
  sc.input = InputSignal::step(10.0, 1, 0.0);
  sc.horizon = 3.0;
  const auto r = simulate_plant_with_controller(sc);
  // Static balance: K_phi phi = tau_e and K_e (q - phi) = tau_e.
  const Vec tau = (Vec(2) << 0.0, 10.0).finished();
  const Vec phi = arm_outer().K_phi.ldlt().solve(tau);
  const Vec q = phi + sp.K_e.ldlt().solve(tau);
  EXPECT_LE((r.phi.back() - phi).norm(), 1e-3 * phi.norm());
  EXPECT_LE((r.q.back() - q).norm(), 2e-3 * q.norm());
  EXPECT_TRUE(r.tau.back().allFinite());
  EXPECT_LE(passivity_audit(r), 1e-6 * *std::max_element(r.energy.begin(), r.energy.end()));
}

TEST(ArmStep, SmallerMotorInertiaTracksTheTargetBetter) {
  const auto m = arm();
  const TargetDynamics target{1000.0 * Mat::Identity(2, 2), 135.0 * Mat::Identity(2, 2), Vec::Zero(2)};
  Scenario sc;
  sc.plant = m;
  sc.input = InputSignal::step(10.0, 1, 0.0);
  sc.horizon = 1.0;
  sc.dt = 1e-4;
  double previous = std::numeric_limits<double>::infinity();
  for (double scale : {1.0, 0.5, 0.25}) {
    const auto sp = synthesize_gains(*m, Vec::Zero(2), scale * m->J(), 2.0 * m->K()).shaped;
    sc.controller = Controller::nonlinear(sp, arm_outer());
    const auto r = simulate_plant_with_controller(sc);
    Scenario tsc = sc;
    tsc.dt = r.dt;
    const auto t = simulate_target(tsc, target);
    ASSERT_EQ(t.q.size(), r.q.size());
    const double d = l2_distance(r.t, component(r.q, 1), component(t.q, 1));
    EXPECT_LT(d, previous) << scale;
    previous = d;
  }
}

TEST(SimulateTarget, SpringMassAnalytic) {
  Scenario sc;
  sc.plant = linear_plant(paper_plant());
  sc.input = InputSignal::step(3.0, 0, 0.0);
  sc.horizon = 1.0;
  sc.dt = 1e-3;
  const TargetDynamics target{s1(12.0), s1(0.0), Vec::Zero(1)};
  const auto run = simulate_target(sc, target);
  // 3 qddot + 12 q = 3: q = (1 - cos 2t) / 4.
  EXPECT_NEAR(run.q.back()(0), 0.25 * (1.0 - std::cos(2.0)), 1e-9);
}

TEST(L2Distance, TrapezoidalRule) {
  const std::vector<double> t{0.0, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(l2_distance(t, {0.0, 1.0, 0.0}, {0.0, 0.0, 0.0}), 1.0);
  EXPECT_THROW(l2_distance(t, {0.0}, {0.0, 0.0, 0.0}), Error);
}

}  // namespace
}  // namespace fjic
