#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fjic/config.hpp"

namespace fjic {

enum ExitCode : int { kExitOk = 0, kExitDivergence = 1, kExitInfeasible = 2, kExitVerification = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Divergence: return kExitDivergence;
    case ErrorKind::Verification: return kExitVerification;
    default: return kExitInfeasible;
  }
}

/// Fixed 17-significant-digit formatting used in every emitted file.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Short form for identifiers such as "KF=0.9_KG=4".
inline std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) raise(ErrorKind::Configuration, "cannot write '" + path.string() + "'");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

/// Runs fn(i) for every index on separate threads and returns the results in
/// index order.
template <typename Fn>
auto parallel_map(std::size_t count, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<std::future<decltype(fn(std::size_t{}))>> jobs;
  jobs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) jobs.push_back(std::async(std::launch::async, fn, i));
  std::vector<decltype(fn(std::size_t{}))> out;
  out.reserve(count);
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

// ---------------------------------------------------------------------------
// Controller construction

/// Configuration at which configuration-dependent gains are synthesized.
inline Vec operating_point(const ExperimentConfig& c) {
  return c.sim.initial_q ? *c.sim.initial_q : Vec::Zero(c.plant.n());
}

inline const ControllerConfig& need_controller(const ExperimentConfig& c) {
  if (!c.controller) raise(ErrorKind::Configuration, "this command needs a [controller] section");
  return *c.controller;
}

/// Gains and shaped parameters of the configured controller. `J_e_override`
/// replaces J_e in the shaped form (used by J_e sweeps).
inline GainSynthesis synthesize(const ExperimentConfig& c, const std::optional<Mat>& J_e_override = std::nullopt) {
  const auto& cc = need_controller(c);
  const auto model = c.plant.model();
  const Vec q0 = operating_point(c);
  const Mat M = model.mass_of(q0);
  if (cc.shaped_form()) return synthesize_gains(M, model.J(), model.K(), model.D(), J_e_override.value_or(*cc.J_e), *cc.K_e);
  if (J_e_override) raise(ErrorKind::Configuration, "a J_e sweep needs the controller in shaped form (J_e, K_e)");
  GainSynthesis gs;
  gs.shaped = recover_shaped(M, model.J(), model.K(), model.D(), *cc.K_F, *cc.K_G);
  const Mat I = Mat::Identity(c.plant.n(), c.plant.n());
  gs.gains = {*cc.K_F, *cc.K_G, cc.K_H.value_or(*cc.K_F + *cc.K_G + I)};
  return gs;
}

inline const LinearRobotParams& need_linear_1dof(const ExperimentConfig& c, const char* what) {
  if (c.plant.kind != PlantConfig::Kind::Linear || c.plant.n() != 1) {
    raise(ErrorKind::NotApplicable, std::string(what) + " needs a linear plant with n = 1");
  }
  return c.plant.linear;
}

struct SweepMember {
  std::string id;
  double K_F = 0.0;
  double K_G = 0.0;
  ShapedParams shaped;
};

/// The K_F x K_G grid of the sweep (K_F outer, K_G inner), or the single
/// configured controller.
inline std::vector<SweepMember> gain_sweep(const ExperimentConfig& c) {
  const auto& lp = need_linear_1dof(c, "a gain sweep");
  std::vector<SweepMember> out;
  if (c.sweep && !c.sweep->K_F.empty()) {
    for (double kf : c.sweep->K_F) {
      for (double kg : c.sweep->K_G) {
        SweepMember m{"KF=" + short_num(kf) + "_KG=" + short_num(kg), kf, kg, {}};
        m.shaped = recover_shaped(lp, Mat::Constant(1, 1, kf), Mat::Constant(1, 1, kg));
        out.push_back(std::move(m));
      }
    }
    return out;
  }
  const auto gs = synthesize(c);
  out.push_back({"controller", gs.gains.K_F(0, 0), gs.gains.K_G(0, 0), gs.shaped});
  return out;
}

inline const TargetImpedance& need_target(const ExperimentConfig& c) {
  if (!c.target) raise(ErrorKind::Configuration, "this command needs a [target] section with M_d, K_d, D_d");
  return *c.target;
}

// ---------------------------------------------------------------------------
// synth

struct SynthReport {
  GainSynthesis synthesis;
  std::optional<OpenInterval> interval;
  std::string text;
};

inline SynthReport synth_report(const ExperimentConfig& c) {
  using config_detail::fmt;
  SynthReport r;
  r.synthesis = synthesize(c);
  const auto& g = r.synthesis.gains;
  const auto& sp = r.synthesis.shaped;
  std::ostringstream out;
  out << "K_F = " << fmt(g.K_F) << "\nK_G = " << fmt(g.K_G) << "\nK_H = " << fmt(g.K_H) << "\nJ_e = " << fmt(sp.J_e)
      << "\nK_e = " << fmt(sp.K_e) << "\nD_e = " << fmt(sp.D_e) << "\nadmissible = true\n";
  out << "damping = " << (sp.damping_semidefinite ? "semidefinite" : "definite") << "\n";
  const auto model = c.plant.model();
  const Vec q0 = operating_point(c);
  out << "gain_inconsistency = " << num(gain_inconsistency(g, sp, model.mass_of(q0), model.J(), model.K())) << "\n";
  if (c.plant.n() == 1 && c.plant.kind == PlantConfig::Kind::Linear) {
    r.interval = colgate_interval(c.plant.linear);
    out << "K_F_interval = (" << num(r.interval->lower) << ", " << num(r.interval->upper) << ")\n";
  }
  r.text = out.str();
  return r;
}

// ---------------------------------------------------------------------------
// bode

struct BodeSystem {
  std::string id;
  double K_F = 0.0, K_G = 0.0;
  std::vector<double> omega, mag_db, phase_deg;
  double err = 0.0;  // max |mag_dB - mag_dB(Y_d)|
};

struct BodeStudy {
  std::vector<BodeSystem> systems;  // sweep members followed by the target

  const BodeSystem& find(double kf, double kg) const {
    for (const auto& s : systems)
      if (s.id != "target" && s.K_F == kf && s.K_G == kg) return s;
    raise(ErrorKind::Configuration, "no Bode system for K_F = " + num(kf) + ", K_G = " + num(kg));
  }
};

namespace experiments_detail {

inline void unwrap_phase(std::vector<double>& phase) {
  for (std::size_t k = 1; k < phase.size(); ++k) {
    while (phase[k] - phase[k - 1] > 180.0) phase[k] -= 360.0;
    while (phase[k] - phase[k - 1] < -180.0) phase[k] += 360.0;
  }
}

inline BodeSystem bode_of(std::string id, const std::vector<FrequencySample>& samples) {
  BodeSystem b;
  b.id = std::move(id);
  for (const auto& s : samples) {
    if (s.infinite) raise(ErrorKind::NotApplicable, "pole on the imaginary axis at w = " + num(s.omega) + " in " + b.id);
    b.omega.push_back(s.omega);
    b.mag_db.push_back(s.mag_db);
    b.phase_deg.push_back(s.phase_deg);
  }
  unwrap_phase(b.phase_deg);
  return b;
}

}  // namespace experiments_detail

inline std::vector<double> frequency_grid(const ExperimentConfig& c) { return log_grid(c.grid.lo, c.grid.hi, c.grid.points); }

inline BodeStudy bode_study(const ExperimentConfig& c) {
  const auto& lp = need_linear_1dof(c, "bode");
  const auto& target = need_target(c);
  const auto grid = frequency_grid(c);
  const auto members = gain_sweep(c);
  auto target_sys = experiments_detail::bode_of("target", freq_response(target_admittance(target), grid));
  BodeStudy study;
  study.systems = parallel_map(members.size(), [&](std::size_t i) {
    const auto& m = members[i];
    const auto ss = assemble_closed_loop(lp, m.shaped, c.outer);
    auto b = experiments_detail::bode_of(m.id, freq_response(ss, 0, 0, grid));
    b.K_F = m.K_F;
    b.K_G = m.K_G;
    for (std::size_t k = 0; k < grid.size(); ++k) b.err = std::max(b.err, std::abs(b.mag_db[k] - target_sys.mag_db[k]));
    return b;
  });
  study.systems.push_back(std::move(target_sys));
  return study;
}

inline void write_bode_csv(const BodeStudy& study, const std::filesystem::path& path) {
  CsvWriter csv(path, {"system_id", "omega_rad_s", "mag_db", "phase_deg", "err"});
  for (const auto& s : study.systems) {
    for (std::size_t k = 0; k < s.omega.size(); ++k) {
      csv.row({s.id, num(s.omega[k]), num(s.mag_db[k]), num(s.phase_deg[k]), num(s.err)});
    }
  }
}

// ---------------------------------------------------------------------------
// pzmap

struct PzSystem {
  std::string id;
  double K_F = 0.0, K_G = 0.0;
  std::vector<Complex> poles, zeros;
  Complex dominant;        // upper member of the smallest-modulus pole pair
  double distance = 0.0;   // to the upper target pole
};

struct PzStudy {
  std::vector<PzSystem> systems;  // sweep members followed by the target

  const PzSystem& find(double kf, double kg) const {
    for (const auto& s : systems)
      if (s.id != "target" && s.K_F == kf && s.K_G == kg) return s;
    raise(ErrorKind::Configuration, "no pole-zero system for K_F = " + num(kf) + ", K_G = " + num(kg));
  }
};

namespace experiments_detail {

inline bool complex_less(const Complex& a, const Complex& b) {
  return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
}

inline Complex dominant_pole(const std::vector<Complex>& poles) {
  if (poles.empty()) raise(ErrorKind::NotApplicable, "system has no poles");
  Complex best = poles.front();
  for (const auto& p : poles) {
    if (std::abs(p) < std::abs(best) || (std::abs(p) == std::abs(best) && p.imag() > best.imag())) best = p;
  }
  return Complex(best.real(), std::abs(best.imag()));
}

inline PzSystem pz_of(std::string id, const RationalTF& tf, Complex target_pole) {
  const auto pz = poles_zeros(tf);
  PzSystem s;
  s.id = std::move(id);
  s.poles = pz.poles;
  s.zeros = pz.zeros;
  std::sort(s.poles.begin(), s.poles.end(), complex_less);
  std::sort(s.zeros.begin(), s.zeros.end(), complex_less);
  s.dominant = dominant_pole(s.poles);
  s.distance = std::abs(s.dominant - target_pole);
  return s;
}

}  // namespace experiments_detail

inline PzStudy pz_study(const ExperimentConfig& c) {
  const auto& lp = need_linear_1dof(c, "pzmap");
  const auto target_tf = target_admittance(need_target(c));
  const Complex target_pole = experiments_detail::dominant_pole(polynomial_roots(target_tf.den));
  const auto members = gain_sweep(c);
  PzStudy study;
  study.systems = parallel_map(members.size(), [&](std::size_t i) {
    const auto& m = members[i];
    const auto tf = cancel_common_factors(ss_to_tf(assemble_closed_loop(lp, m.shaped, c.outer), 0, 0));
    auto s = experiments_detail::pz_of(m.id, tf, target_pole);
    s.K_F = m.K_F;
    s.K_G = m.K_G;
    return s;
  });
  study.systems.push_back(experiments_detail::pz_of("target", target_tf, target_pole));
  return study;
}

inline void write_pzmap_csv(const PzStudy& study, const std::filesystem::path& path) {
  CsvWriter csv(path, {"system_id", "kind", "re", "im"});
  for (const auto& s : study.systems) {
    for (const auto& p : s.poles) csv.row({s.id, "pole", num(p.real()), num(p.imag())});
    for (const auto& z : s.zeros) csv.row({s.id, "zero", num(z.real()), num(z.imag())});
  }
}

inline void write_pzmap_summary_csv(const PzStudy& study, const std::filesystem::path& path) {
  CsvWriter csv(path, {"system_id", "dominant_re", "dominant_im", "distance_to_target"});
  for (const auto& s : study.systems) csv.row({s.id, num(s.dominant.real()), num(s.dominant.imag()), num(s.distance)});
}

// ---------------------------------------------------------------------------
// simulate

/// Link positions from the configuration, joints unloaded, motors moving with
/// the links.
inline OpenLoopState initial_state(const ExperimentConfig& c, const NonlinearRobotModel& m) {
  const auto n = m.n();
  const Vec q = c.sim.initial_q.value_or(Vec::Zero(n));
  const Vec qdot = c.sim.initial_qdot.value_or(Vec::Zero(n));
  return {q, q, m.mass_of(q) * qdot, m.J() * qdot};
}

inline Scenario build_scenario(const ExperimentConfig& c, const std::optional<Mat>& J_e_override = std::nullopt) {
  Scenario sc;
  sc.plant = std::make_shared<const NonlinearRobotModel>(c.plant.model());
  if (c.controller) {
    const auto gs = synthesize(c, J_e_override);
    sc.controller = c.controller->law == ControlLaw::Linear ? Controller::linear(gs, c.outer)
                                                            : Controller::nonlinear(gs.shaped, c.outer);
  } else if (c.outer) {
    raise(ErrorKind::Configuration, "an outer loop needs a [controller] section");
  }
  sc.environment = c.environment;
  sc.input = c.sim.input;
  sc.horizon = c.sim.horizon;
  sc.dt = c.sim.dt;
  sc.initial = initial_state(c, *sc.plant);
  return sc;
}

inline SimResult run_scenario(const Scenario& sc) {
  return sc.environment ? simulate_coupled(sc) : simulate_plant_with_controller(sc);
}

inline std::vector<std::string> sim_header(Eigen::Index n) {
  std::vector<std::string> h{"t"};
  for (const char* block : {"q", "phi", "p", "z", "tau", "tau_e", "tau_u"}) {
    for (Eigen::Index i = 0; i < n; ++i) h.push_back(std::string(block) + "_" + std::to_string(i + 1));
  }
  for (const char* col : {"H", "supply", "passivity_residual"}) h.emplace_back(col);
  return h;
}

inline void write_sim_csv(const SimResult& r, Eigen::Index n, const std::filesystem::path& path) {
  CsvWriter csv(path, sim_header(n));
  for (std::size_t k = 0; k < r.size(); ++k) {
    std::vector<std::string> row{num(r.t[k])};
    for (const auto* series : {&r.q, &r.phi, &r.p, &r.z, &r.tau, &r.tau_e, &r.tau_u}) {
      for (Eigen::Index i = 0; i < n; ++i) row.push_back(num((*series)[k](i)));
    }
    row.push_back(num(r.energy[k]));
    row.push_back(num(r.supply[k]));
    row.push_back(num(r.passivity_residual[k]));
    csv.row(row);
  }
}

inline void write_target_csv(const TargetRun& run, Eigen::Index n, const std::filesystem::path& path) {
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("q_" + std::to_string(i + 1));
  CsvWriter csv(path, header);
  for (std::size_t k = 0; k < run.t.size(); ++k) {
    std::vector<std::string> row{num(run.t[k])};
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(num(run.q[k](i)));
    csv.row(row);
  }
}

struct SimRun {
  std::string id;
  double J_e_scale = 1.0;
  SimResult result;
  std::optional<TargetRun> target;
  std::vector<double> l2_to_target;  // per joint
  double audit = 0.0;
  double max_energy = 0.0;
  double max_torque_jump = 0.0;  // largest |tau_k - tau_{k-1}| after the input step
  double torque_scale = 0.0;     // max |tau| after the input step
  std::optional<std::string> failure;
};

struct SimStudy {
  Eigen::Index n = 0;
  std::vector<SimRun> runs;
};

namespace experiments_detail {

inline void torque_stats(SimRun& run, double settle_from) {
  const auto& r = run.result;
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (r.t[k - 1] < settle_from) continue;
    run.max_torque_jump = std::max(run.max_torque_jump, (r.tau[k] - r.tau[k - 1]).cwiseAbs().maxCoeff());
    run.torque_scale = std::max(run.torque_scale, r.tau[k].cwiseAbs().maxCoeff());
  }
}

}  // namespace experiments_detail

/// One run per J_e scale when the sweep lists them, otherwise a single run.
/// Divergent runs keep their partial series and record the failure.
inline SimStudy sim_study(const ExperimentConfig& c) {
  SimStudy study;
  study.n = c.plant.n();
  std::vector<double> scales{1.0};
  const bool sweep = c.sweep && !c.sweep->J_e_scale.empty();
  if (sweep) scales = c.sweep->J_e_scale;
  const auto model = c.plant.model();
  study.runs = parallel_map(scales.size(), [&](std::size_t i) {
    SimRun run;
    run.J_e_scale = scales[i];
    run.id = sweep ? "Je_scale=" + short_num(scales[i]) : "run";
    const auto sc = build_scenario(c, sweep ? std::optional<Mat>(scales[i] * model.J()) : std::nullopt);
    try {
      run.result = run_scenario(sc);
    } catch (const SimulationDiverged& e) {
      run.result = e.partial();
      run.failure = e.what();
      return run;
    }
    const auto& r = run.result;
    run.audit = passivity_audit(r);
    run.max_energy = *std::max_element(r.energy.begin(), r.energy.end());
    const double settle = sc.input.kind == InputSignal::Kind::Step ? sc.input.start_time + r.dt : 0.0;
    experiments_detail::torque_stats(run, settle);
    if (c.target_dynamics) {
      Scenario tsc = sc;
      tsc.dt = r.dt;
      run.target = simulate_target(tsc, *c.target_dynamics);
      for (Eigen::Index j = 0; j < study.n; ++j) {
        run.l2_to_target.push_back(l2_distance(r.t, component(r.q, j), component(run.target->q, j)));
      }
    }
    return run;
  });
  return study;
}

// ---------------------------------------------------------------------------
// verify

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace experiments_detail {

template <typename Fn>
CheckResult check(const std::string& name, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return {name, false, e.what()};
  }
}

}  // namespace experiments_detail

inline VerifyReport verify_report(const ExperimentConfig& c) {
  using experiments_detail::check;
  VerifyReport rep;
  const auto model = c.plant.model();
  const auto n = model.n();
  const auto gs = synthesize(c);
  const Vec q0 = operating_point(c);
  const Mat M0 = model.mass_of(q0);

  rep.checks.push_back(check("gain_consistency", [&] {
    const double d = gain_inconsistency(gs.gains, gs.shaped, M0, model.J(), model.K());
    return CheckResult{"gain_consistency", d <= 1e-10, "relative mismatch " + num(d)};
  }));

  rep.checks.push_back(check("round_trip", [&] {
    const auto back = recover_shaped(M0, model.J(), model.K(), model.D(), gs.gains.K_F, gs.gains.K_G);
    const auto again = synthesize_gains(M0, model.J(), model.K(), model.D(), back.J_e, back.K_e);
    const double d = std::max({relative_difference(back.J_e, gs.shaped.J_e), relative_difference(back.K_e, gs.shaped.K_e),
                               relative_difference(again.gains.K_F, gs.gains.K_F),
                               relative_difference(again.gains.K_G, gs.gains.K_G)});
    return CheckResult{"round_trip", d <= 1e-10, "relative difference " + num(d)};
  }));

  rep.checks.push_back(check("equivalence", [&] {
    std::mt19937 rng(c.verify.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto draw = [&](double scale) {
      Vec v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * u(rng);
      return v;
    };
    const bool constant = model.has_constant_mass();
    double worst = 0.0;
    for (int k = 0; k < c.verify.samples; ++k) {
      const Vec q = draw(1.0);
      const OpenLoopState x{q, q + draw(1e-3), model.mass_of(q) * draw(1.0), model.J() * draw(1.0)};
      const ImpedanceGains g = constant ? gs.gains : gains_at(model, gs.shaped, q);
      const auto res = equivalence_residual(x, draw(10.0), draw(10.0), g, gs.shaped, model,
                                            constant ? ControlLaw::Linear : ControlLaw::Nonlinear);
      worst = std::max(worst, res.relative);
    }
    return CheckResult{"equivalence", worst <= 1e-8,
                       std::to_string(c.verify.samples) + " samples, max relative residual " + num(worst)};
  }));

  rep.checks.push_back(check("passivity_audit", [&] {
    Scenario sc = build_scenario(c);
    if (sc.input.kind == InputSignal::Kind::Zero) sc.input = InputSignal::step(1.0, 0, 0.0);
    sc.horizon = std::min(sc.horizon, 1.0);
    const auto r = run_scenario(sc);
    const double scale = *std::max_element(r.energy.begin(), r.energy.end());
    const double a = passivity_audit(r);
    return CheckResult{"passivity_audit", a <= 1e-6 * scale, "max violation " + num(a) + " J, max H " + num(scale) + " J"};
  }));

  if (c.plant.kind == PlantConfig::Kind::Linear && n == 1) {
    rep.checks.push_back(check("positive_real", [&] {
      const auto tf = cancel_common_factors(ss_to_tf(assemble_closed_loop(c.plant.linear, gs.shaped, c.outer), 0, 0));
      const auto pr = positive_real_check(tf, frequency_grid(c));
      return CheckResult{"positive_real", pr.verdict == PassivityVerdict::Passive,
                         std::string(to_string(pr.verdict)) + ": " + pr.reason};
    }));
  }
  return rep;
}

inline std::string format_verify(const VerifyReport& rep) {
  std::string out;
  for (const auto& c : rep.checks) out += std::string(c.passed ? "PASS " : "FAIL ") + c.name + " " + c.detail + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Paper studies

/// Single-joint plant of the frequency study with the 3 x 3 gain grid.
inline ExperimentConfig paper_1dof_config() {
  ExperimentConfig c;
  c.name = "paper-1dof";
  c.plant.linear = LinearRobotParams::scalar(3.0, 3.0, 1e6, 1.0);
  ControllerConfig cc;
  cc.K_F = Mat::Constant(1, 1, 0.9);
  cc.K_G = Mat::Constant(1, 1, 4.0);
  c.controller = cc;
  c.outer = OuterLoop{Mat::Constant(1, 1, 100.0), Mat::Constant(1, 1, 10.0), Vec::Zero(1), false};
  c.target = TargetImpedance{Mat::Constant(1, 1, 3.0), Mat::Constant(1, 1, 10.0), Mat::Constant(1, 1, 100.0)};
  c.sweep = SweepConfig{{-0.9, 0.0, 0.9}, {0.0, 1.0, 4.0}, {}};
  c.sim.horizon = 2.0;
  c.sim.input = InputSignal::step(1.0, 0, 0.0);
  return c;
}

/// Two-link arm with a 10 N m step on joint 2 and the J_e sweep {J, J/2, J/4}.
inline ExperimentConfig paper_arm_config() {
  ExperimentConfig c;
  c.name = "paper-arm";
  c.plant.kind = PlantConfig::Kind::TwoLink;
  const auto model = two_link_arm(c.plant.arm);
  ControllerConfig cc;
  cc.law = ControlLaw::Nonlinear;
  cc.J_e = model.J();
  cc.K_e = 2.0 * model.K();
  c.controller = cc;
  const Mat I = Mat::Identity(2, 2);
  c.outer = OuterLoop{1000.0 * I, 135.0 * I, Vec::Zero(2), false};
  c.target_dynamics = TargetDynamics{1000.0 * I, 135.0 * I, Vec::Zero(2)};
  c.sweep = SweepConfig{{}, {}, {1.0, 0.5, 0.25}};
  c.sim.horizon = 2.0;
  c.sim.input = InputSignal::step(10.0, 1, 0.0);
  return c;
}

struct OrderingCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Bode-error orderings: non-increasing in K_G at every K_F, and K_F = 0.9
/// no worse than K_F = -0.9 at every K_G.
inline std::vector<OrderingCheck> bode_orderings(const BodeStudy& b, const SweepConfig& sw) {
  std::vector<OrderingCheck> out;
  for (double kf : sw.K_F) {
    bool ok = true;
    std::string detail;
    for (std::size_t j = 0; j < sw.K_G.size(); ++j) {
      const double e = b.find(kf, sw.K_G[j]).err;
      detail += (j ? " >= " : "") + short_num(e);
      if (j && e > b.find(kf, sw.K_G[j - 1]).err) ok = false;
    }
    out.push_back({"bode_err_nonincreasing_in_KG_at_KF=" + short_num(kf), ok, detail});
  }
  const double lo = *std::min_element(sw.K_F.begin(), sw.K_F.end());
  const double hi = *std::max_element(sw.K_F.begin(), sw.K_F.end());
  for (double kg : sw.K_G) {
    const double a = b.find(hi, kg).err, z = b.find(lo, kg).err;
    out.push_back({"bode_err_KF=" + short_num(hi) + "_le_KF=" + short_num(lo) + "_at_KG=" + short_num(kg), a <= z,
                   short_num(a) + " <= " + short_num(z)});
  }
  return out;
}

/// Dominant-pole distance to the target poles is non-increasing whenever K_F
/// or K_G steps up along the grid.
inline std::vector<OrderingCheck> pz_orderings(const PzStudy& p, const SweepConfig& sw) {
  bool ok = true;
  std::string worst;
  for (std::size_t i = 0; i < sw.K_F.size(); ++i) {
    for (std::size_t j = 0; j < sw.K_G.size(); ++j) {
      const double d = p.find(sw.K_F[i], sw.K_G[j]).distance;
      const auto compare = [&](double kf, double kg) {
        const double next = p.find(kf, kg).distance;
        if (next > d) {
          ok = false;
          worst = "(" + short_num(kf) + ", " + short_num(kg) + ") farther than (" + short_num(sw.K_F[i]) + ", " +
                  short_num(sw.K_G[j]) + ")";
        }
      };
      if (i + 1 < sw.K_F.size()) compare(sw.K_F[i + 1], sw.K_G[j]);
      if (j + 1 < sw.K_G.size()) compare(sw.K_F[i], sw.K_G[j + 1]);
    }
  }
  const double first = p.find(sw.K_F.front(), sw.K_G.front()).distance;
  const double last = p.find(sw.K_F.back(), sw.K_G.back()).distance;
  return {{"pz_distance_nonincreasing_along_grid", ok,
           ok ? short_num(first) + " -> " + short_num(last) : worst}};
}

/// L2 distance of the last joint to the target strictly decreases as J_e shrinks.
inline std::vector<OrderingCheck> sim_orderings(const SimStudy& s) {
  std::vector<const SimRun*> runs;
  for (const auto& r : s.runs) runs.push_back(&r);
  std::sort(runs.begin(), runs.end(), [](const SimRun* a, const SimRun* b) { return a->J_e_scale > b->J_e_scale; });
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i]->l2_to_target.empty()) return {{"l2_to_target_decreasing_as_Je_shrinks", false, "no target dynamics"}};
    const double d = runs[i]->l2_to_target.back();
    detail += (i ? " > " : "") + short_num(d);
    if (i && !(d < runs[i - 1]->l2_to_target.back())) ok = false;
  }
  return {{"l2_to_target_decreasing_as_Je_shrinks", ok, detail}};
}

inline void write_summary_csv(const std::vector<OrderingCheck>& checks, const std::filesystem::path& path) {
  CsvWriter csv(path, {"check", "passed", "detail"});
  for (const auto& c : checks) csv.row({c.name, c.passed ? "true" : "false", "\"" + c.detail + "\""});
}

// ---------------------------------------------------------------------------
// Commands: each writes its artifacts into `out` and returns the exit code.

namespace experiments_detail {

template <typename Fn>
int guarded(std::ostream& err, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

inline std::filesystem::path prepare(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) raise(ErrorKind::Configuration, "cannot create output directory '" + out.string() + "': " + ec.message());
  return out;
}

inline int write_sim_study(const SimStudy& study, const std::filesystem::path& dir, std::ostream& log) {
  const bool sweep = study.runs.size() > 1 || study.runs.front().id != "run";
  int code = kExitOk;
  CsvWriter summary(dir / "sim_summary.csv", {"run_id", "J_e_scale", "l2_to_target_last_joint", "passivity_violation",
                                              "max_H", "max_torque_jump", "torque_scale", "status"});
  for (const auto& run : study.runs) {
    const std::string file = sweep ? "sim_" + run.id + ".csv" : "sim.csv";
    write_sim_csv(run.result, study.n, dir / file);
    if (run.target) write_target_csv(*run.target, study.n, dir / (sweep ? "target_" + run.id + ".csv" : "target.csv"));
    summary.row({run.id, num(run.J_e_scale), run.l2_to_target.empty() ? "" : num(run.l2_to_target.back()),
                 num(run.audit), num(run.max_energy), num(run.max_torque_jump), num(run.torque_scale),
                 run.failure ? "diverged" : "ok"});
    if (run.failure) {
      log << "error: " << run.id << ": " << *run.failure << "\n";
      code = kExitDivergence;
    }
  }
  return code;
}

}  // namespace experiments_detail

inline int run_synth(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
  return experiments_detail::guarded(log, [&] {
    const auto rep = synth_report(c);
    const auto dir = experiments_detail::prepare(out);
    std::ofstream(dir / "synth.txt") << rep.text;
    std::cout << rep.text;
    return static_cast<int>(kExitOk);
  });
}

inline int run_bode(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
  return experiments_detail::guarded(log, [&] {
    const auto study = bode_study(c);
    write_bode_csv(study, experiments_detail::prepare(out) / "bode.csv");
    for (const auto& s : study.systems) std::cout << s.id << " err_db=" << num(s.err) << "\n";
    return static_cast<int>(kExitOk);
  });
}

inline int run_pzmap(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
  return experiments_detail::guarded(log, [&] {
    const auto study = pz_study(c);
    const auto dir = experiments_detail::prepare(out);
    write_pzmap_csv(study, dir / "pzmap.csv");
    write_pzmap_summary_csv(study, dir / "pzmap_summary.csv");
    for (const auto& s : study.systems) std::cout << s.id << " distance=" << num(s.distance) << "\n";
    return static_cast<int>(kExitOk);
  });
}

inline int run_simulate(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
  return experiments_detail::guarded(log, [&] {
    const auto study = sim_study(c);
    const int code = experiments_detail::write_sim_study(study, experiments_detail::prepare(out), log);
    for (const auto& r : study.runs) {
      std::cout << r.id << " steps=" << r.result.size() - 1 << " dt=" << num(r.result.dt);
      if (!r.l2_to_target.empty()) std::cout << " l2_to_target=" << num(r.l2_to_target.back());
      std::cout << "\n";
    }
    return code;
  });
}

inline int run_verify(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log) {
  return experiments_detail::guarded(log, [&] {
    const auto rep = verify_report(c);
    const auto text = format_verify(rep);
    std::ofstream(experiments_detail::prepare(out) / "verify.txt") << text;
    std::cout << text;
    return static_cast<int>(rep.passed() ? kExitOk : kExitVerification);
  });
}

/// Frequency and pole-zero studies on the single joint, then the J_e sweep on
/// the arm. Writes bode.csv, pzmap.csv, pzmap_summary.csv, the arm series and
/// summary.csv with every ordering check.
inline int reproduce_paper(const std::filesystem::path& out, std::ostream& log, const std::optional<int>& grid_points = {},
                           const std::optional<double>& horizon = {}) {
  return experiments_detail::guarded(log, [&] {
    const auto dir = experiments_detail::prepare(out);
    auto one = paper_1dof_config();
    if (grid_points) one.grid.points = *grid_points;
    auto arm = paper_arm_config();
    if (horizon) arm.sim.horizon = *horizon;

    auto bode = std::async(std::launch::async, [&] { return bode_study(one); });
    auto pz = std::async(std::launch::async, [&] { return pz_study(one); });
    auto sim = std::async(std::launch::async, [&] { return sim_study(arm); });
    const auto b = bode.get();
    const auto p = pz.get();
    const auto s = sim.get();

    write_bode_csv(b, dir / "bode.csv");
    write_pzmap_csv(p, dir / "pzmap.csv");
    write_pzmap_summary_csv(p, dir / "pzmap_summary.csv");
    const auto arm_dir = experiments_detail::prepare(dir / "arm");
    int code = experiments_detail::write_sim_study(s, arm_dir, log);

    std::vector<OrderingCheck> checks;
    checks.push_back({"bode_system_count", b.systems.size() == 10, std::to_string(b.systems.size()) + " systems"});
    for (auto& c : bode_orderings(b, *one.sweep)) checks.push_back(std::move(c));
    for (auto& c : pz_orderings(p, *one.sweep)) checks.push_back(std::move(c));
    for (auto& c : sim_orderings(s)) checks.push_back(std::move(c));
    write_summary_csv(checks, dir / "summary.csv");
    for (const auto& c : checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " " << c.detail << "\n";
    const bool ok = std::all_of(checks.begin(), checks.end(), [](const OrderingCheck& c) { return c.passed; });
    if (code == kExitOk && !ok) code = kExitVerification;
    return code;
  });
}

}  // namespace fjic
