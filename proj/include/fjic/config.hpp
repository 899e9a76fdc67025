#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fjic/lti.hpp"
#include "fjic/sim.hpp"

namespace fjic {

struct PlantConfig {
  enum class Kind { Linear, TwoLink };
  Kind kind = Kind::Linear;
  LinearRobotParams linear;
  TwoLinkArmParams arm;

  Eigen::Index n() const { return kind == Kind::Linear ? linear.n() : 2; }

  NonlinearRobotModel model() const {
    return kind == Kind::Linear ? NonlinearRobotModel::from_linear(linear) : two_link_arm(arm);
  }
};

/// Either the shaped pair (J_e, K_e) or the feedback pair (K_F, K_G). K_H may
/// be given explicitly with the feedback pair; it defaults to K_F + K_G + I.
struct ControllerConfig {
  ControlLaw law = ControlLaw::Linear;
  std::optional<Mat> J_e, K_e, K_F, K_G, K_H;

  bool shaped_form() const { return J_e.has_value(); }
};

struct SweepConfig {
  std::vector<double> K_F, K_G, J_e_scale;
};

struct SimConfig {
  double dt = 0.0;
  double horizon = 1.0;
  InputSignal input;
  std::optional<Vec> initial_q, initial_qdot;
};

struct GridConfig {
  double lo = 1e-2;
  double hi = 1e3;
  int points = 400;
};

struct VerifyConfig {
  int samples = 200;
  unsigned seed = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PlantConfig plant;
  std::optional<ControllerConfig> controller;
  std::optional<OuterLoop> outer;
  std::optional<TargetImpedance> target;
  std::optional<TargetDynamics> target_dynamics;
  std::optional<EnvironmentImpedance> environment;
  std::optional<SweepConfig> sweep;
  SimConfig sim;
  GridConfig grid;
  VerifyConfig verify;
  std::string output_dir = "out";
};

namespace config_detail {

using boost::property_tree::ptree;

[[noreturn]] inline void fail(const std::string& what) { raise(ErrorKind::Configuration, what); }

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double number(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    fail(key + ": '" + t + "' is not a number");
  }
  if (used != t.size() || !std::isfinite(v)) fail(key + ": '" + t + "' is not a finite number");
  return v;
}

inline std::vector<double> number_list(std::string text, const std::string& key) {
  text = trim(text);
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') text = text.substr(1, text.size() - 2);
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(number(item, key));
  return out;
}

/// Accepts a scalar (times the identity), diag(a, b, ...) or [a, b; c, d].
inline Mat matrix(const std::string& raw, Eigen::Index n, const std::string& key) {
  const std::string text = trim(raw);
  if (text.rfind("diag(", 0) == 0) {
    if (text.back() != ')') fail(key + ": unterminated diag(...)");
    const auto d = number_list(text.substr(5, text.size() - 6), key);
    if (static_cast<Eigen::Index>(d.size()) != n) fail(key + ": expected " + std::to_string(n) + " diagonal entries");
    Mat m = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
  }
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') fail(key + ": unterminated matrix");
    const auto rows = split(text.substr(1, text.size() - 2), ';');
    if (static_cast<Eigen::Index>(rows.size()) != n) fail(key + ": expected " + std::to_string(n) + " rows");
    Mat m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto r = number_list(rows[i], key);
      if (static_cast<Eigen::Index>(r.size()) != n) fail(key + ": row " + std::to_string(i + 1) + " has the wrong length");
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = r[j];
    }
    return m;
  }
  return number(text, key) * Mat::Identity(n, n);
}

/// A single value is broadcast to every entry.
inline Vec vector(const std::string& raw, Eigen::Index n, const std::string& key) {
  const auto v = number_list(raw, key);
  if (v.size() == 1) return Vec::Constant(n, v[0]);
  if (static_cast<Eigen::Index>(v.size()) != n) fail(key + ": expected " + std::to_string(n) + " entries");
  return Eigen::Map<const Vec>(v.data(), n);
}

inline bool boolean(const std::string& raw, const std::string& key) {
  const std::string t = trim(raw);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  fail(key + ": expected true or false");
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

inline std::string fmt(const Vec& v) { return fmt(std::vector<double>(v.data(), v.data() + v.size())); }

inline std::string fmt(const Mat& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) s += "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (j ? ", " : "") + fmt(m(i, j));
  }
  return s + "]";
}

/// Key access with unknown-key detection.
class Section {
 public:
  Section(const ptree& tree, std::string name, std::set<std::string> allowed) : name_(std::move(name)) {
    for (const auto& [key, child] : tree) {
      if (!child.empty()) fail("[" + name_ + "] must not contain subsections");
      if (!allowed.count(key)) fail("[" + name_ + "] unknown key '" + key + "'");
      values_.emplace_back(key, child.data());
    }
  }

  std::optional<std::string> get(const std::string& key) const {
    std::optional<std::string> out;
    for (const auto& [k, v] : values_) {
      if (k != key) continue;
      if (out) fail("[" + name_ + "] duplicate key '" + key + "'");
      out = v;
    }
    return out;
  }

  std::string need(const std::string& key) const {
    auto v = get(key);
    if (!v) fail("[" + name_ + "] missing key '" + key + "'");
    return *v;
  }

  bool has(const std::string& key) const { return get(key).has_value(); }
  std::string label(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> values_;
};

inline const ptree* find(const ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

inline PlantConfig parse_plant(const ptree& root) {
  const ptree* t = find(root, "plant");
  if (!t) fail("missing [plant] section");
  const Section s(*t, "plant",
                  {"type", "n", "M", "J", "K", "D", "length1", "length2", "mass1", "mass2", "motor_inertia", "stiffness",
                   "damping", "gravity", "g"});
  PlantConfig p;
  const std::string type = trim(s.get("type").value_or("linear"));
  if (type == "linear") {
    const double nd = number(s.need("n"), s.label("n"));
    if (nd < 1 || nd != std::floor(nd)) fail("plant.n must be a positive integer");
    const auto n = static_cast<Eigen::Index>(nd);
    p.linear = {matrix(s.need("M"), n, s.label("M")), matrix(s.need("J"), n, s.label("J")),
                matrix(s.need("K"), n, s.label("K")), matrix(s.need("D"), n, s.label("D"))};
    for (const char* k : {"length1", "length2", "mass1", "mass2", "motor_inertia", "stiffness", "damping", "gravity", "g"}) {
      if (s.has(k)) fail(std::string("plant.") + k + " only applies to type = two_link");
    }
    p.linear.validate();
  } else if (type == "two_link") {
    p.kind = PlantConfig::Kind::TwoLink;
    for (const char* k : {"n", "M", "J", "K", "D"}) {
      if (s.has(k)) fail(std::string("plant.") + k + " only applies to type = linear");
    }
    auto& a = p.arm;
    if (auto v = s.get("length1")) a.length1 = number(*v, s.label("length1"));
    if (auto v = s.get("length2")) a.length2 = number(*v, s.label("length2"));
    if (auto v = s.get("mass1")) a.mass1 = number(*v, s.label("mass1"));
    if (auto v = s.get("mass2")) a.mass2 = number(*v, s.label("mass2"));
    if (auto v = s.get("motor_inertia")) a.motor_inertia = vector(*v, 2, s.label("motor_inertia"));
    if (auto v = s.get("stiffness")) a.stiffness = vector(*v, 2, s.label("stiffness"));
    if (auto v = s.get("damping")) a.damping = vector(*v, 2, s.label("damping"));
    if (auto v = s.get("gravity")) a.gravity = boolean(*v, s.label("gravity"));
    if (auto v = s.get("g")) a.g = number(*v, s.label("g"));
    two_link_arm(a);
  } else {
    fail("plant.type must be linear or two_link");
  }
  return p;
}

inline InputSignal parse_input(const Section& s, Eigen::Index n) {
  const std::string kind = trim(s.get("input").value_or("zero"));
  InputSignal in;
  if (kind == "zero") {
    for (const char* k : {"amplitude", "joint", "start", "frequency"}) {
      if (s.has(k)) fail(std::string("sim.") + k + " needs an input other than zero");
    }
    return in;
  }
  const double joint = number(s.get("joint").value_or("1"), s.label("joint"));
  if (joint < 1 || joint > static_cast<double>(n) || joint != std::floor(joint)) {
    fail("sim.joint must be an integer between 1 and " + std::to_string(n));
  }
  const double amp = number(s.need("amplitude"), s.label("amplitude"));
  const auto idx = static_cast<Eigen::Index>(joint) - 1;
  if (kind == "step") {
    if (s.has("frequency")) fail("sim.frequency only applies to input = sinusoid");
    return InputSignal::step(amp, idx, number(s.get("start").value_or("0"), s.label("start")));
  }
  if (kind == "sinusoid") {
    if (s.has("start")) fail("sim.start only applies to input = step");
    return InputSignal::sinusoid(amp, idx, number(s.need("frequency"), s.label("frequency")));
  }
  fail("sim.input must be zero, step or sinusoid");
}

}  // namespace config_detail

/// Parses the INI text of an experiment. Every error is a configuration error
/// naming the offending section and key.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace config_detail;
  ptree root;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(std::string("malformed configuration: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  const std::set<std::string> sections{"experiment", "plant", "controller", "outer", "target", "environment",
                                       "sweep", "sim", "grid", "verify"};
  for (const auto& [name, child] : root) {
    if (!sections.count(name)) fail("unknown section [" + name + "]");
    if (child.empty()) fail("[" + name + "] is empty or not a section");
  }

  ExperimentConfig c;
  if (const ptree* t = find(root, "experiment")) {
    const Section s(*t, "experiment", {"name", "output"});
    if (auto v = s.get("name")) c.name = trim(*v);
    if (auto v = s.get("output")) c.output_dir = trim(*v);
    if (c.name.empty()) fail("experiment.name must not be empty");
  }
  c.plant = parse_plant(root);
  const auto n = c.plant.n();

  if (const ptree* t = find(root, "controller")) {
    const Section s(*t, "controller", {"law", "J_e", "K_e", "K_F", "K_G", "K_H"});
    ControllerConfig cc;
    const std::string law = trim(s.get("law").value_or(c.plant.kind == PlantConfig::Kind::Linear ? "linear" : "nonlinear"));
    if (law == "linear") cc.law = ControlLaw::Linear;
    else if (law == "nonlinear") cc.law = ControlLaw::Nonlinear;
    else fail("controller.law must be linear or nonlinear");
    const bool shaped = s.has("J_e") || s.has("K_e");
    const bool gains = s.has("K_F") || s.has("K_G") || s.has("K_H");
    if (shaped == gains) fail("[controller] needs exactly one of {J_e, K_e} or {K_F, K_G}");
    if (shaped) {
      cc.J_e = matrix(s.need("J_e"), n, s.label("J_e"));
      cc.K_e = matrix(s.need("K_e"), n, s.label("K_e"));
    } else {
      cc.K_F = matrix(s.need("K_F"), n, s.label("K_F"));
      cc.K_G = matrix(s.need("K_G"), n, s.label("K_G"));
      if (auto v = s.get("K_H")) cc.K_H = matrix(*v, n, s.label("K_H"));
    }
    c.controller = cc;
  }

  if (const ptree* t = find(root, "outer")) {
    const Section s(*t, "outer", {"K_phi", "D_phi", "phi_d", "gravity_comp"});
    OuterLoop o{matrix(s.need("K_phi"), n, s.label("K_phi")), matrix(s.need("D_phi"), n, s.label("D_phi")),
                vector(s.get("phi_d").value_or("0"), n, s.label("phi_d")),
                boolean(s.get("gravity_comp").value_or("false"), s.label("gravity_comp"))};
    o.validate(n);
    c.outer = o;
  }

  if (const ptree* t = find(root, "target")) {
    const Section s(*t, "target", {"M_d", "K_d", "D_d", "K_theta", "D_theta", "q_d"});
    const bool linear = s.has("M_d") || s.has("K_d") || s.has("D_d");
    const bool nonlinear = s.has("K_theta") || s.has("D_theta") || s.has("q_d");
    if (linear == nonlinear) fail("[target] needs exactly one of {M_d, K_d, D_d} or {K_theta, D_theta, q_d}");
    if (linear) {
      c.target = TargetImpedance{matrix(s.need("M_d"), n, s.label("M_d")), matrix(s.need("K_d"), n, s.label("K_d")),
                                 matrix(s.need("D_d"), n, s.label("D_d"))};
    } else {
      c.target_dynamics = TargetDynamics{matrix(s.need("K_theta"), n, s.label("K_theta")),
                                         matrix(s.need("D_theta"), n, s.label("D_theta")),
                                         vector(s.get("q_d").value_or("0"), n, s.label("q_d"))};
    }
  }

  if (const ptree* t = find(root, "environment")) {
    const Section s(*t, "environment", {"M_h", "D_h", "K_h"});
    EnvironmentImpedance e{matrix(s.get("M_h").value_or("0"), n, s.label("M_h")),
                           matrix(s.get("D_h").value_or("0"), n, s.label("D_h")),
                           matrix(s.get("K_h").value_or("0"), n, s.label("K_h"))};
    e.validate(n);
    c.environment = e;
  }

  if (const ptree* t = find(root, "sweep")) {
    const Section s(*t, "sweep", {"K_F", "K_G", "J_e_scale"});
    SweepConfig sw;
    if (auto v = s.get("K_F")) sw.K_F = number_list(*v, s.label("K_F"));
    if (auto v = s.get("K_G")) sw.K_G = number_list(*v, s.label("K_G"));
    if (auto v = s.get("J_e_scale")) sw.J_e_scale = number_list(*v, s.label("J_e_scale"));
    const bool gains = !sw.K_F.empty() || !sw.K_G.empty();
    if (gains == !sw.J_e_scale.empty()) fail("[sweep] needs either K_F and K_G lists or a J_e_scale list");
    if (gains && (sw.K_F.empty() || sw.K_G.empty())) fail("[sweep] K_F and K_G lists must both be non-empty");
    for (double v : sw.J_e_scale) {
      if (!(v > 0.0)) fail("sweep.J_e_scale entries must be positive");
    }
    c.sweep = sw;
  }

  if (const ptree* t = find(root, "sim")) {
    const Section s(*t, "sim", {"dt", "horizon", "input", "amplitude", "joint", "start", "frequency", "initial_q",
                                "initial_qdot"});
    if (auto v = s.get("dt")) c.sim.dt = number(*v, s.label("dt"));
    if (auto v = s.get("horizon")) c.sim.horizon = number(*v, s.label("horizon"));
    if (c.sim.dt < 0.0) fail("sim.dt must be positive (0 selects the automatic step)");
    if (!(c.sim.horizon > 0.0)) fail("sim.horizon must be positive");
    if (c.sim.dt > 0.0 && c.sim.horizon < c.sim.dt) fail("sim.horizon must be at least one step");
    c.sim.input = parse_input(s, n);
    if (auto v = s.get("initial_q")) c.sim.initial_q = vector(*v, n, s.label("initial_q"));
    if (auto v = s.get("initial_qdot")) c.sim.initial_qdot = vector(*v, n, s.label("initial_qdot"));
  }

  if (const ptree* t = find(root, "grid")) {
    const Section s(*t, "grid", {"lo", "hi", "points"});
    if (auto v = s.get("lo")) c.grid.lo = number(*v, s.label("lo"));
    if (auto v = s.get("hi")) c.grid.hi = number(*v, s.label("hi"));
    if (auto v = s.get("points")) {
      const double p = number(*v, s.label("points"));
      if (p < 2 || p != std::floor(p) || p > 1e7) fail("grid.points must be an integer >= 2");
      c.grid.points = static_cast<int>(p);
    }
    if (!(c.grid.lo > 0.0) || !(c.grid.hi > c.grid.lo)) fail("grid needs 0 < lo < hi");
  }

  if (const ptree* t = find(root, "verify")) {
    const Section s(*t, "verify", {"samples", "seed"});
    if (auto v = s.get("samples")) {
      const double k = number(*v, s.label("samples"));
      if (k < 1 || k != std::floor(k) || k > 1e7) fail("verify.samples must be a positive integer");
      c.verify.samples = static_cast<int>(k);
    }
    if (auto v = s.get("seed")) {
      const double k = number(*v, s.label("seed"));
      if (k < 0 || k != std::floor(k) || k > 4294967295.0) fail("verify.seed must be a non-negative integer");
      c.verify.seed = static_cast<unsigned>(k);
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Configuration, "cannot read configuration file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/// Canonical INI text; parse_config(serialize_config(c)) reproduces c exactly.
inline std::string serialize_config(const ExperimentConfig& c) {
  using config_detail::fmt;
  std::ostringstream out;
  out << "[experiment]\nname = " << c.name << "\noutput = " << c.output_dir << "\n\n[plant]\n";
  if (c.plant.kind == PlantConfig::Kind::Linear) {
    const auto& p = c.plant.linear;
    out << "type = linear\nn = " << p.n() << "\nM = " << fmt(p.M) << "\nJ = " << fmt(p.J) << "\nK = " << fmt(p.K)
        << "\nD = " << fmt(p.D) << "\n";
  } else {
    const auto& a = c.plant.arm;
    out << "type = two_link\nlength1 = " << fmt(a.length1) << "\nlength2 = " << fmt(a.length2)
        << "\nmass1 = " << fmt(a.mass1) << "\nmass2 = " << fmt(a.mass2)
        << "\nmotor_inertia = " << fmt(Vec(a.motor_inertia)) << "\nstiffness = " << fmt(Vec(a.stiffness))
        << "\ndamping = " << fmt(Vec(a.damping)) << "\ngravity = " << (a.gravity ? "true" : "false")
        << "\ng = " << fmt(a.g) << "\n";
  }
  if (c.controller) {
    const auto& cc = *c.controller;
    out << "\n[controller]\nlaw = " << (cc.law == ControlLaw::Linear ? "linear" : "nonlinear") << "\n";
    if (cc.shaped_form()) out << "J_e = " << fmt(*cc.J_e) << "\nK_e = " << fmt(*cc.K_e) << "\n";
    else out << "K_F = " << fmt(*cc.K_F) << "\nK_G = " << fmt(*cc.K_G) << "\n";
    if (cc.K_H) out << "K_H = " << fmt(*cc.K_H) << "\n";
  }
  if (c.outer) {
    out << "\n[outer]\nK_phi = " << fmt(c.outer->K_phi) << "\nD_phi = " << fmt(c.outer->D_phi)
        << "\nphi_d = " << fmt(c.outer->phi_d) << "\ngravity_comp = " << (c.outer->gravity_comp ? "true" : "false")
        << "\n";
  }
  if (c.target) {
    out << "\n[target]\nM_d = " << fmt(c.target->M_d) << "\nK_d = " << fmt(c.target->K_d)
        << "\nD_d = " << fmt(c.target->D_d) << "\n";
  } else if (c.target_dynamics) {
    out << "\n[target]\nK_theta = " << fmt(c.target_dynamics->K_theta) << "\nD_theta = "
        << fmt(c.target_dynamics->D_theta) << "\nq_d = " << fmt(c.target_dynamics->q_d) << "\n";
  }
  if (c.environment) {
    out << "\n[environment]\nM_h = " << fmt(c.environment->M_h) << "\nD_h = " << fmt(c.environment->D_h)
        << "\nK_h = " << fmt(c.environment->K_h) << "\n";
  }
  if (c.sweep) {
    out << "\n[sweep]\n";
    if (!c.sweep->K_F.empty()) out << "K_F = " << fmt(c.sweep->K_F) << "\nK_G = " << fmt(c.sweep->K_G) << "\n";
    if (!c.sweep->J_e_scale.empty()) out << "J_e_scale = " << fmt(c.sweep->J_e_scale) << "\n";
  }
  out << "\n[sim]\ndt = " << fmt(c.sim.dt) << "\nhorizon = " << fmt(c.sim.horizon) << "\n";
  const auto& in = c.sim.input;
  switch (in.kind) {
    case InputSignal::Kind::Zero: out << "input = zero\n"; break;
    case InputSignal::Kind::Step:
      out << "input = step\namplitude = " << fmt(in.amplitude) << "\njoint = " << in.joint + 1
          << "\nstart = " << fmt(in.start_time) << "\n";
      break;
    case InputSignal::Kind::Sinusoid:
      out << "input = sinusoid\namplitude = " << fmt(in.amplitude) << "\njoint = " << in.joint + 1
          << "\nfrequency = " << fmt(in.frequency) << "\n";
      break;
  }
  if (c.sim.initial_q) out << "initial_q = " << fmt(*c.sim.initial_q) << "\n";
  if (c.sim.initial_qdot) out << "initial_qdot = " << fmt(*c.sim.initial_qdot) << "\n";
  out << "\n[grid]\nlo = " << fmt(c.grid.lo) << "\nhi = " << fmt(c.grid.hi) << "\npoints = " << c.grid.points
      << "\n\n[verify]\nsamples = " << c.verify.samples << "\nseed = " << c.verify.seed << "\n";
  return out.str();
}

namespace config_detail {

inline bool same(const Mat& a, const Mat& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

template <typename T, typename Eq>
bool same_opt(const std::optional<T>& a, const std::optional<T>& b, Eq eq) {
  return a.has_value() == b.has_value() && (!a || eq(*a, *b));
}

}  // namespace config_detail

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  using config_detail::same;
  using config_detail::same_opt;
  const auto mat = [](const Mat& x, const Mat& y) { return same(x, y); };
  if (a.name != b.name || a.output_dir != b.output_dir || a.plant.kind != b.plant.kind) return false;
  if (a.plant.kind == PlantConfig::Kind::Linear) {
    const auto &p = a.plant.linear, &q = b.plant.linear;
    if (!same(p.M, q.M) || !same(p.J, q.J) || !same(p.K, q.K) || !same(p.D, q.D)) return false;
  } else {
    const auto &p = a.plant.arm, &q = b.plant.arm;
    if (p.length1 != q.length1 || p.length2 != q.length2 || p.mass1 != q.mass1 || p.mass2 != q.mass2 ||
        p.motor_inertia != q.motor_inertia || p.stiffness != q.stiffness || p.damping != q.damping ||
        p.gravity != q.gravity || p.g != q.g) {
      return false;
    }
  }
  const bool ctrl = same_opt(a.controller, b.controller, [&](const ControllerConfig& x, const ControllerConfig& y) {
    return x.law == y.law && same_opt(x.J_e, y.J_e, mat) && same_opt(x.K_e, y.K_e, mat) &&
           same_opt(x.K_F, y.K_F, mat) && same_opt(x.K_G, y.K_G, mat) && same_opt(x.K_H, y.K_H, mat);
  });
  const bool outer = same_opt(a.outer, b.outer, [](const OuterLoop& x, const OuterLoop& y) {
    return same(x.K_phi, y.K_phi) && same(x.D_phi, y.D_phi) && same(x.phi_d, y.phi_d) &&
           x.gravity_comp == y.gravity_comp;
  });
  const bool target = same_opt(a.target, b.target, [](const TargetImpedance& x, const TargetImpedance& y) {
    return same(x.M_d, y.M_d) && same(x.K_d, y.K_d) && same(x.D_d, y.D_d);
  });
  const bool dyn = same_opt(a.target_dynamics, b.target_dynamics, [](const TargetDynamics& x, const TargetDynamics& y) {
    return same(x.K_theta, y.K_theta) && same(x.D_theta, y.D_theta) && same(x.q_d, y.q_d);
  });
  const bool env = same_opt(a.environment, b.environment, [](const EnvironmentImpedance& x, const EnvironmentImpedance& y) {
    return same(x.M_h, y.M_h) && same(x.D_h, y.D_h) && same(x.K_h, y.K_h);
  });
  const bool sweep = same_opt(a.sweep, b.sweep, [](const SweepConfig& x, const SweepConfig& y) {
    return x.K_F == y.K_F && x.K_G == y.K_G && x.J_e_scale == y.J_e_scale;
  });
  const auto &si = a.sim.input, &ti = b.sim.input;
  const bool sim = a.sim.dt == b.sim.dt && a.sim.horizon == b.sim.horizon && si.kind == ti.kind &&
                   si.amplitude == ti.amplitude && si.joint == ti.joint && si.start_time == ti.start_time &&
                   si.frequency == ti.frequency && same_opt(a.sim.initial_q, b.sim.initial_q, mat) &&
                   same_opt(a.sim.initial_qdot, b.sim.initial_qdot, mat);
  return ctrl && outer && target && dyn && env && sweep && sim && a.grid.lo == b.grid.lo && a.grid.hi == b.grid.hi &&
         a.grid.points == b.grid.points && a.verify.samples == b.verify.samples && a.verify.seed == b.verify.seed;
}

}  // namespace fjic
