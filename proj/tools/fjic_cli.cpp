#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "fjic/experiments.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<int> grid_points;
  std::optional<unsigned> seed;
};

void add_common(CLI::App* cmd, Options& o, bool needs_config) {
  auto* cfg = cmd->add_option("--config", o.config, "experiment configuration (INI)")->check(CLI::ExistingFile);
  if (needs_config) cfg->required();
  cmd->add_option("--out", o.out, "output directory (default: the configuration's output entry)");
  cmd->add_option("--dt", o.dt, "integration step in s (capped by the stiffness guard)")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon", o.horizon, "simulated time in s")->check(CLI::PositiveNumber);
  cmd->add_option("--grid-points", o.grid_points, "points of the logarithmic frequency grid")->check(CLI::Range(2, 10000000));
  cmd->add_option("--seed", o.seed, "seed for randomized verification sampling");
}

fjic::ExperimentConfig load(const Options& o) {
  auto c = fjic::load_config(o.config);
  if (o.dt) c.sim.dt = *o.dt;
  if (o.horizon) c.sim.horizon = *o.horizon;
  if (o.grid_points) c.grid.points = *o.grid_points;
  if (o.seed) c.verify.seed = *o.seed;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Impedance control of flexible-joint robots: gain synthesis, frequency studies and simulation"};
  app.require_subcommand(1);
  Options o;

  using Runner = int (*)(const fjic::ExperimentConfig&, const std::filesystem::path&, std::ostream&);
  const std::pair<const char*, Runner> commands[] = {
      {"synth", fjic::run_synth},     {"bode", fjic::run_bode},     {"pzmap", fjic::run_pzmap},
      {"simulate", fjic::run_simulate}, {"verify", fjic::run_verify},
  };
  const char* help[] = {"report both gain parametrizations and admissibility",
                        "closed-loop Bode data for the gain sweep and the target",
                        "poles and zeros of the sweep and the target",
                        "time-domain run(s) with energy accounting",
                        "equivalence, passivity and gain-identity checks"};
  std::vector<std::pair<CLI::App*, Runner>> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* cmd = app.add_subcommand(commands[i].first, help[i]);
    add_common(cmd, o, true);
    subs.emplace_back(cmd, commands[i].second);
  }
  auto* repro = app.add_subcommand("reproduce-paper", "run the frequency, pole-zero and arm studies with fixed parameters");
  add_common(repro, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : fjic::kExitInfeasible;
  }

  if (repro->parsed()) {
    return fjic::reproduce_paper(o.out.empty() ? "paper" : o.out, std::cerr, o.grid_points, o.horizon);
  }
  for (const auto& [cmd, run] : subs) {
    if (!cmd->parsed()) continue;
    fjic::ExperimentConfig c;
    try {
      c = load(o);
    } catch (const fjic::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return fjic::exit_code_for(e.kind());
    }
    return run(c, o.out.empty() ? c.output_dir : o.out, std::cerr);
  }
  return fjic::kExitInfeasible;
}
