// mincontrol: scenario runner for minimum-energy control and the associated
// Lyapunov / Riccati checks.
//
//   mincontrol run scenarios/scalar_benchmark.json --out out/
//   mincontrol sweep --model spectral:landau-ginzburg --horizon 1 2 4 --target ...
//
// Exit status: 0 when every verification passes, 1 when one fails, 2 on
// schema or usage errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scenario.h"

namespace {

using mincontrol::Json;
using mincontrol::cli::RunOptions;

Json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mincontrol::cli::ScenarioError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw mincontrol::cli::ScenarioError(path + ": " + e.what());
  }
}

struct TaskFlags {
  std::string model;
  std::vector<double> horizons;
  std::vector<double> target;
  std::optional<double> t0;
  std::optional<int> grid_points;
  std::optional<int> modes;
};

Json ScenarioFromFlags(const std::string& task, const TaskFlags& f) {
  Json sc;
  // A model argument naming an existing file is read as an inline system.
  if (std::filesystem::is_regular_file(f.model)) {
    sc["model"] = ReadJsonFile(f.model);
  } else {
    sc["model"] = f.model;
  }
  sc["tasks"] = Json::array({task});
  if (!f.horizons.empty()) sc["horizons"] = f.horizons;
  if (!f.target.empty()) sc["target"] = f.target;
  if (f.t0) sc["T0"] = *f.t0;
  if (f.grid_points) sc["grid_points"] = *f.grid_points;
  if (f.modes) sc["modes"] = *f.modes;
  return sc;
}

int Execute(const Json& sc, const RunOptions& opts) {
  const auto result = mincontrol::cli::RunScenario(sc, opts);
  for (const auto& task : result.report.at("tasks")) {
    std::cout << (task.at("pass").get<bool>() ? "[PASS] " : "[FAIL] ")
              << task.at("task").get<std::string>();
    if (task.contains("error")) std::cout << "  " << task.at("error").get<std::string>();
    std::cout << '\n';
  }
  std::cout << "report: " << (result.output_dir / "report.json").string() << '\n';
  return result.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-energy control, controllability Gramians and Riccati checks"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  int mesh = 0;
  int nodes = 0;
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* seed_opt = app.add_option("--seed", seed, "Probe seed (overrides the scenario)");
  app.add_option("--tol", opts.tol_scale, "Global tolerance scale")
      ->check(CLI::PositiveNumber);
  auto* mesh_opt = app.add_option("--mesh", mesh, "Delay mesh cells")->check(CLI::Range(4, 1 << 16));
  auto* nodes_opt = app.add_option("--nodes", nodes, "Initial quadrature nodes")
                        ->check(CLI::Range(2, 1 << 20));

  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario_path, "Scenario JSON")->required();
  run->fallthrough();

  TaskFlags flags;
  std::vector<std::pair<std::string, CLI::App*>> task_cmds;
  for (const std::string& task : mincontrol::cli::KnownTasks()) {
    auto* cmd = app.add_subcommand(task, "Run the " + task + " task");
    cmd->add_option("--model", flags.model,
                    "Preset (spectral:*, delay(a0,a1,b0,d), shift(m)) or a system JSON file")
        ->required();
    cmd->add_option("--horizon", flags.horizons, "Horizons t");
    cmd->add_option("--target", flags.target, "Target state");
    cmd->add_option("--T0", flags.t0, "Null-controllability time");
    cmd->add_option("--grid-points", flags.grid_points, "Control grid size");
    cmd->add_option("--modes", flags.modes, "Spectral truncation order");
    cmd->fallthrough();
    task_cmds.emplace_back(task, cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (out_opt->count()) opts.out = out;
  if (seed_opt->count()) opts.seed = seed;
  if (mesh_opt->count()) opts.mesh = mesh;
  if (nodes_opt->count()) opts.nodes = nodes;

  try {
    if (run->parsed()) return Execute(ReadJsonFile(scenario_path), opts);
    for (const auto& [task, cmd] : task_cmds) {
      if (cmd->parsed()) return Execute(ScenarioFromFlags(task, flags), opts);
    }
  } catch (const mincontrol::cli::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
