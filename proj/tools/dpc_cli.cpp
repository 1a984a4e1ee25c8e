// dpc: run coverage scenarios, validate scenario files and plot run outputs.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpc/io/artifacts.hpp"

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            bool parallel, std::optional<int> k_interval, bool timing) {
  dpc::io::ScenarioOverrides ov{seed, k_interval};
  const auto loaded = dpc::io::load_scenario(scenario_path, ov);
  const auto result = dpc::run(loaded.scenario, {parallel, timing});
  dpc::io::write_files(out_dir, dpc::io::run_artifacts(loaded, result));
  std::cout << "steps " << result.steps << ", agent-points " << result.records.size();
  if (!result.global_w.empty()) {
    std::cout << ", global W2 " << dpc::io::format_number(result.global_w.front().w2) << " -> "
              << dpc::io::format_number(result.global_w.back().w2);
  }
  std::cout << "\nwrote " << out_dir << "\n";
  return 0;
}

int cmd_validate(const std::string& scenario_path) {
  const auto loaded = dpc::io::load_scenario(scenario_path);
  const auto& sc = loaded.scenario;
  std::vector<int> budgets;
  for (const auto& a : sc.agents) budgets.push_back(a.budget);
  std::cout << scenario_path << ": valid\n";
  std::cout << "  agents " << sc.agents.size() << ", alpha " << dpc::io::format_number(dpc::agent_alpha(budgets))
            << ", reference points " << sc.reference.size() << " (" << loaded.reference_source << ")\n";
  for (std::size_t r = 0; r < sc.agents.size(); ++r) {
    const auto& a = sc.agents[r];
    std::cout << "  agent " << r << ": " << loaded.system_names[r] << ", n=" << a.system.state_dim()
              << " m=" << a.system.input_dim() << " P=" << a.system.relative_degree() << ", budget " << a.budget
              << (a.system.input_constraints() ? ", input constrained" : ", unconstrained") << "\n";
  }
  std::cout << "  communication range "
            << (std::isinf(sc.comm.d_comm) ? std::string("unlimited") : dpc::io::format_number(sc.comm.d_comm))
            << ", global W every " << sc.k_interval << " steps (cap " << sc.w_cap << ")\n";
  return 0;
}

int cmd_plot(const std::string& out_dir, const std::string& kind_name, const std::vector<int>& window, int agent,
             const std::string& file) {
  const auto kind = dpc::io::parse_plot_kind(kind_name);
  dpc::io::Window win;
  if (!window.empty()) {
    win.lo = window[0];
    win.hi = window[1];
  }
  const std::string svg = dpc::io::render_plot(out_dir, kind, win, agent);
  const std::filesystem::path target =
      file.empty() ? std::filesystem::path(out_dir) / dpc::io::plot_file_name(kind) : std::filesystem::path(file);
  dpc::io::write_files(target.parent_path().empty() ? "." : target.parent_path(), {{target.filename().string(), svg}});
  std::cout << "wrote " << target.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-based coverage control with optimal transport"};
  app.require_subcommand(1);

  std::string scenario, out_dir, kind, file;
  std::optional<std::uint64_t> seed;
  std::optional<int> k_interval;
  bool parallel = false, timing = false;
  std::vector<int> window;
  int agent = 0;

  auto* run = app.add_subcommand("run", "Simulate a scenario and write CSV outputs");
  run->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--parallel", parallel, "Run agents' Stage A/B on separate threads (true/false)")
      ->expected(0, 1)
      ->default_str("false");
  run->add_option("--k-interval", k_interval, "Global W2 evaluation interval in steps")->check(CLI::PositiveNumber);
  run->add_flag("--timing", timing, "Record per-stage wall times (makes metrics.csv nondeterministic)");

  auto* validate = app.add_subcommand("validate", "Check a scenario without running it");
  validate->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);

  auto* plot = app.add_subcommand("plot", "Render an SVG from a run's outputs");
  plot->add_option("--out", out_dir, "Directory holding the run outputs")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--kind", kind, "trajectories, deltaw, ellipses or globalw")
      ->required()
      ->check(CLI::IsMember({"trajectories", "deltaw", "ellipses", "globalw"}));
  plot->add_option("--window", window, "Inclusive step window LO HI")->expected(2);
  plot->add_option("--agent", agent, "Agent shown by the ellipse plot")->check(CLI::NonNegativeNumber);
  plot->add_option("--file", file, "SVG path (default: <out>/<kind>.svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, out_dir, seed, parallel, k_interval, timing);
    if (*validate) return cmd_validate(scenario);
    if (*plot) return cmd_plot(out_dir, kind, window, agent, file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
