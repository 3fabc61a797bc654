#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cmwd/experiment.hpp"

namespace {

// CMWD_THREADS overrides the config's thread count.
void apply_env_threads(cmwd::ExperimentConfig& cfg) {
  if (const char* env = std::getenv("CMWD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n < 1) throw std::invalid_argument("");
      cfg.threads = n;
    } catch (const std::exception&) {
      throw cmwd::ConfigError({"CMWD_THREADS: expected a positive integer, got '" + std::string(env) + "'"});
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constant-modulus DFRC waveform design"};
  app.require_subcommand(1);

  std::string config_path, solver, out_dir;
  std::uint64_t seed = 0;
  auto* design = app.add_subcommand("design", "design waveforms for every seed in a config");
  design->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = design->add_option("--seed", seed, "run only this seed");
  design->add_option("--solver", solver, "override the solver")->check(CLI::IsMember({"mm", "ladmm", "radar_only"}));
  design->add_option("--out", out_dir, "override the output directory");

  std::string waveform_path, scene_path, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a stored waveform against a scene");
  evaluate->add_option("waveform", waveform_path, "waveform.bin from a design run")->required()->check(CLI::ExistingFile);
  evaluate->add_option("scene", scene_path, "config or scene file (JSON)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "output directory (default: <waveform dir>/evaluation)");

  std::string scaling_path, scaling_out;
  auto* scaling = app.add_subcommand("scaling", "time both solvers over the configured block lengths");
  scaling->add_option("config", scaling_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  scaling->add_option("--out", scaling_out, "CSV path (default: <output_dir>/scaling.csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*design) {
      auto cfg = cmwd::load_config(config_path);
      apply_env_threads(cfg);
      if (*seed_opt) cfg.seeds = {seed};
      if (!solver.empty()) cfg.solver = cmwd::solver_from_string(solver);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const int code = cmwd::run_experiment(cfg);
      if (code == 2) std::cerr << "warning: at least one run did not converge; outputs are partial\n";
      return code;
    }
    if (*evaluate) {
      auto cfg = cmwd::load_config(scene_path);
      apply_env_threads(cfg);
      const std::filesystem::path wf(waveform_path);
      const std::filesystem::path dir = eval_out.empty() ? wf.parent_path() / "evaluation" : std::filesystem::path(eval_out);
      return cmwd::run_evaluation(wf, cfg, dir);
    }
    if (*scaling) {
      auto cfg = cmwd::load_config(scaling_path);
      apply_env_threads(cfg);
      const auto rows = cmwd::run_scaling_study(cfg);
      const std::filesystem::path path =
          scaling_out.empty() ? cfg.output_dir / "scaling.csv" : std::filesystem::path(scaling_out);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      cmwd::write_scaling_csv(out, rows);
      cmwd::write_scaling_csv(std::cout, rows);
      return 0;
    }
  } catch (const cmwd::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
