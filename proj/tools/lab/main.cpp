#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "affine/error.hpp"
#include "affine/parallel.hpp"
#include "commands.hpp"
#include "config.hpp"

using affine::lab::Command;

int main(int argc, char** argv) {
  CLI::App app{"affine_lab: experiments on affine processes on positive operators"};
  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--threads", threads, "worker count (else config, then AFFINE_LAB_THREADS)")->check(CLI::PositiveNumber);
  app.require_subcommand(1);

  const char* help[] = {"admissibility report for a parameter model",
                        "Riccati solution (phi, vec psi) on a time grid",
                        "invariant moments, stability constants and the transport bound",
                        "ensemble moments of simulated paths",
                        "transport distance between a simulated law and the invariant law, or two CSV clouds",
                        "European calls on the forward by Fourier and Monte Carlo",
                        "forward-start implied volatilities against the stationary limit",
                        "full acceptance suite with a pass/fail report"};
  int i = 0;
  for (Command c : affine::lab::kAllCommands) app.add_subcommand(affine::lab::to_string(c), help[i++])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : affine::lab::kExitValidation;
  }

  const Command command = *affine::lab::parse_command(app.get_subcommands().front()->get_name());
  affine::lab::ExperimentConfig cfg;
  try {
    cfg = config_path.empty() ? affine::lab::default_config(command) : affine::lab::load_config(config_path, command);
  } catch (const affine::Error& e) {
    const nlohmann::json j = {{"error", std::string(affine::to_string(e.code()))},
                              {"message", e.what()},
                              {"exit_code", affine::lab::kExitValidation}};
    std::cerr << j.dump() << std::endl;
    return affine::lab::kExitValidation;
  }
  if (seed) cfg.seed = seed;
  if (threads) cfg.threads = threads;
  if (cfg.threads) affine::set_thread_count(*cfg.threads);
  return affine::lab::run(cfg, out_dir, std::cout, std::cerr);
}
