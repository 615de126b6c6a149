// gcwave: configuration-driven scenarios for bicharacteristic ray studies,
// geometric-control audits, escape-symbol verification, and damped-wave
// local-energy-decay experiments.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "gcwave/config.hpp"
#include "gcwave/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gcwave - damped-wave geometric control laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GCWAVE_OUTPUT_DIR")) output_dir = env;

  const std::vector<std::string> names = {"rays", "gcc", "escape", "wave", "led", "all"};
  const std::vector<std::string> descs = {
      "classify a ray ensemble and write per-ray reports",
      "audit the geometric control condition over trapped rays",
      "build the escape symbols and verify the positivity inequality",
      "evolve the damped wave equation and report energy/LE norms",
      "run the local-energy-decay comparison table",
      "run every subcommand in sequence"};
  for (size_t i = 0; i < names.size(); ++i) {
    auto* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", config_path, "scenario config file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--output", output_dir, "output directory (overrides config)");
    sub->add_option("--threads", threads, "worker thread count");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  gcwave::ScenarioConfig cfg;
  try {
    cfg = gcwave::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return gcwave::kExitConfig;
  }

  gcwave::RunOptions opt;
  opt.output_dir = output_dir;
  opt.threads = std::max(1, threads);
  return gcwave::run_subcommand(cmd, cfg, opt);
}
