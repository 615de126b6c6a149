#pragma once

#include <string>

#include "gcwave/config.hpp"

namespace gcwave {

// Exit codes shared with the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitVerification = 4;

struct RunOptions {
  std::string output_dir;  // overrides config when nonempty
  int threads = 1;
  bool quiet = false;
};

/// Runs one subcommand (rays | gcc | escape | wave | led | all) and writes its
/// CSV/JSON artifacts plus a manifest. Returns an exit code.
int run_subcommand(const std::string& cmd, const ScenarioConfig& cfg, const RunOptions& opt);

}  // namespace gcwave
