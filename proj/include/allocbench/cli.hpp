#pragma once

#include "allocbench/manifest.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace allocbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDiverged = 4;
inline constexpr int kExitIo = 5;

struct ParseOutcome {
  RunManifest manifest;
  bool help = false;
  std::string help_text;
};

/// Parses `alloc-bench <mode> [flags]`. `run` is accepted as a synonym of
/// `backtest`. Throws a usage error for unknown flags, bad values, invalid
/// strategy names, or a missing --data.
ParseOutcome parse_args(const std::vector<std::string>& args);

/// Executes a manifest, writing artifacts under output_dir and progress to `log`.
void execute(const RunManifest& manifest, std::ostream& log);

/// parse_args + execute with errors mapped to exit statuses.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace allocbench::cli
