#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace allocbench::cli {

enum class Mode { Backtest, Train, Protocol, Synth };

std::string_view mode_name(Mode mode) noexcept;

/// Fully resolved run configuration.
struct RunManifest {
  Mode mode = Mode::Backtest;
  std::string data_path;
  std::vector<std::string> strategies;  ///< canonical names, in the order given
  std::size_t classical_window = 50;
  std::size_t drl_window = 1;
  double classical_cost = 0.0;
  double drl_cost = 0.001;
  double train_fraction = 0.8;
  std::uint64_t seed_base = 42;
  std::size_t n_runs = 10;
  std::string output_dir = "alloc-bench-out";
  bool allow_short = false;
  double risk_free_rate = 0.0;  ///< daily
  std::optional<std::size_t> steps;

  // synth mode
  std::string scenario = "bull";
  std::size_t assets = 5;
  std::size_t days = 1000;

  /// seed_base, seed_base + 1, ..., one per run.
  std::vector<std::uint64_t> seeds() const;
  std::vector<std::string> classical_strategies() const;
  std::vector<std::string> drl_strategies() const;
};

/// The nine strategy names: four classical then five learned.
const std::vector<std::string>& strategy_names();
bool is_classical_name(std::string_view name);

}  // namespace allocbench::cli
