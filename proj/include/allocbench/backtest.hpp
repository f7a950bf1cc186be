#pragma once

#include "allocbench/agents.hpp"
#include "allocbench/classical.hpp"
#include "allocbench/environment.hpp"
#include "allocbench/market_data.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace allocbench::backtest {

using env::BacktestResult;

inline constexpr std::size_t kClassicalWindow = 50;
inline constexpr double kInitialValue = 1e6;

/// Daily walk-forward run of a classical strategy. Decisions are made at the
/// close of every row d in [window, rows - 1) from the `window` returns ending
/// at d and held until d + 1. Holdings start at equal weights. A solver
/// failure keeps the previous weights and appends a dated warning.
BacktestResult run_classical(classical::Strategy strategy, const market::PriceFrame& frame, std::size_t window,
                             const classical::SolverConfig& cfg, double initial_value = kInitialValue,
                             double cost_rate = 0.0);

/// One greedy episode of `agent` over `frame`.
BacktestResult run_agent(const agents::Agent& agent, const market::PriceFrame& frame, const env::EnvConfig& env_cfg);

/// Rows of `frame` a strategy needs so that its first decision lands on the
/// first return of the test segment: [boundary + 1 - window, rows).
market::PriceFrame evaluation_frame(const market::PriceFrame& frame, std::size_t boundary, std::size_t window);

struct RunRecord {
  agents::Algorithm algorithm = agents::Algorithm::PPO;
  std::uint64_t seed = 0;
  std::optional<BacktestResult> result;
  std::vector<double> training_log;
  double cumulative_return = 0.0;
  std::string error;                       ///< empty on success
  std::optional<long long> diverged_step;  ///< set when training diverged
};

struct AlgorithmSummary {
  agents::Algorithm algorithm = agents::Algorithm::PPO;
  std::vector<RunRecord> runs;               ///< in seed order
  std::optional<std::size_t> best;           ///< index into runs
  std::optional<std::size_t> worst;
  std::optional<double> mean_cumulative;
  std::optional<double> stdev_cumulative;    ///< sample stdev, needs two successes
  std::size_t failures = 0;
};

struct ProtocolSummary {
  std::vector<BacktestResult> classical;     ///< one per classical strategy
  std::vector<AlgorithmSummary> algorithms;  ///< one per agent config
  std::size_t boundary = 0;                  ///< first test row
};

struct ProtocolOptions {
  std::size_t classical_window = kClassicalWindow;
  std::vector<classical::Strategy> strategies{std::begin(classical::kAllStrategies),
                                              std::end(classical::kAllStrategies)};
  /// 0 reads ALLOC_BENCH_THREADS, falling back to the hardware concurrency.
  std::size_t threads = 0;
};

/// Trains every config n_runs times with seeds cfg.seed + k on the train
/// segment and evaluates each run, plus the classical strategies, on the
/// test segment.
ProtocolSummary run_protocol(const market::PriceFrame& frame, const market::SplitSpec& split,
                             const std::vector<agents::AgentConfig>& agent_cfgs,
                             const classical::SolverConfig& solver_cfg, const env::EnvConfig& env_cfg,
                             std::size_t n_runs, const ProtocolOptions& options = {});

/// Worker count from ALLOC_BENCH_THREADS (if set and positive), capped by `tasks`.
std::size_t worker_count(std::size_t requested, std::size_t tasks);

}  // namespace allocbench::backtest
