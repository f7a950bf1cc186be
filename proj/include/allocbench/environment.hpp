#pragma once

#include "allocbench/market_data.hpp"
#include "allocbench/weights.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace allocbench::env {

struct EnvConfig {
  double initial_value = 1e6;
  double cost_rate = 0.001;  ///< fraction of traded value
  std::size_t window = 1;    ///< price-relative rows stacked into the observation

  void validate() const;
};

/// Observation layout: [value / initial_value, window x n price relatives
/// (oldest row first), n current weights].
struct EnvState {
  Eigen::VectorXd observation;
  std::size_t day_index = 0;
  double value = 0.0;        ///< portfolio value in currency
  Eigen::VectorXd weights;   ///< holdings after the market move into day_index
};

struct Transition {
  EnvState state;
  WeightVector action;
  double reward = 0.0;       ///< V_{t+1} - V_t in currency, after costs
  EnvState next_state;
  bool done = false;
  double cost = 0.0;         ///< currency paid on the rebalance
  double turnover = 0.0;     ///< traded value / V_t
};

/// Per-run record shared by the environment and the backtester.
struct BacktestResult {
  std::string strategy_id;
  std::optional<unsigned long long> seed;
  std::vector<market::Date> dates;               ///< one per equity point
  std::vector<double> equity_curve;
  std::vector<double> daily_returns;             ///< equity[t+1]/equity[t] - 1
  std::vector<market::Date> weight_dates;        ///< decision day of each weights row
  std::vector<Eigen::VectorXd> weights_history;  ///< target weights held into the next day
  std::vector<double> turnover_history;
  std::vector<std::string> warnings;
};

using Policy = std::function<Eigen::VectorXd(const Eigen::VectorXd& observation)>;

/// The portfolio MDP over an immutable price frame. Prices are never altered
/// by trades, and every call is deterministic.
class Environment {
 public:
  Environment(market::PriceFrame frame, EnvConfig cfg);

  const market::PriceFrame& frame() const noexcept { return frame_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  std::size_t assets() const noexcept { return frame_.assets(); }
  std::size_t observation_size() const noexcept { return 1 + (cfg_.window + 1) * frame_.assets(); }
  std::size_t last_day() const noexcept { return frame_.rows() - 1; }

  /// Equal weights at initial_value on day `window`.
  EnvState reset() const;

  /// Softmax-maps `action` to target weights, rebalances at the day's close
  /// paying cost_rate on the traded value, then advances one day.
  Transition step(const EnvState& state, const Eigen::VectorXd& action) const;

 private:
  Eigen::VectorXd observe(std::size_t day, double value, const Eigen::VectorXd& weights) const;

  market::PriceFrame frame_;
  EnvConfig cfg_;
};

BacktestResult run_episode(const market::PriceFrame& frame, const EnvConfig& cfg, const Policy& policy);

}  // namespace allocbench::env
