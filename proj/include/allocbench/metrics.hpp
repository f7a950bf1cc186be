#pragma once

#include <optional>
#include <span>

namespace allocbench::metrics {

inline constexpr double kTradingDaysPerYear = 252.0;

/// prod(1 + r_t) - 1
double cumulative_return(std::span<const double> daily);

/// (1 + cumulative)^(252 / days) - 1
double annualize_return(double cumulative, std::size_t days);

/// Sample standard deviation (divisor N-1) scaled by sqrt(252).
double annual_volatility(std::span<const double> daily);

/// Annualized mean excess return over its sample standard deviation.
/// Throws an undefined-metric error when the excess returns have zero spread.
double sharpe_ratio(std::span<const double> daily, double rf_daily = 0.0);

/// Worst peak-to-trough decline of the equity curve that starts at 1.
double max_drawdown(std::span<const double> daily);

double calmar_ratio(double annual_return, double max_drawdown);

/// R^2 of an ordinary least-squares fit of cumulative log-equity against the
/// day index.
double stability(std::span<const double> daily);

/// The seven reported metrics. Metrics that are undefined for the series
/// (zero volatility, zero drawdown, flat log-equity) are empty.
struct MetricsReport {
  double annual_return = 0.0;
  double cumulative_return = 0.0;
  double annual_volatility = 0.0;
  std::optional<double> sharpe;
  std::optional<double> calmar;
  std::optional<double> stability;
  double max_drawdown = 0.0;
};

MetricsReport full_report(std::span<const double> daily, double rf_daily = 0.0);

}  // namespace allocbench::metrics
