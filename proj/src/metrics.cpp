#include "allocbench/metrics.hpp"

#include "allocbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace allocbench::metrics {

namespace {

void check_returns(std::span<const double> daily) {
  for (double r : daily) {
    require(std::isfinite(r) && r > -1.0, ErrorKind::Validation, "daily returns must be finite and greater than -1");
  }
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_stdev(std::span<const double> xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

double cumulative_return(std::span<const double> daily) {
  require(!daily.empty(), ErrorKind::InsufficientData, "cumulative return of an empty series");
  check_returns(daily);
  double growth = 1.0;
  for (double r : daily) growth *= 1.0 + r;
  return growth - 1.0;
}

double annualize_return(double cumulative, std::size_t days) {
  require(days >= 1, ErrorKind::Validation, "annualization needs at least one day");
  require(cumulative > -1.0, ErrorKind::Validation, "cumulative return must exceed -1");
  return std::pow(1.0 + cumulative, kTradingDaysPerYear / static_cast<double>(days)) - 1.0;
}

double annual_volatility(std::span<const double> daily) {
  require(daily.size() >= 2, ErrorKind::InsufficientData, "volatility needs at least 2 returns");
  check_returns(daily);
  return sample_stdev(daily) * std::sqrt(kTradingDaysPerYear);
}

double sharpe_ratio(std::span<const double> daily, double rf_daily) {
  require(daily.size() >= 2, ErrorKind::InsufficientData, "Sharpe ratio needs at least 2 returns");
  check_returns(daily);
  std::vector<double> excess(daily.begin(), daily.end());
  for (double& x : excess) x -= rf_daily;
  const double sd = sample_stdev(excess);
  const double m = mean_of(excess);
  // Identical returns leave only rounding noise in the spread.
  if (!(sd > 1e-14 * std::max(1.0, std::abs(m)))) {
    fail(ErrorKind::UndefinedMetric, "Sharpe ratio undefined: excess returns have zero volatility");
  }
  return m / sd * std::sqrt(kTradingDaysPerYear);
}

double max_drawdown(std::span<const double> daily) {
  require(!daily.empty(), ErrorKind::InsufficientData, "max drawdown of an empty series");
  check_returns(daily);
  double equity = 1.0;
  double peak = 1.0;
  double worst = 0.0;
  for (double r : daily) {
    equity *= 1.0 + r;
    peak = std::max(peak, equity);
    worst = std::min(worst, equity / peak - 1.0);
  }
  return worst;
}

double calmar_ratio(double annual_return, double max_drawdown) {
  require(max_drawdown <= 0.0 && max_drawdown >= -1.0, ErrorKind::Validation, "max drawdown must lie in [-1, 0]");
  if (!(max_drawdown < 0.0)) fail(ErrorKind::UndefinedMetric, "Calmar ratio undefined: zero drawdown");
  return annual_return / std::abs(max_drawdown);
}

double stability(std::span<const double> daily) {
  require(daily.size() >= 3, ErrorKind::InsufficientData, "stability needs at least 3 returns");
  check_returns(daily);
  const auto n = daily.size();
  std::vector<double> y(n);
  double acc = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    acc += std::log1p(daily[t]);
    y[t] = acc;
  }
  const double t_mean = static_cast<double>(n - 1) / 2.0;
  const double y_mean = mean_of(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dt = static_cast<double>(t) - t_mean;
    const double dy = y[t] - y_mean;
    sxy += dt * dy;
    sxx += dt * dt;
    syy += dy * dy;
  }
  if (!(syy > 1e-28 * std::max(1.0, y_mean * y_mean) * static_cast<double>(n))) {
    fail(ErrorKind::UndefinedMetric, "stability undefined: log-equity has zero variance");
  }
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

MetricsReport full_report(std::span<const double> daily, double rf_daily) {
  require(daily.size() >= 3, ErrorKind::InsufficientData, "metrics report needs at least 3 returns");
  MetricsReport out;
  out.cumulative_return = cumulative_return(daily);
  out.annual_return = annualize_return(out.cumulative_return, daily.size());
  out.annual_volatility = annual_volatility(daily);
  out.max_drawdown = max_drawdown(daily);
  const auto optional_metric = [](auto&& compute) -> std::optional<double> {
    try {
      return compute();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UndefinedMetric) throw;
      return std::nullopt;
    }
  };
  out.sharpe = optional_metric([&] { return sharpe_ratio(daily, rf_daily); });
  out.calmar = optional_metric([&] { return calmar_ratio(out.annual_return, out.max_drawdown); });
  out.stability = optional_metric([&] { return stability(daily); });
  return out;
}

}  // namespace allocbench::metrics
