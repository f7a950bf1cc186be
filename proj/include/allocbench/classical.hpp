#pragma once

#include "allocbench/estimation.hpp"
#include "allocbench/weights.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace allocbench::classical {

struct SolverConfig {
  bool long_only = true;
  double risk_free_rate = 0.0;            ///< daily
  std::optional<double> target_return;    ///< daily E(r_p) for min-variance
  int max_iter = 10000;
  double tol = 1e-10;

  void validate() const;
};

enum class Strategy { Tangency, MinVariance, RiskParity, EqualWeight };

std::string_view strategy_name(Strategy s) noexcept;
std::optional<Strategy> parse_strategy(std::string_view name) noexcept;
inline constexpr Strategy kAllStrategies[] = {Strategy::Tangency, Strategy::MinVariance, Strategy::RiskParity,
                                             Strategy::EqualWeight};

WeightVector equal_weight(std::size_t n);

/// Minimizes w'Cw/2 subject to sum(w) = 1 (and w'mean = target when set).
///
/// Shorting mode uses the Lagrange closed form. Long-only mode without a
/// target runs projected gradient descent on the simplex with Armijo
/// backtracking, finishing with an exact solve on the identified support;
/// with a target it uses the active-set QP below.
WeightVector solve_min_variance(const estimation::CovarianceEstimate& est, const SolverConfig& cfg);

/// Maximizes the Sharpe ratio (w'mean - rf) / sqrt(w'Cw).
WeightVector solve_tangency(const estimation::CovarianceEstimate& est, const SolverConfig& cfg);

/// Equal risk contributions w_i (Cw)_i via Newton's method on
/// Cw - 1/(n w) = 0, rescaled to sum to one.
WeightVector solve_risk_parity(const estimation::CovarianceEstimate& est, const SolverConfig& cfg);

WeightVector solve(Strategy strategy, const estimation::CovarianceEstimate& est, const SolverConfig& cfg);

struct FrontierPoint {
  double expected_return = 0.0;
  double stdev = 0.0;
  WeightVector weights;
};

/// `points` portfolios from the minimum-variance return up to the largest
/// single-asset mean, sorted by expected return.
std::vector<FrontierPoint> efficient_frontier(const estimation::CovarianceEstimate& est, const SolverConfig& cfg,
                                              std::size_t points);

// Building blocks, exposed for testing.

/// Euclidean projection onto {x >= 0, sum(x) = 1} by the sorted-threshold method.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y);

/// w_i (Cw)_i
Eigen::VectorXd risk_contributions(const Eigen::MatrixXd& cov, const Eigen::VectorXd& w);

/// Sharpe ratio of the portfolio in daily units (not annualized).
double portfolio_sharpe(const estimation::CovarianceEstimate& est, const Eigen::VectorXd& w, double rf);

/// Primal active-set solver for min x'Qx/2 + c'x s.t. Ax = b, x >= 0 from a
/// feasible start. Throws a convergence error when `max_iter` is exhausted.
Eigen::VectorXd solve_nonnegative_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b, Eigen::VectorXd x0, int max_iter, double tol);

}  // namespace allocbench::classical
