#pragma once

#include "allocbench/market_data.hpp"
#include "allocbench/weights.hpp"

#include <Eigen/Core>

#include <cstddef>

namespace allocbench::estimation {

/// Mean daily return vector and covariance matrix over a sample window.
struct CovarianceEstimate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t window = 0;
  double ridge = 0.0;  ///< amount added to the diagonal (0 when none was needed)

  std::size_t assets() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

inline constexpr double kRidgeEigenFloor = 1e-10;
inline constexpr double kRidgeScale = 1e-8;

/// Sample mean and covariance (divisor m-1) of the rows of `sample`.
/// A ridge of 1e-8 * trace(cov)/n is added to the diagonal when the smallest
/// eigenvalue is below 1e-10.
CovarianceEstimate estimate(const Eigen::MatrixXd& sample);

/// Estimate over returns rows [end_index - window, end_index).
CovarianceEstimate rolling_estimate(const market::ReturnsFrame& returns, std::size_t end_index, std::size_t window);

struct PortfolioMoments {
  double expected_return = 0.0;
  double stdev = 0.0;
};

PortfolioMoments portfolio_moments(const CovarianceEstimate& est, const Eigen::VectorXd& w);
PortfolioMoments portfolio_moments(const CovarianceEstimate& est, const WeightVector& w);

}  // namespace allocbench::estimation
