#include "allocbench/estimation.hpp"

#include "allocbench/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace allocbench::estimation {

CovarianceEstimate estimate(const Eigen::MatrixXd& sample) {
  const Eigen::Index m = sample.rows();
  const Eigen::Index n = sample.cols();
  require(m >= 2, ErrorKind::InsufficientData, "covariance window needs at least 2 samples");
  require(n >= 1, ErrorKind::Validation, "covariance sample has no assets");
  require(sample.allFinite(), ErrorKind::Validation, "covariance sample has non-finite returns");

  CovarianceEstimate est;
  est.window = static_cast<std::size_t>(m);
  est.mean = sample.colwise().mean().transpose();
  const Eigen::MatrixXd centered = sample.rowwise() - est.mean.transpose();
  est.cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
  // Exact symmetry regardless of summation order.
  est.cov = 0.5 * (est.cov + est.cov.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kRidgeEigenFloor) {
    const double avg_var = est.cov.trace() / static_cast<double>(n);
    // Identical rows give a zero trace; use an absolute floor then.
    est.ridge = avg_var > 0.0 ? kRidgeScale * avg_var : kRidgeScale * kRidgeEigenFloor;
    est.cov.diagonal().array() += est.ridge;
  }
  return est;
}

CovarianceEstimate rolling_estimate(const market::ReturnsFrame& returns, std::size_t end_index, std::size_t window) {
  require(window >= 2, ErrorKind::Validation, "estimation window must be at least 2");
  if (end_index < window || end_index > returns.rows()) {
    fail(ErrorKind::InsufficientData, "rolling window of " + std::to_string(window) + " ending at row " +
                                          std::to_string(end_index) + " exceeds available history of " +
                                          std::to_string(returns.rows()) + " returns");
  }
  return estimate(returns.returns.middleRows(static_cast<Eigen::Index>(end_index - window),
                                             static_cast<Eigen::Index>(window)));
}

PortfolioMoments portfolio_moments(const CovarianceEstimate& est, const Eigen::VectorXd& w) {
  require(w.size() == est.mean.size(), ErrorKind::Validation,
          "weight length " + std::to_string(w.size()) + " does not match " + std::to_string(est.mean.size()) +
              " assets");
  const double var = w.dot(est.cov * w);
  return {w.dot(est.mean), std::sqrt(std::max(var, 0.0))};
}

PortfolioMoments portfolio_moments(const CovarianceEstimate& est, const WeightVector& w) {
  return portfolio_moments(est, w.values());
}

}  // namespace allocbench::estimation
