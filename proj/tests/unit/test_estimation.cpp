#include "allocbench/error.hpp"
#include "allocbench/estimation.hpp"

#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace allocbench;
using namespace allocbench::estimation;

namespace {

Eigen::MatrixXd random_sample(Eigen::Index m, Eigen::Index n, std::mt19937_64& rng, double scale = 0.01) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd s(m, n);
  for (Eigen::Index t = 0; t < m; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) s(t, i) = normal(rng);
  }
  return s;
}

// Straight two-pass sample covariance, element by element.
Eigen::MatrixXd oracle_cov(const Eigen::MatrixXd& s) {
  const Eigen::Index m = s.rows();
  const Eigen::Index n = s.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < m; ++t) mu(i) += s(t, i);
    mu(i) /= static_cast<double>(m);
  }
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < m; ++t) acc += (s(t, i) - mu(i)) * (s(t, j) - mu(j));
      c(i, j) = acc / static_cast<double>(m - 1);
    }
  }
  return c;
}

}  // namespace

TEST(Estimate, MatchesElementwiseOracle) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_sample(50, 4, rng);
    const auto est = estimate(s);
    EXPECT_EQ(est.window, 50u);
    EXPECT_EQ(est.ridge, 0.0);
    EXPECT_LT((est.cov - oracle_cov(s)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((est.mean - s.colwise().mean().transpose()).cwiseAbs().maxCoeff(), 1e-16);
    EXPECT_EQ((est.cov - est.cov.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Estimate, IdenticalRowsGiveZeroCovariancePlusRidge) {
  Eigen::MatrixXd s(10, 3);
  s.rowwise() = Eigen::RowVector3d(0.01, -0.02, 0.005);
  const auto est = estimate(s);
  EXPECT_LT((est.mean - Eigen::Vector3d(0.01, -0.02, 0.005)).cwiseAbs().maxCoeff(), 1e-17);
  const Eigen::MatrixXd before = est.cov - est.ridge * Eigen::MatrixXd::Identity(3, 3);
  EXPECT_LT(before.cwiseAbs().maxCoeff(), 1e-30);
  EXPECT_GT(est.ridge, 0.0);
}

TEST(Estimate, RidgeAppliedWhenSingular) {
  std::mt19937_64 rng(4);
  // Fewer samples than assets: rank deficient.
  const auto s = random_sample(5, 8, rng);
  const auto est = estimate(s);
  const Eigen::MatrixXd raw = oracle_cov(s);
  const double expected = kRidgeScale * raw.trace() / 8.0;
  EXPECT_NEAR(est.ridge, expected, 1e-12 * expected);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.cov);
  EXPECT_GE(eig.eigenvalues().minCoeff(), est.ridge * (1.0 - 1e-6));
}

TEST(Estimate, AlternatingReturnsPerfectlyAnticorrelated) {
  const double a = 0.013;
  Eigen::MatrixXd s(50, 2);
  for (Eigen::Index t = 0; t < 50; ++t) {
    const double sign = t % 2 == 0 ? 1.0 : -1.0;
    s(t, 0) = sign * a;
    s(t, 1) = -sign * a;
  }
  const auto est = estimate(s);
  const double raw01 = est.cov(0, 1);
  const double raw00 = est.cov(0, 0) - est.ridge;
  const double raw11 = est.cov(1, 1) - est.ridge;
  EXPECT_NEAR(raw01 / std::sqrt(raw00 * raw11), -1.0, 1e-9);
}

TEST(Estimate, EqualWeightVarianceMatchesSeries) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_sample(50, 5, rng);
    const auto est = estimate(s);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
    const Eigen::VectorXd series = s * w;
    const double mu = series.mean();
    const double var = (series.array() - mu).square().sum() / 49.0;
    EXPECT_NEAR(w.dot(est.cov * w), var, 1e-12);
  }
}

TEST(Estimate, ScalingAndPermutation) {
  std::mt19937_64 rng(3);
  const auto s = random_sample(50, 4, rng);
  const auto base = estimate(s);
  const double k = 3.5;
  const auto scaled = estimate(k * s);
  EXPECT_LT((scaled.mean - k * base.mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((scaled.cov - k * k * base.cov).cwiseAbs().maxCoeff(), 1e-15);

  Eigen::VectorXi order(4);
  order << 2, 0, 3, 1;
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(order);
  const auto permuted = estimate(s * perm);
  EXPECT_LT((permuted.mean - perm.transpose() * base.mean).cwiseAbs().maxCoeff(), 1e-16);
  EXPECT_LT((permuted.cov - perm.transpose() * base.cov * perm).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Estimate, Errors) {
  EXPECT_THROW(estimate(Eigen::MatrixXd::Zero(1, 3)), Error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(4, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(estimate(bad), Error);
}

TEST(RollingEstimate, UsesTrailingWindow) {
  const auto frame = market::synth_scenario("bull", 3, 120, 2);
  const auto r = market::to_returns(frame);
  const auto est = rolling_estimate(r, 80, 50);
  const auto direct = estimate(r.returns.middleRows(30, 50));
  EXPECT_EQ(est.mean, direct.mean);
  EXPECT_EQ(est.cov, direct.cov);
  try {
    rolling_estimate(r, 49, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
  }
  EXPECT_THROW(rolling_estimate(r, 200, 50), Error);
  EXPECT_THROW(rolling_estimate(r, 10, 1), Error);
}

TEST(Moments, OneHotAndIdentity) {
  std::mt19937_64 rng(6);
  CovarianceEstimate est;
  est.cov = oracle::random_spd(4, rng);
  est.mean = Eigen::Vector4d(0.001, 0.002, -0.0005, 0.0);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const auto m = portfolio_moments(est, Eigen::VectorXd::Unit(4, i));
    EXPECT_EQ(m.expected_return, est.mean(i));
    EXPECT_NEAR(m.stdev, std::sqrt(est.cov(i, i)), 1e-15);
  }
  for (int n = 1; n <= 9; ++n) {
    CovarianceEstimate id;
    id.cov = Eigen::MatrixXd::Identity(n, n);
    id.mean = Eigen::VectorXd::Zero(n);
    EXPECT_NEAR(portfolio_moments(id, WeightVector(Eigen::VectorXd::Constant(n, 1.0 / n))).stdev,
                1.0 / std::sqrt(static_cast<double>(n)), 1e-15);
  }
}

TEST(Moments, BruteForceDoubleSum) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    CovarianceEstimate est;
    est.cov = oracle::random_spd(3, rng);
    est.mean = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.01;
    Eigen::Vector3d w(u(rng), u(rng), u(rng));
    w /= w.sum();
    double var = 0.0;
    double er = 0.0;
    for (int i = 0; i < 3; ++i) {
      er += w(i) * est.mean(i);
      for (int j = 0; j < 3; ++j) var += w(i) * w(j) * est.cov(i, j);
    }
    const auto m = portfolio_moments(est, w);
    EXPECT_NEAR(m.expected_return, er, 1e-15);
    EXPECT_NEAR(m.stdev * m.stdev, var, 1e-12);
  }
}

TEST(Moments, DimensionMismatch) {
  CovarianceEstimate est;
  est.cov = Eigen::MatrixXd::Identity(3, 3);
  est.mean = Eigen::VectorXd::Zero(3);
  try {
    portfolio_moments(est, Eigen::VectorXd::Constant(2, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
}

TEST(Moments, NonNegativeVarianceAfterRegularization) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const auto est = estimate(random_sample(4, 6, rng));
    Eigen::VectorXd w(6);
    for (Eigen::Index i = 0; i < 6; ++i) w(i) = normal(rng);
    w(5) = 1.0 - w.head(5).sum();
    EXPECT_GE(w.dot(est.cov * w), 0.0);
  }
}
