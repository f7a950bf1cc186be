#pragma once

#include "allocbench/neuro/mlp.hpp"
#include "allocbench/neuro/tape.hpp"

#include <Eigen/Core>

#include <random>

namespace allocbench::neuro {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian policy: state-dependent mean from an Mlp and a learned,
/// state-independent log standard deviation clamped to [-20, 2].
struct GaussianPolicy {
  Mlp mean;
  Eigen::VectorXd log_std;

  Eigen::VectorXd clamped_log_std() const { return log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }
  Eigen::VectorXd stdev() const { return clamped_log_std().array().exp(); }
};

struct GaussianSample {
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

/// action = mean(obs) + stdev * eps with eps ~ N(0, I).
GaussianSample gaussian_sample(const GaussianPolicy& policy, const Eigen::VectorXd& obs, std::mt19937_64& rng);

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std);

/// sum(log_std) + n/2 * log(2 pi e)
double gaussian_entropy(const Eigen::VectorXd& log_std);

/// Per-row log density of `actions` (B x n) under N(mean, diag(exp(log_std))^2);
/// mean is B x n, log_std is 1 x n. Returns B x 1.
Var gaussian_log_prob(Var mean, Var log_std, const Matrix& actions);

/// Differentiable entropy of a diagonal Gaussian with 1 x n log_std.
Var gaussian_entropy(Var log_std);

Eigen::VectorXd standard_normal(Eigen::Index n, std::mt19937_64& rng);
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace allocbench::neuro
