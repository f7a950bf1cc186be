#include "allocbench/neuro/gaussian.hpp"

#include "allocbench/error.hpp"

#include <cmath>
#include <numbers>

namespace allocbench::neuro {

using Eigen::Index;
using Eigen::VectorXd;

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

VectorXd standard_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(rows, cols);
  // Row-major fill order so a batch draw matches per-sample draws.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) z(r, c) = normal(rng);
  }
  return z;
}

GaussianSample gaussian_sample(const GaussianPolicy& policy, const VectorXd& obs, std::mt19937_64& rng) {
  const VectorXd mu = policy.mean.forward(obs);
  const VectorXd log_std = policy.clamped_log_std();
  require(log_std.size() == mu.size(), ErrorKind::Validation, "log-stdev length does not match policy output");
  const VectorXd eps = standard_normal(mu.size(), rng);
  GaussianSample s;
  s.action = mu + log_std.array().exp().matrix().cwiseProduct(eps);
  s.log_prob = gaussian_log_density(s.action, mu, log_std);
  return s;
}

double gaussian_log_density(const VectorXd& x, const VectorXd& mean, const VectorXd& log_std) {
  const Eigen::ArrayXd z = (x - mean).array() / log_std.array().exp();
  return (-0.5 * z.square() - log_std.array() - kHalfLog2Pi).sum();
}

double gaussian_entropy(const VectorXd& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

Var gaussian_log_prob(Var mean, Var log_std, const Matrix& actions) {
  require(mean.rows() == actions.rows() && mean.cols() == actions.cols(), ErrorKind::Validation,
          "action batch shape does not match policy mean");
  require(log_std.rows() == 1 && log_std.cols() == mean.cols(), ErrorKind::Validation, "log-stdev must be 1 x n");
  Tape& tape = *mean.tape();
  Var ls = tile_rows(log_std, mean.rows());
  Var inv_std = exp(neg(ls));
  Var z = mul(sub(tape.constant(actions), mean), inv_std);
  Var per_dim = add_scalar(sub(scale(square(z), -0.5), ls), -kHalfLog2Pi);
  return row_sum(per_dim);
}

Var gaussian_entropy(Var log_std) {
  const double n = static_cast<double>(log_std.cols());
  return add_scalar(sum(log_std), 0.5 * n * std::log(2.0 * std::numbers::pi * std::numbers::e));
}

}  // namespace allocbench::neuro
