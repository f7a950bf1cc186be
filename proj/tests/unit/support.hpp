#pragma once

#include "allocbench/market_data.hpp"
#include "allocbench/neuro/mlp.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <random>
#include <string>

namespace allocbench::oracle {

/// Random symmetric positive-definite matrix A A' / n + floor * I.
Eigen::MatrixXd random_spd(std::size_t n, std::mt19937_64& rng, double floor = 1e-3);

/// Frame over consecutive weekdays from 2020-01-06 with tickers A0, A1, ...
market::PriceFrame frame_from_prices(const Eigen::MatrixXd& prices);

/// Fresh empty directory under the system temp path.
std::filesystem::path fresh_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

/// Worst coordinate of a central-difference comparison.
struct GradientReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_abs = 0.0;
  double worst_rel = 0.0;
};

/// Compares Mlp::gradient of 0.5 * ||net(x) - y||^2 with central differences
/// (step h) on every parameter. A coordinate passes when it is within
/// `rel` relative or `abs` absolute error.
GradientReport check_mlp_gradient(const neuro::Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                  double h = 1e-5, double rel = 1e-4, double abs = 1e-7);

bool gradient_close(double analytic, double numeric, double rel, double abs);

/// Loop-based forward pass reading the flat parameter layout directly.
Eigen::VectorXd naive_forward(const neuro::Mlp& net, const Eigen::VectorXd& x);

Eigen::VectorXd naive_softmax(const Eigen::VectorXd& z);

/// Critic value on (observation, softmax(raw action)).
double naive_q(const neuro::Mlp& critic, const Eigen::VectorXd& obs, const Eigen::VectorXd& raw_action);

}  // namespace allocbench::oracle
