#pragma once

#include <Eigen/Core>

namespace allocbench::neuro {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive moment estimation over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamConfig cfg = {});

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long long steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long long t_ = 0;
};

}  // namespace allocbench::neuro
