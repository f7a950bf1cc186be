#include "allocbench/neuro/adam.hpp"

#include "allocbench/error.hpp"

#include <cmath>

namespace allocbench::neuro {

Adam::Adam(Eigen::Index size, AdamConfig cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
  require(cfg_.learning_rate > 0.0 && cfg_.epsilon > 0.0, ErrorKind::Validation, "invalid Adam settings");
  require(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0, ErrorKind::Validation,
          "Adam decay rates must lie in [0, 1)");
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorKind::Validation,
          "Adam state size does not match parameters");
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
}

}  // namespace allocbench::neuro
