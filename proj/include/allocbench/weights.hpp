#pragma once

#include <Eigen/Core>

#include <cstddef>

namespace allocbench {

/// Portfolio allocation fractions that sum to one.
///
/// Long-only vectors additionally have every entry >= -1e-12. Construction
/// validates the budget constraint; use `from_unchecked` only for values that
/// are known to be feasible by construction.
class WeightVector {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kNegativeTolerance = 1e-12;

  WeightVector() = default;
  explicit WeightVector(Eigen::VectorXd values, bool long_only = true);

  static WeightVector from_unchecked(Eigen::VectorXd values) {
    WeightVector w;
    w.values_ = std::move(values);
    return w;
  }

  const Eigen::VectorXd& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }

  bool is_long_only() const noexcept { return values_.size() == 0 || values_.minCoeff() >= -kNegativeTolerance; }

 private:
  Eigen::VectorXd values_;
};

/// Throws a validation error unless `w` sums to one (and is non-negative when long-only).
void check_weights(const Eigen::VectorXd& w, bool long_only);

/// Numerically stable softmax (shifts by the max before exponentiating).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace allocbench
