#include "allocbench/error.hpp"
#include "allocbench/weights.hpp"

#include <cmath>
#include <sstream>

namespace allocbench {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Convergence: return "convergence error";
    case ErrorKind::NoTangency: return "no tangency portfolio";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::EpisodeEnded: return "episode ended";
    case ErrorKind::TrainingDiverged: return "training diverged";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Usage: return "usage error";
  }
  return "error";
}

WeightVector::WeightVector(Eigen::VectorXd values, bool long_only) : values_(std::move(values)) {
  check_weights(values_, long_only);
}

void check_weights(const Eigen::VectorXd& w, bool long_only) {
  require(w.size() > 0, ErrorKind::Validation, "weight vector is empty");
  require(w.allFinite(), ErrorKind::Validation, "weight vector has non-finite entries");
  const double total = w.sum();
  if (std::abs(total - 1.0) > WeightVector::kSumTolerance) {
    std::ostringstream msg;
    msg << "weights sum to " << total << ", expected 1";
    fail(ErrorKind::Validation, msg.str());
  }
  if (long_only && w.minCoeff() < -WeightVector::kNegativeTolerance) {
    std::ostringstream msg;
    msg << "negative weight " << w.minCoeff() << " in long-only portfolio";
    fail(ErrorKind::Validation, msg.str());
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

}  // namespace allocbench
