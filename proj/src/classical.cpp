#include "allocbench/classical.hpp"

#include "allocbench/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

namespace allocbench::classical {

using estimation::CovarianceEstimate;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kSigmaFloor = 1e-18;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void check_estimate(const CovarianceEstimate& est) {
  const Index n = est.mean.size();
  require(n >= 1, ErrorKind::Validation, "estimate has no assets");
  require(est.cov.rows() == n && est.cov.cols() == n, ErrorKind::Validation, "covariance shape does not match mean");
  require(est.mean.allFinite() && est.cov.allFinite(), ErrorKind::Numerical, "estimate has non-finite entries");
}

Eigen::LLT<MatrixXd> factor_pd(const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  require(llt.info() == Eigen::Success, ErrorKind::Numerical, "covariance matrix is not positive definite");
  return llt;
}

std::vector<Index> support_of(const VectorXd& x) {
  std::vector<Index> s;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) > 0.0) s.push_back(i);
  }
  return s;
}

MatrixXd principal(const MatrixXd& m, const std::vector<Index>& idx) {
  const auto k = static_cast<Index>(idx.size());
  MatrixXd out(k, k);
  for (Index r = 0; r < k; ++r) {
    for (Index c = 0; c < k; ++c) out(r, c) = m(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
  }
  return out;
}

/// Projected gradient descent on the simplex with Armijo backtracking and
/// Barzilai-Borwein trial steps. `polish` may return an exact solution once
/// the support has settled.
VectorXd projected_descent(const std::function<double(const VectorXd&)>& value,
                           const std::function<VectorXd(const VectorXd&)>& gradient,
                           const std::function<std::optional<VectorXd>(const VectorXd&)>& polish, VectorXd x,
                           const SolverConfig& cfg, const char* what) {
  double fx = value(x);
  VectorXd g = gradient(x);
  double step = 1.0 / std::max(g.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double residual = std::numeric_limits<double>::infinity();

  const auto stationarity = [](const VectorXd& point, const VectorXd& grad) {
    const double scale = std::max(grad.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return (point - project_to_simplex(point - grad / scale)).cwiseAbs().maxCoeff();
  };

  for (int it = 0; it < cfg.max_iter; ++it) {
    residual = stationarity(x, g);
    if (residual <= cfg.tol) return x;
    if (it % 4 == 0) {
      if (auto exact = polish(x)) return *exact;
    }

    double t = step;
    VectorXd next = x;
    double f_next = fx;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      next = project_to_simplex(x - t * g);
      f_next = value(next);
      if (f_next <= fx + kArmijo * g.dot(next - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || next == x) break;

    VectorXd g_next = gradient(next);
    const VectorXd s = next - x;
    const double sy = s.dot(g_next - g);
    step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * t;
    x = std::move(next);
    g = std::move(g_next);
    fx = f_next;
  }

  if (auto exact = polish(x)) return *exact;
  residual = stationarity(x, g);
  if (residual <= cfg.tol) return x;
  fail(ErrorKind::Convergence, std::string(what) + " did not converge: stationarity residual " + fmt(residual) +
                                   " after " + std::to_string(cfg.max_iter) + " iterations");
}

/// Exact minimum-variance weights restricted to the support of `x`, accepted
/// only when they satisfy the simplex KKT conditions.
std::optional<VectorXd> polish_min_variance(const MatrixXd& cov, const VectorXd& x, double tol) {
  const auto s = support_of(x);
  if (s.empty()) return std::nullopt;
  Eigen::LDLT<MatrixXd> ldlt(principal(cov, s));
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const VectorXd y = ldlt.solve(VectorXd::Ones(static_cast<Index>(s.size())));
  if (!y.allFinite() || y.minCoeff() <= 0.0) return std::nullopt;
  VectorXd w = VectorXd::Zero(x.size());
  const double total = y.sum();
  for (std::size_t k = 0; k < s.size(); ++k) w(s[k]) = y(static_cast<Index>(k)) / total;
  const VectorXd g = cov * w;
  const double lambda = w.dot(g);
  const double scale = g.cwiseAbs().maxCoeff();
  for (Index i = 0; i < w.size(); ++i) {
    if (w(i) == 0.0 && g(i) - lambda < -tol * scale) return std::nullopt;
  }
  return w;
}

VectorXd clean_simplex(VectorXd w) {
  w = w.cwiseMax(0.0);
  return w / w.sum();
}

VectorXd min_variance_shorting(const CovarianceEstimate& est, const SolverConfig& cfg) {
  const Index n = est.mean.size();
  if (!cfg.target_return) {
    const auto llt = factor_pd(est.cov);
    const VectorXd y = llt.solve(VectorXd::Ones(n));
    const double total = y.sum();
    require(std::isfinite(total) && total > 0.0, ErrorKind::Numerical, "singular minimum-variance system");
    return y / total;
  }
  MatrixXd kkt = MatrixXd::Zero(n + 2, n + 2);
  kkt.topLeftCorner(n, n) = est.cov;
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(0, n + 1, n, 1) = est.mean;
  kkt.block(n, 0, 1, n).setOnes();
  kkt.block(n + 1, 0, 1, n) = est.mean.transpose();
  VectorXd rhs = VectorXd::Zero(n + 2);
  rhs(n) = 1.0;
  rhs(n + 1) = *cfg.target_return;
  Eigen::FullPivLU<MatrixXd> lu(kkt);
  require(lu.isInvertible(), ErrorKind::Numerical,
          "target-return system is singular (asset means are all equal or covariance is degenerate)");
  const VectorXd sol = lu.solve(rhs);
  require(sol.allFinite(), ErrorKind::Numerical, "target-return system produced non-finite weights");
  return sol.head(n);
}

VectorXd min_variance_target_long_only(const CovarianceEstimate& est, const SolverConfig& cfg) {
  const Index n = est.mean.size();
  const double target = *cfg.target_return;
  Index lo = 0;
  Index hi = 0;
  est.mean.minCoeff(&lo);
  est.mean.maxCoeff(&hi);
  const double r_lo = est.mean(lo);
  const double r_hi = est.mean(hi);
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(r_lo), std::abs(r_hi)));
  if (target < r_lo - slack || target > r_hi + slack) {
    fail(ErrorKind::Infeasible, "target return " + fmt(target) + " outside attainable long-only range [" + fmt(r_lo) +
                                    ", " + fmt(r_hi) + "]");
  }
  VectorXd x0 = VectorXd::Zero(n);
  if (r_hi - r_lo <= slack) {
    x0(lo) = 1.0;
  } else {
    const double theta = std::clamp((r_hi - target) / (r_hi - r_lo), 0.0, 1.0);
    x0(lo) = theta;
    x0(hi) += 1.0 - theta;
  }
  MatrixXd a(2, n);
  a.row(0).setOnes();
  a.row(1) = est.mean.transpose();
  const Eigen::Vector2d b(1.0, target);
  const VectorXd w = solve_nonnegative_qp(est.cov, VectorXd::Zero(n), a, b, x0, cfg.max_iter, cfg.tol);
  return w.cwiseMax(0.0);
}

}  // namespace

void SolverConfig::validate() const {
  require(tol > 0.0, ErrorKind::Validation, "solver tolerance must be positive");
  require(max_iter >= 1, ErrorKind::Validation, "solver iteration cap must be at least 1");
  require(std::isfinite(risk_free_rate), ErrorKind::Validation, "risk-free rate must be finite");
  require(!target_return || std::isfinite(*target_return), ErrorKind::Validation, "target return must be finite");
}

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::Tangency: return "tangency";
    case Strategy::MinVariance: return "minvariance";
    case Strategy::RiskParity: return "riskparity";
    case Strategy::EqualWeight: return "equalweight";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
  for (auto s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y) {
  const Index n = y.size();
  VectorXd u = y;
  std::sort(u.data(), u.data() + n, std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumulative += u(j);
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u(j) - candidate > 0.0) theta = candidate;
  }
  return (y.array() - theta).cwiseMax(0.0).matrix();
}

Eigen::VectorXd risk_contributions(const Eigen::MatrixXd& cov, const Eigen::VectorXd& w) {
  return w.cwiseProduct(cov * w);
}

double portfolio_sharpe(const CovarianceEstimate& est, const Eigen::VectorXd& w, double rf) {
  const double sigma = std::max(std::sqrt(std::max(w.dot(est.cov * w), 0.0)), kSigmaFloor);
  return (w.dot(est.mean) - rf) / sigma;
}

Eigen::VectorXd solve_nonnegative_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b, Eigen::VectorXd x, int max_iter, double tol) {
  const Index n = q.rows();
  const Index m = a.rows();
  require(x.size() == n && c.size() == n && a.cols() == n && b.size() == m, ErrorKind::Validation,
          "active-set QP dimension mismatch");
  require(x.minCoeff() >= 0.0 && (a * x - b).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + b.cwiseAbs().maxCoeff()),
          ErrorKind::Validation, "active-set QP start point is infeasible");

  std::vector<bool> fixed(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) fixed[static_cast<std::size_t>(i)] = x(i) <= 0.0;

  for (int it = 0; it < max_iter; ++it) {
    std::vector<Index> free;
    for (Index i = 0; i < n; ++i) {
      if (!fixed[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    const auto k = static_cast<Index>(free.size());
    const VectorXd g = q * x + c;

    MatrixXd kkt = MatrixXd::Zero(k + m, k + m);
    VectorXd rhs = VectorXd::Zero(k + m);
    for (Index r = 0; r < k; ++r) {
      const Index fr = free[static_cast<std::size_t>(r)];
      for (Index col = 0; col < k; ++col) kkt(r, col) = q(fr, free[static_cast<std::size_t>(col)]);
      for (Index j = 0; j < m; ++j) {
        kkt(r, k + j) = -a(j, fr);
        kkt(k + j, r) = a(j, fr);
      }
      rhs(r) = -g(fr);
    }
    const VectorXd sol = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(kkt).solve(rhs);
    const VectorXd p_free = sol.head(k);
    const VectorXd lambda = sol.tail(m);

    const double xscale = 1.0 + x.cwiseAbs().maxCoeff();
    if (k == 0 || p_free.cwiseAbs().maxCoeff() <= 1e-13 * xscale) {
      // Stationary on the current face: release the most negative multiplier.
      const double gscale = std::max(g.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
      Index release = -1;
      double worst = -tol * gscale;
      for (Index i = 0; i < n; ++i) {
        if (!fixed[static_cast<std::size_t>(i)]) continue;
        const double mu = g(i) - a.col(i).dot(lambda);
        if (mu < worst) {
          worst = mu;
          release = i;
        }
      }
      if (release < 0) return x;
      fixed[static_cast<std::size_t>(release)] = false;
      continue;
    }

    double alpha = 1.0;
    Index blocking = -1;
    for (Index r = 0; r < k; ++r) {
      const Index i = free[static_cast<std::size_t>(r)];
      if (p_free(r) < 0.0) {
        const double limit = -x(i) / p_free(r);
        if (limit < alpha) {
          alpha = limit;
          blocking = i;
        }
      }
    }
    for (Index r = 0; r < k; ++r) x(free[static_cast<std::size_t>(r)]) += alpha * p_free(r);
    if (blocking >= 0) {
      x(blocking) = 0.0;
      fixed[static_cast<std::size_t>(blocking)] = true;
    }
    x = x.cwiseMax(0.0);
  }
  fail(ErrorKind::Convergence, "active-set QP hit the iteration cap of " + std::to_string(max_iter));
}

WeightVector equal_weight(std::size_t n) {
  require(n >= 1, ErrorKind::Validation, "equal weight needs at least one asset");
  return WeightVector::from_unchecked(VectorXd::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n)));
}

WeightVector solve_min_variance(const CovarianceEstimate& est, const SolverConfig& cfg) {
  cfg.validate();
  check_estimate(est);
  const Index n = est.mean.size();
  if (!cfg.long_only) return WeightVector(min_variance_shorting(est, cfg), false);
  if (cfg.target_return) return WeightVector(clean_simplex(min_variance_target_long_only(est, cfg)));

  factor_pd(est.cov);
  const auto& cov = est.cov;
  const VectorXd w = projected_descent(
      [&](const VectorXd& x) { return 0.5 * x.dot(cov * x); }, [&](const VectorXd& x) { return VectorXd(cov * x); },
      [&](const VectorXd& x) { return polish_min_variance(cov, x, cfg.tol); }, VectorXd::Constant(n, 1.0 / n), cfg,
      "minimum-variance solver");
  return WeightVector(clean_simplex(w));
}

WeightVector solve_tangency(const CovarianceEstimate& est, const SolverConfig& cfg) {
  cfg.validate();
  check_estimate(est);
  const Index n = est.mean.size();
  const VectorXd excess = est.mean.array() - cfg.risk_free_rate;

  if (!cfg.long_only) {
    const auto llt = factor_pd(est.cov);
    const VectorXd z = llt.solve(excess);
    const double total = z.sum();
    require(std::isfinite(total), ErrorKind::Numerical, "singular tangency system");
    if (!(total > 0.0)) {
      fail(ErrorKind::NoTangency, "no tangency portfolio: the maximal-Sharpe direction has non-positive budget");
    }
    return WeightVector(z / total, false);
  }

  if (!(excess.maxCoeff() > 0.0)) {
    fail(ErrorKind::NoTangency, "no asset has mean return above the risk-free rate " + fmt(cfg.risk_free_rate));
  }
  factor_pd(est.cov);
  // Max Sharpe over the simplex is the convex QP min y'Cy s.t. excess'y = 1,
  // y >= 0, rescaled to unit budget.
  Index best = 0;
  excess.maxCoeff(&best);
  VectorXd y0 = VectorXd::Zero(n);
  y0(best) = 1.0 / excess(best);
  const VectorXd y = solve_nonnegative_qp(est.cov, VectorXd::Zero(n), excess.transpose(), VectorXd::Ones(1), y0,
                                          cfg.max_iter, cfg.tol);
  const double total = y.cwiseMax(0.0).sum();
  require(std::isfinite(total) && total > 0.0, ErrorKind::Numerical, "tangency QP returned a degenerate portfolio");
  return WeightVector(clean_simplex(y));
}

WeightVector solve_risk_parity(const CovarianceEstimate& est, const SolverConfig& cfg) {
  cfg.validate();
  check_estimate(est);
  const Index n = est.mean.size();
  const auto& cov = est.cov;
  factor_pd(cov);
  const double inv_n = 1.0 / static_cast<double>(n);

  const auto objective = [&](const VectorXd& x) { return 0.5 * x.dot(cov * x) - inv_n * x.array().log().sum(); };
  const auto contribution_gap = [&](const VectorXd& x) {
    return x.cwiseProduct(cov * x - inv_n * x.cwiseInverse()).cwiseAbs().maxCoeff();
  };
  const double ones_var = VectorXd::Ones(n).dot(cov * VectorXd::Ones(n));
  VectorXd x = VectorXd::Constant(n, 1.0 / std::sqrt(ones_var));
  double fx = objective(x);
  double residual = std::numeric_limits<double>::infinity();

  for (int it = 0; it < cfg.max_iter; ++it) {
    const VectorXd cx = cov * x;
    const VectorXd f = cx - inv_n * x.cwiseInverse();
    // At the root every x_i (Cx)_i equals 1/n, so this is the absolute
    // deviation of each risk contribution from its target.
    residual = x.cwiseProduct(f).cwiseAbs().maxCoeff();
    if (residual <= cfg.tol) break;

    MatrixXd jac = cov;
    jac.diagonal().array() += inv_n * x.array().square().inverse();
    Eigen::LLT<MatrixXd> llt(jac);
    require(llt.info() == Eigen::Success, ErrorKind::Numerical, "risk-parity Jacobian is not positive definite");
    const VectorXd dx = -llt.solve(f);

    double t = 1.0;
    while ((x + t * dx).minCoeff() <= 0.0 && t > 1e-30) t *= 0.5;
    const double slope = f.dot(dx);
    VectorXd next = x + t * dx;
    double f_next = objective(next);
    // Full Newton steps that shrink the gap skip the Armijo test.
    const bool newton_ok = t == 1.0 && contribution_gap(next) < residual;
    while (!newton_ok && f_next > fx + kArmijo * t * slope && t > 1e-30) {
      t *= 0.5;
      next = x + t * dx;
      f_next = objective(next);
    }
    if (next == x) break;
    x = std::move(next);
    fx = f_next;
  }
  if (!(residual <= cfg.tol)) {
    const VectorXd f = cov * x - inv_n * x.cwiseInverse();
    residual = x.cwiseProduct(f).cwiseAbs().maxCoeff();
    if (!(residual <= cfg.tol)) {
      fail(ErrorKind::Convergence, "risk-parity Newton iteration stopped with residual " + fmt(residual));
    }
  }
  return WeightVector(x / x.sum());
}

WeightVector solve(Strategy strategy, const CovarianceEstimate& est, const SolverConfig& cfg) {
  switch (strategy) {
    case Strategy::Tangency: return solve_tangency(est, cfg);
    case Strategy::MinVariance: return solve_min_variance(est, cfg);
    case Strategy::RiskParity: return solve_risk_parity(est, cfg);
    case Strategy::EqualWeight: return equal_weight(est.assets());
  }
  fail(ErrorKind::Validation, "unknown strategy");
}

std::vector<FrontierPoint> efficient_frontier(const CovarianceEstimate& est, const SolverConfig& cfg,
                                              std::size_t points) {
  require(points >= 2, ErrorKind::Validation, "efficient frontier needs at least 2 points");
  SolverConfig base = cfg;
  base.target_return.reset();
  const WeightVector mv = solve_min_variance(est, base);
  const double r_low = mv.values().dot(est.mean);
  const double r_high = std::max(est.mean.maxCoeff(), r_low);

  std::vector<FrontierPoint> out;
  out.reserve(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(points - 1);
    WeightVector w = mv;
    if (k > 0) {
      SolverConfig targeted = base;
      targeted.target_return = k + 1 == points ? r_high : r_low + frac * (r_high - r_low);
      w = solve_min_variance(est, targeted);
    }
    const auto moments = estimation::portfolio_moments(est, w);
    out.push_back(FrontierPoint{moments.expected_return, moments.stdev, std::move(w)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FrontierPoint& a, const FrontierPoint& b) { return a.expected_return < b.expected_return; });
  return out;
}

}  // namespace allocbench::classical
