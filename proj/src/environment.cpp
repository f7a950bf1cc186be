#include "allocbench/environment.hpp"

#include "allocbench/error.hpp"

#include <cmath>
#include <string>

namespace allocbench::env {

using Eigen::Index;
using Eigen::VectorXd;

void EnvConfig::validate() const {
  require(std::isfinite(initial_value) && initial_value > 0.0, ErrorKind::Validation,
          "initial value must be positive");
  require(cost_rate >= 0.0 && cost_rate <= 0.1, ErrorKind::Validation, "cost rate must lie in [0, 0.1]");
  require(window >= 1, ErrorKind::Validation, "observation window must be at least 1");
}

Environment::Environment(market::PriceFrame frame, EnvConfig cfg) : frame_(std::move(frame)), cfg_(cfg) {
  cfg_.validate();
  if (frame_.rows() < cfg_.window + 2) {
    fail(ErrorKind::InsufficientData, "environment needs at least " + std::to_string(cfg_.window + 2) +
                                          " price rows, found " + std::to_string(frame_.rows()));
  }
}

VectorXd Environment::observe(std::size_t day, double value, const VectorXd& weights) const {
  const auto n = static_cast<Index>(assets());
  const auto w = static_cast<Index>(cfg_.window);
  const auto& p = frame_.prices();
  VectorXd obs(1 + (w + 1) * n);
  obs(0) = value / cfg_.initial_value;
  for (Index k = 0; k < w; ++k) {
    const Index row = static_cast<Index>(day) - w + 1 + k;
    obs.segment(1 + k * n, n) = (p.row(row).array() / p.row(row - 1).array()).matrix().transpose();
  }
  obs.tail(n) = weights;
  return obs;
}

EnvState Environment::reset() const {
  const auto n = static_cast<Index>(assets());
  EnvState s;
  s.day_index = cfg_.window;
  s.value = cfg_.initial_value;
  s.weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  s.observation = observe(s.day_index, s.value, s.weights);
  return s;
}

Transition Environment::step(const EnvState& state, const VectorXd& action) const {
  const auto n = static_cast<Index>(assets());
  require(action.size() == n, ErrorKind::Validation,
          "action length " + std::to_string(action.size()) + " does not match " + std::to_string(n) + " assets");
  require(action.allFinite(), ErrorKind::Validation, "action has non-finite entries");
  if (state.day_index >= last_day()) fail(ErrorKind::EpisodeEnded, "cannot step past the final priced day");

  const VectorXd target = softmax(action);
  const double traded = (state.value * target - state.value * state.weights).cwiseAbs().sum();
  const double cost = cfg_.cost_rate * traded;

  const auto& p = frame_.prices();
  const auto today = static_cast<Index>(state.day_index);
  const VectorXd gross = (p.row(today + 1).array() / p.row(today).array()).matrix().transpose();
  const double growth = target.dot(gross);

  Transition tr;
  tr.state = state;
  tr.action = WeightVector::from_unchecked(target);
  tr.cost = cost;
  tr.turnover = traded / state.value;
  tr.next_state.day_index = state.day_index + 1;
  tr.next_state.value = (state.value - cost) * growth;
  tr.next_state.weights = target.cwiseProduct(gross) / growth;
  tr.next_state.observation = observe(tr.next_state.day_index, tr.next_state.value, tr.next_state.weights);
  tr.reward = tr.next_state.value - state.value;
  tr.done = tr.next_state.day_index == last_day();
  return tr;
}

BacktestResult run_episode(const market::PriceFrame& frame, const EnvConfig& cfg, const Policy& policy) {
  const Environment env(frame, cfg);
  BacktestResult out;
  EnvState state = env.reset();
  out.dates.push_back(frame.dates()[state.day_index]);
  out.equity_curve.push_back(state.value);
  while (true) {
    const Transition tr = env.step(state, policy(state.observation));
    out.weight_dates.push_back(frame.dates()[state.day_index]);
    out.weights_history.push_back(tr.action.values());
    out.turnover_history.push_back(tr.turnover);
    out.daily_returns.push_back(tr.next_state.value / state.value - 1.0);
    out.dates.push_back(frame.dates()[tr.next_state.day_index]);
    out.equity_curve.push_back(tr.next_state.value);
    state = tr.next_state;
    if (tr.done) break;
  }
  return out;
}

}  // namespace allocbench::env
