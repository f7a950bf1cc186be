#include "allocbench/backtest.hpp"

#include "allocbench/error.hpp"
#include "allocbench/estimation.hpp"
#include "allocbench/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

namespace allocbench::backtest {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

bool is_solver_failure(ErrorKind kind) {
  return kind == ErrorKind::Infeasible || kind == ErrorKind::Numerical || kind == ErrorKind::Convergence ||
         kind == ErrorKind::NoTangency;
}

}  // namespace

BacktestResult run_classical(classical::Strategy strategy, const market::PriceFrame& frame, std::size_t window,
                             const classical::SolverConfig& cfg, double initial_value, double cost_rate) {
  cfg.validate();
  require(window >= 2, ErrorKind::Validation, "estimation window must be at least 2");
  require(initial_value > 0.0 && cost_rate >= 0.0, ErrorKind::Validation, "invalid initial value or cost rate");
  if (frame.rows() <= window + 1) {
    fail(ErrorKind::InsufficientData, "classical backtest needs more than " + std::to_string(window + 1) +
                                          " price rows, found " + std::to_string(frame.rows()));
  }
  const auto n = static_cast<Index>(frame.assets());
  const market::ReturnsFrame returns = market::to_returns(frame);
  const auto& p = frame.prices();
  const auto& dates = frame.dates();

  BacktestResult out;
  out.strategy_id = std::string(classical::strategy_name(strategy));
  double value = initial_value;
  VectorXd held = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  VectorXd previous_target = held;
  out.dates.push_back(dates[window]);
  out.equity_curve.push_back(value);

  for (std::size_t d = window; d + 1 < frame.rows(); ++d) {
    VectorXd target;
    if (strategy == classical::Strategy::EqualWeight) {
      target = classical::equal_weight(frame.assets()).values();
    } else {
      try {
        const auto est = estimation::rolling_estimate(returns, d, window);
        target = classical::solve(strategy, est, cfg).values();
      } catch (const Error& e) {
        if (!is_solver_failure(e.kind())) {
          throw Error(e.kind(), market::format_date(dates[d]) + ": " + e.what());
        }
        target = previous_target;
        out.warnings.push_back(market::format_date(dates[d]) + ": " + std::string(to_string(e.kind())) + ": " +
                               e.what() + "; holding previous weights");
      }
    }
    const double traded = value * (target - held).cwiseAbs().sum();
    const double cost = cost_rate * traded;
    const VectorXd gross = (p.row(static_cast<Index>(d) + 1).array() / p.row(static_cast<Index>(d)).array()).matrix().transpose();
    const double growth = target.dot(gross);
    const double next = (value - cost) * growth;

    out.weight_dates.push_back(dates[d]);
    out.weights_history.push_back(target);
    out.turnover_history.push_back(traded / value);
    out.daily_returns.push_back(next / value - 1.0);
    out.dates.push_back(dates[d + 1]);
    out.equity_curve.push_back(next);

    held = target.cwiseProduct(gross) / growth;
    previous_target = target;
    value = next;
  }
  return out;
}

BacktestResult run_agent(const agents::Agent& agent, const market::PriceFrame& frame, const env::EnvConfig& env_cfg) {
  require(static_cast<std::size_t>(1 + (env_cfg.window + 1) * frame.assets()) == agent.observation_size(),
          ErrorKind::Validation, "agent observation size does not match the frame and window");
  std::mt19937_64 unused(0);
  BacktestResult out = env::run_episode(frame, env_cfg, [&](const VectorXd& obs) {
    return agent.act(obs, true, unused);
  });
  out.strategy_id = std::string(agents::algorithm_name(agent.algorithm()));
  out.seed = agent.config().seed;
  return out;
}

market::PriceFrame evaluation_frame(const market::PriceFrame& frame, std::size_t boundary, std::size_t window) {
  if (boundary + 1 < window) {
    fail(ErrorKind::InsufficientData, "lookback window " + std::to_string(window) +
                                          " reaches before the first price row");
  }
  return frame.slice(boundary + 1 - window, frame.rows());
}

std::size_t worker_count(std::size_t requested, std::size_t tasks) {
  std::size_t n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("ALLOC_BENCH_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, tasks));
}

ProtocolSummary run_protocol(const market::PriceFrame& frame, const market::SplitSpec& split,
                             const std::vector<agents::AgentConfig>& agent_cfgs,
                             const classical::SolverConfig& solver_cfg, const env::EnvConfig& env_cfg,
                             std::size_t n_runs, const ProtocolOptions& options) {
  require(n_runs >= 1, ErrorKind::Validation, "n_runs must be at least 1");
  solver_cfg.validate();
  env_cfg.validate();
  for (const auto& cfg : agent_cfgs) cfg.validate();

  ProtocolSummary summary;
  const auto [train_frame, test_frame] = market::split(frame, split);
  summary.boundary = train_frame.rows();
  const market::PriceFrame drl_frame = evaluation_frame(frame, summary.boundary, env_cfg.window);

  // Tasks: classical strategies first, then (config, run) pairs.
  const std::size_t n_classical = options.strategies.size();
  const std::size_t n_tasks = n_classical + agent_cfgs.size() * n_runs;
  summary.classical.resize(n_classical);
  std::vector<RunRecord> records(agent_cfgs.size() * n_runs);
  std::vector<std::exception_ptr> errors(n_tasks);

  auto run_task = [&](std::size_t task) {
    try {
      if (task < n_classical) {
        const auto classical_frame = evaluation_frame(frame, summary.boundary, options.classical_window);
        summary.classical[task] =
            run_classical(options.strategies[task], classical_frame, options.classical_window, solver_cfg);
        return;
      }
      const std::size_t k = task - n_classical;
      agents::AgentConfig cfg = agent_cfgs[k / n_runs];
      cfg.seed += k % n_runs;
      RunRecord& rec = records[k];
      rec.algorithm = cfg.algorithm;
      rec.seed = cfg.seed;
      try {
        const auto agent = agents::train(cfg, train_frame, env_cfg);
        rec.training_log = agent->episode_rewards;
        rec.result = run_agent(*agent, drl_frame, env_cfg);
        rec.cumulative_return = metrics::cumulative_return(rec.result->daily_returns);
      } catch (const TrainingDiverged& e) {
        rec.error = e.what();
        rec.diverged_step = e.step();
      } catch (const Error& e) {
        rec.error = e.what();
      }
    } catch (...) {
      errors[task] = std::current_exception();
    }
  };

  const std::size_t workers = worker_count(options.threads, n_tasks);
  if (workers <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t c = 0; c < agent_cfgs.size(); ++c) {
    AlgorithmSummary s;
    s.algorithm = agent_cfgs[c].algorithm;
    std::vector<double> cums;
    for (std::size_t r = 0; r < n_runs; ++r) {
      RunRecord& rec = records[c * n_runs + r];
      if (!rec.result) {
        ++s.failures;
      } else {
        const std::size_t idx = s.runs.size();
        if (!s.best || rec.cumulative_return > s.runs[*s.best].cumulative_return) s.best = idx;
        if (!s.worst || rec.cumulative_return < s.runs[*s.worst].cumulative_return) s.worst = idx;
        cums.push_back(rec.cumulative_return);
      }
      s.runs.push_back(std::move(rec));
    }
    if (!cums.empty()) {
      double mean = 0.0;
      for (double v : cums) mean += v;
      mean /= static_cast<double>(cums.size());
      s.mean_cumulative = mean;
      if (cums.size() >= 2) {
        double ss = 0.0;
        for (double v : cums) ss += (v - mean) * (v - mean);
        s.stdev_cumulative = std::sqrt(ss / static_cast<double>(cums.size() - 1));
      }
    }
    summary.algorithms.push_back(std::move(s));
  }
  return summary;
}

}  // namespace allocbench::backtest
