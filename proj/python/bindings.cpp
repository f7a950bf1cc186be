#include "allocbench/agents.hpp"
#include "allocbench/backtest.hpp"
#include "allocbench/classical.hpp"
#include "allocbench/cli.hpp"
#include "allocbench/error.hpp"
#include "allocbench/estimation.hpp"
#include "allocbench/market_data.hpp"
#include "allocbench/metrics.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace allocbench;

namespace {

market::PriceFrame make_frame(const std::vector<std::string>& dates, const std::vector<std::string>& tickers,
                              const Eigen::MatrixXd& prices) {
  std::vector<market::Date> parsed;
  parsed.reserve(dates.size());
  for (const auto& d : dates) {
    market::Date day;
    if (!market::parse_date(d, day)) fail(ErrorKind::Validation, "bad date '" + d + "'");
    parsed.push_back(day);
  }
  return market::PriceFrame(std::move(parsed), tickers, prices);
}

std::vector<std::string> date_strings(const std::vector<market::Date>& dates) {
  std::vector<std::string> out;
  out.reserve(dates.size());
  for (const auto& d : dates) out.push_back(market::format_date(d));
  return out;
}

py::dict result_dict(const env::BacktestResult& r) {
  py::dict d;
  d["strategy_id"] = r.strategy_id;
  d["seed"] = r.seed ? py::object(py::int_(*r.seed)) : py::object(py::none());
  d["dates"] = date_strings(r.dates);
  d["equity_curve"] = r.equity_curve;
  d["daily_returns"] = r.daily_returns;
  d["weight_dates"] = date_strings(r.weight_dates);
  d["weights"] = r.weights_history;
  d["turnover"] = r.turnover_history;
  d["warnings"] = r.warnings;
  return d;
}

py::dict metrics_dict(const metrics::MetricsReport& m) {
  py::dict d;
  d["annual_return"] = m.annual_return;
  d["cumulative_return"] = m.cumulative_return;
  d["annual_volatility"] = m.annual_volatility;
  d["sharpe_ratio"] = m.sharpe;
  d["calmar_ratio"] = m.calmar;
  d["stability"] = m.stability;
  d["max_drawdown"] = m.max_drawdown;
  return d;
}

classical::Strategy strategy_of(const std::string& name) {
  const auto s = classical::parse_strategy(name);
  if (!s) fail(ErrorKind::Validation, "unknown classical strategy '" + name + "'");
  return *s;
}

estimation::CovarianceEstimate make_estimate(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  estimation::CovarianceEstimate est;
  est.mean = mean;
  est.cov = cov;
  return est;
}

classical::SolverConfig solver_config(bool long_only, double rf, std::optional<double> target) {
  classical::SolverConfig cfg;
  cfg.long_only = long_only;
  cfg.risk_free_rate = rf;
  cfg.target_return = target;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_allocbench, m) {
  m.doc() = "Classical portfolio optimizers, actor-critic agents and a walk-forward backtester";

  static py::exception<Error> error(m, "AllocBenchError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(to_string(e.kind())) + ": " + e.what();
      PyErr_SetString(error.ptr(), msg.c_str());
    }
  });

  py::class_<market::PriceFrame>(m, "PriceFrame")
      .def(py::init(&make_frame), py::arg("dates"), py::arg("tickers"), py::arg("prices"))
      .def_property_readonly("dates", [](const market::PriceFrame& f) { return date_strings(f.dates()); })
      .def_property_readonly("tickers", &market::PriceFrame::tickers)
      .def_property_readonly("prices", &market::PriceFrame::prices)
      .def("__len__", &market::PriceFrame::rows)
      .def("to_csv", [](const market::PriceFrame& f) {
        std::ostringstream out;
        market::write_csv(out, f);
        return out.str();
      });

  m.def("load_csv", [](const std::string& path) { return market::load_csv(path); }, py::arg("path"));
  m.def("parse_csv", [](const std::string& text) {
    std::istringstream in(text);
    return market::parse_csv(in, "<string>");
  }, py::arg("text"));
  m.def("synth_scenario", &market::synth_scenario, py::arg("name"), py::arg("assets"), py::arg("days"),
        py::arg("seed"));

  m.def("estimate", [](const Eigen::MatrixXd& sample) {
    const auto est = estimation::estimate(sample);
    return py::make_tuple(est.mean, est.cov, est.ridge);
  }, py::arg("returns"));

  m.def("solve", [](const std::string& strategy, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                    bool long_only, double rf, std::optional<double> target) {
    return classical::solve(strategy_of(strategy), make_estimate(mean, cov), solver_config(long_only, rf, target))
        .values();
  }, py::arg("strategy"), py::arg("mean"), py::arg("cov"), py::arg("long_only") = true, py::arg("rf") = 0.0,
        py::arg("target_return") = py::none());

  m.def("efficient_frontier", [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t points,
                                 bool long_only) {
    py::list out;
    for (const auto& p : classical::efficient_frontier(make_estimate(mean, cov), solver_config(long_only, 0.0, {}),
                                                       points)) {
      out.append(py::make_tuple(p.expected_return, p.stdev, p.weights.values()));
    }
    return out;
  }, py::arg("mean"), py::arg("cov"), py::arg("points"), py::arg("long_only") = true);

  m.def("risk_contributions", &classical::risk_contributions, py::arg("cov"), py::arg("weights"));
  m.def("project_to_simplex", &classical::project_to_simplex, py::arg("y"));

  m.def("cumulative_return", [](const std::vector<double>& r) { return metrics::cumulative_return(r); });
  m.def("max_drawdown", [](const std::vector<double>& r) { return metrics::max_drawdown(r); });
  m.def("sharpe_ratio", [](const std::vector<double>& r, double rf) { return metrics::sharpe_ratio(r, rf); },
        py::arg("daily"), py::arg("rf") = 0.0);
  m.def("stability", [](const std::vector<double>& r) { return metrics::stability(r); });
  m.def("full_report", [](const std::vector<double>& r, double rf) { return metrics_dict(metrics::full_report(r, rf)); },
        py::arg("daily"), py::arg("rf") = 0.0);

  m.def("run_classical", [](const std::string& strategy, const market::PriceFrame& frame, std::size_t window,
                            bool long_only, double rf) {
    return result_dict(backtest::run_classical(strategy_of(strategy), frame, window,
                                               solver_config(long_only, rf, {})));
  }, py::arg("strategy"), py::arg("frame"), py::arg("window") = backtest::kClassicalWindow,
        py::arg("long_only") = true, py::arg("rf") = 0.0);

  py::class_<agents::Agent>(m, "Agent")
      .def_property_readonly("algorithm",
                             [](const agents::Agent& a) { return std::string(agents::algorithm_name(a.algorithm())); })
      .def_property_readonly("seed", [](const agents::Agent& a) { return a.config().seed; })
      .def_property_readonly("episode_rewards", [](const agents::Agent& a) { return a.episode_rewards; })
      .def("greedy_weights", [](const agents::Agent& a, const Eigen::VectorXd& obs) {
        return agents::greedy_weights(a, obs);
      })
      .def("checkpoint", [](const agents::Agent& a) {
        std::ostringstream out(std::ios::binary);
        agents::save_agent(out, a);
        return py::bytes(out.str());
      });

  m.def("train", [](const std::string& algorithm, const market::PriceFrame& frame, std::uint64_t seed,
                    std::size_t steps, double cost, std::size_t window) {
    agents::AgentConfig cfg;
    cfg.algorithm = agents::parse_algorithm(algorithm);
    cfg.seed = seed;
    cfg.total_steps = steps;
    env::EnvConfig ecfg;
    ecfg.cost_rate = cost;
    ecfg.window = window;
    std::unique_ptr<agents::Agent> agent;
    {
      py::gil_scoped_release release;
      agent = agents::train(cfg, frame, ecfg);
    }
    return agent;
  }, py::arg("algorithm"), py::arg("frame"), py::arg("seed") = 0, py::arg("steps") = 200000,
        py::arg("cost") = 0.001, py::arg("window") = 1);

  m.def("run_agent", [](const agents::Agent& agent, const market::PriceFrame& frame, double cost, std::size_t window) {
    env::EnvConfig ecfg;
    ecfg.cost_rate = cost;
    ecfg.window = window;
    return result_dict(backtest::run_agent(agent, frame, ecfg));
  }, py::arg("agent"), py::arg("frame"), py::arg("cost") = 0.001, py::arg("window") = 1);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
