#include "allocbench/report.hpp"

#include "allocbench/error.hpp"
#include "allocbench/market_data.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace allocbench::report {

using nlohmann::ordered_json;

namespace {

std::string optional_number(const std::optional<double>& v) {
  return v ? market::format_number(*v) : std::string("n/a");
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
  return buf;
}

std::string ratio(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

ordered_json optional_json(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

ordered_json manifest_json(const cli::RunManifest& m) {
  ordered_json j;
  j["mode"] = std::string(cli::mode_name(m.mode));
  j["data"] = m.data_path;
  j["strategies"] = m.strategies;
  j["classical_window"] = m.classical_window;
  j["drl_window"] = m.drl_window;
  j["classical_cost"] = m.classical_cost;
  j["drl_cost"] = m.drl_cost;
  j["train_fraction"] = m.train_fraction;
  j["seed_base"] = m.seed_base;
  j["n_runs"] = m.n_runs;
  j["seeds"] = m.seeds();
  j["output_dir"] = m.output_dir;
  j["allow_short"] = m.allow_short;
  j["risk_free_rate"] = m.risk_free_rate;
  j["steps"] = m.steps ? ordered_json(*m.steps) : ordered_json(nullptr);
  return j;
}

std::vector<double> cumulative_curve(const backtest::BacktestResult& r) {
  std::vector<double> out;
  out.reserve(r.equity_curve.size());
  for (double v : r.equity_curve) out.push_back(v / r.equity_curve.front() - 1.0);
  return out;
}

void check_aligned(const std::vector<const backtest::BacktestResult*>& runs) {
  require(!runs.empty(), ErrorKind::Validation, "no runs to aggregate");
  for (const auto* r : runs) {
    require(r->dates == runs.front()->dates, ErrorKind::Validation, "runs cover different dates");
  }
}

}  // namespace

metrics::MetricsReport evaluate(const backtest::BacktestResult& result, double rf_daily) {
  return metrics::full_report(result.daily_returns, rf_daily);
}

void write_cumulative_csv(std::ostream& out, const backtest::BacktestResult& result) {
  out << "date,cumulative_return\n";
  const auto cum = cumulative_curve(result);
  for (std::size_t t = 0; t < cum.size(); ++t) {
    out << market::format_date(result.dates[t]) << ',' << market::format_number(cum[t]) << '\n';
  }
}

void write_weights_csv(std::ostream& out, const backtest::BacktestResult& result,
                       const std::vector<std::string>& tickers) {
  out << "date";
  for (const auto& t : tickers) out << ',' << t;
  out << '\n';
  for (std::size_t k = 0; k < result.weights_history.size(); ++k) {
    const auto& w = result.weights_history[k];
    require(static_cast<std::size_t>(w.size()) == tickers.size(), ErrorKind::Validation,
            "weights row does not match ticker count");
    out << market::format_date(result.weight_dates[k]);
    for (Eigen::Index i = 0; i < w.size(); ++i) out << ',' << market::format_number(w(i));
    out << '\n';
  }
}

void write_cumulative_stats_csv(std::ostream& out, const std::vector<const backtest::BacktestResult*>& runs) {
  check_aligned(runs);
  std::vector<std::vector<double>> curves;
  for (const auto* r : runs) curves.push_back(cumulative_curve(*r));
  out << "date,mean,stdev,min,max\n";
  const double n = static_cast<double>(curves.size());
  for (std::size_t t = 0; t < curves.front().size(); ++t) {
    double mean = 0.0;
    double lo = curves.front()[t];
    double hi = lo;
    for (const auto& c : curves) {
      mean += c[t];
      lo = std::min(lo, c[t]);
      hi = std::max(hi, c[t]);
    }
    mean /= n;
    std::optional<double> sd;
    if (curves.size() >= 2) {
      double ss = 0.0;
      for (const auto& c : curves) ss += (c[t] - mean) * (c[t] - mean);
      sd = std::sqrt(ss / (n - 1.0));
    }
    out << market::format_date(runs.front()->dates[t]) << ',' << market::format_number(mean) << ','
        << optional_number(sd) << ',' << market::format_number(lo) << ',' << market::format_number(hi) << '\n';
  }
}

void write_mean_weights_csv(std::ostream& out, const std::vector<const backtest::BacktestResult*>& runs,
                            const std::vector<std::string>& tickers) {
  check_aligned(runs);
  out << "date";
  for (const auto& t : tickers) out << ',' << t;
  out << '\n';
  const auto& first = *runs.front();
  for (std::size_t k = 0; k < first.weights_history.size(); ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(first.weights_history[k].size());
    for (const auto* r : runs) mean += r->weights_history[k];
    mean /= static_cast<double>(runs.size());
    out << market::format_date(first.weight_dates[k]);
    for (Eigen::Index i = 0; i < mean.size(); ++i) out << ',' << market::format_number(mean(i));
    out << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<StrategyRow>& rows) {
  out << "strategy,block,seed,annual_return,cumulative_return,annual_volatility,sharpe_ratio,calmar_ratio,stability,"
         "max_drawdown\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.strategy << ',' << r.block << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ','
        << market::format_number(m.annual_return) << ',' << market::format_number(m.cumulative_return) << ','
        << market::format_number(m.annual_volatility) << ',' << optional_number(m.sharpe) << ','
        << optional_number(m.calmar) << ',' << optional_number(m.stability) << ','
        << market::format_number(m.max_drawdown) << '\n';
  }
}

void write_metrics_text(std::ostream& out, const std::vector<StrategyRow>& rows) {
  const std::vector<std::string> header = {"Strategy", "Block", "Seed", "Annual return (%)", "Cumulative returns (%)",
                                           "Annual volatility (%)", "Sharpe ratio", "Calmar ratio", "Stability",
                                           "Max drawdown (%)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    cells.push_back({r.strategy, r.block, r.seed ? std::to_string(*r.seed) : "-", percent(m.annual_return),
                     percent(m.cumulative_return), percent(m.annual_volatility), ratio(m.sharpe), ratio(m.calmar),
                     ratio(m.stability), percent(m.max_drawdown)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      if (c < 2) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  std::string last_block;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k > 0 && rows[k].block != last_block) out << '\n';
    last_block = rows[k].block;
    emit(cells[k]);
  }
}

std::string render_json(const ReportDocument& doc) {
  ordered_json j;
  j["manifest"] = manifest_json(doc.manifest);
  ordered_json evaluation;
  evaluation["start"] = doc.evaluation_start ? ordered_json(*doc.evaluation_start) : ordered_json(nullptr);
  evaluation["end"] = doc.evaluation_end ? ordered_json(*doc.evaluation_end) : ordered_json(nullptr);
  j["evaluation"] = evaluation;

  ordered_json strategies = ordered_json::array();
  for (const auto& r : doc.rows) {
    ordered_json s;
    s["id"] = r.id;
    s["strategy"] = r.strategy;
    s["block"] = r.block;
    s["seed"] = r.seed ? ordered_json(*r.seed) : ordered_json(nullptr);
    ordered_json m;
    m["annual_return"] = r.metrics.annual_return;
    m["cumulative_return"] = r.metrics.cumulative_return;
    m["annual_volatility"] = r.metrics.annual_volatility;
    m["sharpe_ratio"] = optional_json(r.metrics.sharpe);
    m["calmar_ratio"] = optional_json(r.metrics.calmar);
    m["stability"] = optional_json(r.metrics.stability);
    m["max_drawdown"] = r.metrics.max_drawdown;
    s["metrics"] = m;
    s["files"] = {{"cumulative", r.cumulative_file}, {"weights", r.weights_file}};
    s["warnings"] = r.warnings;
    strategies.push_back(s);
  }
  j["strategies"] = strategies;

  ordered_json stats = ordered_json::array();
  for (const auto& p : doc.protocol_stats) {
    ordered_json s;
    s["algorithm"] = p.algorithm;
    s["runs"] = p.runs;
    s["failures"] = p.failures;
    s["mean_cumulative_return"] = optional_json(p.mean_cumulative_return);
    s["stdev_cumulative_return"] = optional_json(p.stdev_cumulative_return);
    s["best_seed"] = p.best_seed ? ordered_json(*p.best_seed) : ordered_json(nullptr);
    s["worst_seed"] = p.worst_seed ? ordered_json(*p.worst_seed) : ordered_json(nullptr);
    s["errors"] = p.errors;
    stats.push_back(s);
  }
  j["protocol_stats"] = stats;

  if (!doc.training.empty()) {
    ordered_json training = ordered_json::array();
    for (const auto& t : doc.training) {
      training.push_back({{"algorithm", t.algorithm},
                          {"seed", t.seed},
                          {"checkpoint", t.checkpoint_file},
                          {"training_log", t.log_file},
                          {"episodes", t.episodes}});
    }
    j["training"] = training;
  }
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

void write_report(const std::filesystem::path& dir, const ReportDocument& doc) {
  if (!doc.rows.empty()) {
    std::ostringstream csv;
    write_metrics_csv(csv, doc.rows);
    write_text_file(dir / "metrics.csv", csv.str());
    std::ostringstream txt;
    write_metrics_text(txt, doc.rows);
    write_text_file(dir / "metrics.txt", txt.str());
  }
  write_text_file(dir / "report.json", render_json(doc));
}

}  // namespace allocbench::report
