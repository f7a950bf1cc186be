#pragma once

#include "allocbench/backtest.hpp"
#include "allocbench/manifest.hpp"
#include "allocbench/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace allocbench::report {

/// One line of the metrics table.
struct StrategyRow {
  std::string id;        ///< unique key, also the curve file stem
  std::string strategy;  ///< one of the nine strategy names
  std::string block;     ///< classical | best | worst | run
  std::optional<std::uint64_t> seed;
  metrics::MetricsReport metrics;
  std::string cumulative_file;  ///< relative to the output directory
  std::string weights_file;
  std::vector<std::string> warnings;
};

struct ProtocolStat {
  std::string algorithm;
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::optional<double> mean_cumulative_return;
  std::optional<double> stdev_cumulative_return;
  std::optional<std::uint64_t> best_seed;
  std::optional<std::uint64_t> worst_seed;
  std::vector<std::string> errors;
};

struct TrainingRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string checkpoint_file;
  std::string log_file;
  std::size_t episodes = 0;
};

struct ReportDocument {
  cli::RunManifest manifest;
  std::vector<StrategyRow> rows;
  std::vector<ProtocolStat> protocol_stats;
  std::vector<TrainingRecord> training;
  std::optional<std::string> evaluation_start;
  std::optional<std::string> evaluation_end;
};

metrics::MetricsReport evaluate(const backtest::BacktestResult& result, double rf_daily);

/// `date,cumulative_return`; one row per equity point, the first being 0.
void write_cumulative_csv(std::ostream& out, const backtest::BacktestResult& result);
/// `date,<tickers>`; one row per decision day.
void write_weights_csv(std::ostream& out, const backtest::BacktestResult& result,
                       const std::vector<std::string>& tickers);
/// Per-date mean, sample stdev, min and max of cumulative return across runs.
void write_cumulative_stats_csv(std::ostream& out, const std::vector<const backtest::BacktestResult*>& runs);
/// Per-date mean weights across runs.
void write_mean_weights_csv(std::ostream& out, const std::vector<const backtest::BacktestResult*>& runs,
                            const std::vector<std::string>& tickers);

/// Fractions, `n/a` for undefined metrics.
void write_metrics_csv(std::ostream& out, const std::vector<StrategyRow>& rows);
/// Aligned text table with percentages.
void write_metrics_text(std::ostream& out, const std::vector<StrategyRow>& rows);
std::string render_json(const ReportDocument& doc);

/// Writes the table files and report.json into `dir`.
void write_report(const std::filesystem::path& dir, const ReportDocument& doc);

/// Writes `text` to `path`, creating parent directories; I/O error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace allocbench::report
