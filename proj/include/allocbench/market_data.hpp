#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace allocbench::market {

using Date = std::chrono::year_month_day;

/// Parses a strict `YYYY-MM-DD` calendar date. Returns false on any deviation.
bool parse_date(std::string_view text, Date& out);
std::string format_date(const Date& date);

/// Date-aligned adjusted close prices, T rows by n assets.
///
/// Invariants (checked on construction): dates strictly increasing, every
/// price finite and strictly positive, one column per ticker.
class PriceFrame {
 public:
  PriceFrame(std::vector<Date> dates, std::vector<std::string> tickers, Eigen::MatrixXd prices);

  const std::vector<Date>& dates() const noexcept { return dates_; }
  const std::vector<std::string>& tickers() const noexcept { return tickers_; }
  const Eigen::MatrixXd& prices() const noexcept { return prices_; }

  std::size_t rows() const noexcept { return dates_.size(); }
  std::size_t assets() const noexcept { return tickers_.size(); }

  /// Rows [begin, end).
  PriceFrame slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> tickers_;
  Eigen::MatrixXd prices_;
};

/// Simple daily returns; row t is the move from price row t to t+1 and is
/// stamped with the later date.
struct ReturnsFrame {
  std::vector<Date> dates;
  Eigen::MatrixXd returns;

  std::size_t rows() const noexcept { return dates.size(); }
  std::size_t assets() const noexcept { return static_cast<std::size_t>(returns.cols()); }
};

struct SplitSpec {
  double train_fraction = 0.8;

  /// floor(train_fraction * rows)
  std::size_t boundary_index(std::size_t rows) const;
};

/// One parsed body row of the CSV dialect, with its 1-based source line.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

/// Reads the shared CSV dialect: comma separated, LF or CRLF line endings,
/// optional UTF-8 byte order mark, no quoting. Every row must have as many
/// fields as the header.
CsvTable read_csv_table(std::istream& in, const std::string& source);

PriceFrame parse_csv(std::istream& in, const std::string& source = "<stream>");
PriceFrame load_csv(const std::filesystem::path& path);

/// Writes `date,T1,...,Tn` with round-trip exact prices.
void write_csv(std::ostream& out, const PriceFrame& frame);
void write_csv(const std::filesystem::path& path, const PriceFrame& frame);

/// Shortest decimal text that parses back to the same double; used by every
/// file the toolkit emits.
std::string format_number(double value);

ReturnsFrame to_returns(const PriceFrame& frame);

std::pair<PriceFrame, PriceFrame> split(const PriceFrame& frame, const SplitSpec& spec);

struct SynthSpec {
  Eigen::VectorXd drift;        ///< expected simple return per day, per asset
  Eigen::VectorXd vol;          ///< daily log-return volatility, per asset
  Eigen::MatrixXd correlation;  ///< n x n, unit diagonal, PSD
  std::size_t days = 0;         ///< number of price rows
  std::uint64_t seed = 0;
  double initial_price = 100.0;
  Date start{std::chrono::year{2010}, std::chrono::January, std::chrono::day{4}};
};

/// Correlated geometric random walk. The daily log-return of asset i is
/// log(1 + drift_i) - vol_i^2 / 2 + vol_i * z_i with z ~ N(0, correlation),
/// so zero volatility compounds at exactly (1 + drift_i) per day. Dates are
/// consecutive weekdays from `start`.
PriceFrame synth_market(const SynthSpec& spec);

/// Preset synthetic markets: "bull", "bear", or "dominant" (asset 1 grows
/// 0.1%/day with zero volatility, the others stay flat).
PriceFrame synth_scenario(std::string_view name, std::size_t assets, std::size_t days, std::uint64_t seed);

}  // namespace allocbench::market
