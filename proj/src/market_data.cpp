#include "allocbench/market_data.hpp"

#include "allocbench/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace allocbench::market {

namespace {

bool parse_uint(std::string_view text, int& out) {
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
  return ec == std::errc{} && ptr == last;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

bool parse_date(std::string_view text, Date& out) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
  int y = 0;
  int m = 0;
  int d = 0;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
      !parse_uint(text.substr(8, 2), d)) {
    return false;
  }
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) return false;
  out = date;
  return true;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::string format_number(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

PriceFrame::PriceFrame(std::vector<Date> dates, std::vector<std::string> tickers, Eigen::MatrixXd prices)
    : dates_(std::move(dates)), tickers_(std::move(tickers)), prices_(std::move(prices)) {
  require(!tickers_.empty(), ErrorKind::Validation, "price frame has no assets");
  require(static_cast<std::size_t>(prices_.rows()) == dates_.size(), ErrorKind::Validation,
          "price matrix row count does not match date count");
  require(static_cast<std::size_t>(prices_.cols()) == tickers_.size(), ErrorKind::Validation,
          "price matrix column count does not match ticker count");
  for (std::size_t t = 1; t < dates_.size(); ++t) {
    if (!(dates_[t - 1] < dates_[t])) {
      fail(ErrorKind::Validation, "dates not strictly increasing at " + format_date(dates_[t]));
    }
  }
  for (Eigen::Index t = 0; t < prices_.rows(); ++t) {
    for (Eigen::Index i = 0; i < prices_.cols(); ++i) {
      const double p = prices_(t, i);
      if (!std::isfinite(p) || p <= 0.0) {
        fail(ErrorKind::Validation, "price " + format_number(p) + " for " + tickers_[static_cast<std::size_t>(i)] +
                                        " on " + format_date(dates_[static_cast<std::size_t>(t)]) +
                                        " must be finite and positive");
      }
    }
  }
}

PriceFrame PriceFrame::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= rows(), ErrorKind::Validation, "slice out of range");
  std::vector<Date> d(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                      dates_.begin() + static_cast<std::ptrdiff_t>(end));
  Eigen::MatrixXd p = prices_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  return PriceFrame(std::move(d), tickers_, std::move(p));
}

std::size_t SplitSpec::boundary_index(std::size_t rows) const {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::Validation,
          "train fraction must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows)));
}

CsvTable read_csv_table(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail(ErrorKind::Parse, where(source, line_no) + ": expected " + std::to_string(table.header.size()) +
                                 " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(CsvRow{line_no, std::move(fields)});
  }
  require(have_header, ErrorKind::Parse, source + ": missing header row");
  return table;
}

PriceFrame parse_csv(std::istream& in, const std::string& source) {
  const CsvTable table = read_csv_table(in, source);
  if (table.header.size() < 2 || table.header.front() != "date") {
    fail(ErrorKind::Parse, where(source, 1) + ": header must be date,<ticker>,...");
  }
  std::vector<std::string> tickers(table.header.begin() + 1, table.header.end());
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    require(!tickers[i].empty(), ErrorKind::Parse, where(source, 1) + ": empty ticker name");
    for (std::size_t j = 0; j < i; ++j) {
      require(tickers[i] != tickers[j], ErrorKind::Parse, where(source, 1) + ": duplicate ticker " + tickers[i]);
    }
  }
  if (table.rows.size() < 2) {
    fail(ErrorKind::InsufficientData, source + ": need at least 2 price rows, found " +
                                          std::to_string(table.rows.size()));
  }

  struct Parsed {
    Date date;
    std::size_t line;
    std::vector<double> prices;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    Parsed p{};
    p.line = row.line;
    if (!parse_date(row.fields[0], p.date)) {
      fail(ErrorKind::Parse, where(source, row.line) + ": invalid date '" + row.fields[0] + "'");
    }
    p.prices.resize(tickers.size());
    for (std::size_t i = 0; i < tickers.size(); ++i) {
      const auto& cell = row.fields[i + 1];
      if (!parse_double(cell, p.prices[i])) {
        fail(ErrorKind::Parse, where(source, row.line) + ": malformed number '" + cell + "' for " + tickers[i]);
      }
      if (!std::isfinite(p.prices[i]) || p.prices[i] <= 0.0) {
        fail(ErrorKind::Validation, where(source, row.line) + ": price " + cell + " for " + tickers[i] +
                                        " on " + row.fields[0] + " must be finite and positive");
      }
    }
    parsed.push_back(std::move(p));
  }
  std::stable_sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) { return a.date < b.date; });
  for (std::size_t t = 1; t < parsed.size(); ++t) {
    if (parsed[t].date == parsed[t - 1].date) {
      fail(ErrorKind::Validation, where(source, parsed[t].line) + ": duplicate date " + format_date(parsed[t].date));
    }
  }

  std::vector<Date> dates;
  dates.reserve(parsed.size());
  Eigen::MatrixXd prices(static_cast<Eigen::Index>(parsed.size()), static_cast<Eigen::Index>(tickers.size()));
  for (std::size_t t = 0; t < parsed.size(); ++t) {
    dates.push_back(parsed[t].date);
    for (std::size_t i = 0; i < tickers.size(); ++i) {
      prices(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = parsed[t].prices[i];
    }
  }
  return PriceFrame(std::move(dates), std::move(tickers), std::move(prices));
}

PriceFrame load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return parse_csv(in, path.string());
}

void write_csv(std::ostream& out, const PriceFrame& frame) {
  out << "date";
  for (const auto& t : frame.tickers()) out << ',' << t;
  out << '\n';
  for (std::size_t t = 0; t < frame.rows(); ++t) {
    out << format_date(frame.dates()[t]);
    for (std::size_t i = 0; i < frame.assets(); ++i) {
      out << ',' << format_number(frame.prices()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)));
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const PriceFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  write_csv(out, frame);
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

ReturnsFrame to_returns(const PriceFrame& frame) {
  require(frame.rows() >= 2, ErrorKind::InsufficientData, "need at least 2 price rows to form a return");
  const auto& p = frame.prices();
  const Eigen::Index n = p.rows() - 1;
  ReturnsFrame out;
  out.dates.assign(frame.dates().begin() + 1, frame.dates().end());
  out.returns = (p.bottomRows(n).array() / p.topRows(n).array() - 1.0).matrix();
  return out;
}

std::pair<PriceFrame, PriceFrame> split(const PriceFrame& frame, const SplitSpec& spec) {
  const std::size_t boundary = spec.boundary_index(frame.rows());
  if (boundary < 2 || frame.rows() - boundary < 2) {
    fail(ErrorKind::InsufficientData, "split at row " + std::to_string(boundary) + " of " +
                                          std::to_string(frame.rows()) +
                                          " leaves a segment with fewer than 2 rows");
  }
  return {frame.slice(0, boundary), frame.slice(boundary, frame.rows())};
}

PriceFrame synth_market(const SynthSpec& spec) {
  const Eigen::Index n = spec.drift.size();
  require(n >= 1, ErrorKind::Validation, "synthetic market needs at least one asset");
  require(spec.vol.size() == n, ErrorKind::Validation, "vol length must match drift length");
  require(spec.correlation.rows() == n && spec.correlation.cols() == n, ErrorKind::Validation,
          "correlation must be n x n");
  require(spec.days >= 1, ErrorKind::Validation, "synthetic market needs at least one day");
  require(spec.initial_price > 0.0, ErrorKind::Validation, "initial price must be positive");
  require((spec.vol.array() >= 0.0).all() && spec.vol.allFinite(), ErrorKind::Validation,
          "volatilities must be finite and non-negative");
  require((spec.drift.array() > -1.0).all() && spec.drift.allFinite(), ErrorKind::Validation,
          "drifts must be finite and greater than -1");
  const auto& c = spec.correlation;
  require(c.allFinite() && (c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12, ErrorKind::Validation,
          "correlation matrix must be symmetric");
  require((c.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12, ErrorKind::Validation,
          "correlation matrix must have unit diagonal");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  require(eig.eigenvalues().minCoeff() >= -1e-10, ErrorKind::Validation,
          "correlation matrix is not positive semi-definite");
  const Eigen::MatrixXd loading =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::ArrayXd log_drift = spec.drift.array().log1p() - 0.5 * spec.vol.array().square();

  const auto rows = static_cast<Eigen::Index>(spec.days);
  Eigen::MatrixXd prices(rows, n);
  prices.row(0) = Eigen::RowVectorXd::Constant(n, spec.initial_price);
  Eigen::VectorXd z(n);
  for (Eigen::Index t = 1; t < rows; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Eigen::ArrayXd shock = (loading * z).array();
    const Eigen::ArrayXd growth = (log_drift + spec.vol.array() * shock).exp();
    prices.row(t) = (prices.row(t - 1).array() * growth.transpose()).matrix();
  }

  std::vector<Date> dates;
  dates.reserve(spec.days);
  std::chrono::sys_days day{spec.start};
  while (dates.size() < spec.days) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) dates.emplace_back(day);
    day += std::chrono::days{1};
  }
  std::vector<std::string> tickers;
  for (Eigen::Index i = 0; i < n; ++i) tickers.push_back("ASSET" + std::to_string(i + 1));
  return PriceFrame(std::move(dates), std::move(tickers), std::move(prices));
}

PriceFrame synth_scenario(std::string_view name, std::size_t assets, std::size_t days, std::uint64_t seed) {
  require(assets >= 1, ErrorKind::Validation, "scenario needs at least one asset");
  const auto n = static_cast<Eigen::Index>(assets);
  SynthSpec spec;
  spec.days = days;
  spec.seed = seed;
  spec.drift.resize(n);
  spec.vol.resize(n);
  spec.correlation = Eigen::MatrixXd::Identity(n, n);
  // Drift and volatility spread evenly across assets.
  const auto frac = [&](Eigen::Index i) { return n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1); };
  if (name == "bull") {
    for (Eigen::Index i = 0; i < n; ++i) {
      spec.drift(i) = 0.0003 + 0.0009 * frac(i);
      spec.vol(i) = 0.010 + 0.012 * frac(i);
    }
    spec.correlation.setConstant(0.3);
  } else if (name == "bear") {
    for (Eigen::Index i = 0; i < n; ++i) {
      spec.drift(i) = -0.0007 + 0.0008 * frac(i);
      spec.vol(i) = 0.018 + 0.014 * frac(i);
    }
    spec.correlation.setConstant(0.5);
  } else if (name == "dominant") {
    spec.drift.setZero();
    spec.drift(0) = 0.001;
    spec.vol.setZero();
  } else {
    fail(ErrorKind::Validation, "unknown scenario '" + std::string(name) + "' (expected bull, bear or dominant)");
  }
  spec.correlation.diagonal().setOnes();
  return synth_market(spec);
}

}  // namespace allocbench::market
