#include "allocbench/agents.hpp"
#include "allocbench/cli.hpp"
#include "allocbench/error.hpp"
#include "allocbench/market_data.hpp"
#include "allocbench/report.hpp"

#include "support.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace allocbench;
using namespace allocbench::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_binary(const std::vector<std::string>& args) {
  std::string cmd = ALLOCBENCH_CLI_PATH;
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_in_process(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream out;
  std::ostringstream e;
  const int code = run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

fs::path write_prices(const fs::path& dir, const market::PriceFrame& frame) {
  const fs::path p = dir / "prices.csv";
  market::write_csv(p, frame);
  return p;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = oracle::read_file(e.path());
  }
  return files;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path) {
  std::istringstream in(oracle::read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

const std::vector<std::string> kMetricKeys = {"annual_return",  "cumulative_return", "annual_volatility",
                                              "sharpe_ratio",   "calmar_ratio",      "stability",
                                              "max_drawdown"};

}  // namespace

TEST(ParseArgs, DefaultsAndAlias) {
  const auto m = parse_args({"run", "--data", "p.csv", "--strategy", "equalweight"}).manifest;
  EXPECT_EQ(m.mode, Mode::Backtest);
  EXPECT_EQ(m.data_path, "p.csv");
  EXPECT_EQ(m.strategies, std::vector<std::string>{"equalweight"});
  EXPECT_EQ(m.classical_window, 50u);
  EXPECT_EQ(m.drl_window, 1u);
  EXPECT_EQ(m.classical_cost, 0.0);
  EXPECT_EQ(m.drl_cost, 0.001);
  EXPECT_EQ(m.train_fraction, 0.8);
  EXPECT_EQ(m.n_runs, 10u);
  EXPECT_FALSE(m.allow_short);
  EXPECT_FALSE(m.steps.has_value());
  EXPECT_EQ(parse_args({"backtest", "--data", "p.csv"}).manifest.strategies, strategy_names());
}

TEST(ParseArgs, FlagsAndSeeds) {
  const auto m = parse_args({"protocol", "--data", "p.csv", "--runs", "10", "--seed", "42", "--strategy", "SAC",
                             "--strategy", "tangency,ppo", "--window", "20", "--cost", "0.002", "--train-split",
                             "0.7", "--out", "o", "--allow-short", "--rf", "0.0001", "--steps", "500"})
                     .manifest;
  EXPECT_EQ(m.mode, Mode::Protocol);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 42; s <= 51; ++s) seeds.push_back(s);
  EXPECT_EQ(m.seeds(), seeds);
  EXPECT_EQ(m.strategies, (std::vector<std::string>{"sac", "tangency", "ppo"}));
  EXPECT_EQ(m.classical_strategies(), std::vector<std::string>{"tangency"});
  EXPECT_EQ(m.drl_strategies(), (std::vector<std::string>{"sac", "ppo"}));
  EXPECT_EQ(m.classical_window, 20u);
  EXPECT_EQ(m.drl_cost, 0.002);
  EXPECT_EQ(m.train_fraction, 0.7);
  EXPECT_EQ(m.output_dir, "o");
  EXPECT_TRUE(m.allow_short);
  EXPECT_EQ(m.risk_free_rate, 0.0001);
  EXPECT_EQ(m.steps, 500u);
  EXPECT_EQ(parse_args({"train", "--data", "p.csv"}).manifest.strategies,
            (std::vector<std::string>{"a2c", "ppo", "ddpg", "td3", "sac"}));
}

TEST(ParseArgs, UsageErrors) {
  const auto kind = [](const std::vector<std::string>& args) {
    try {
      parse_args(args);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Numerical;
  };
  EXPECT_EQ(kind({"run", "--data", "p.csv", "--frobnicate"}), ErrorKind::Usage);
  EXPECT_EQ(kind({"run"}), ErrorKind::Usage);
  EXPECT_EQ(kind({}), ErrorKind::Usage);
  EXPECT_EQ(kind({"dance", "--data", "p.csv"}), ErrorKind::Usage);
  EXPECT_EQ(kind({"run", "--data", "p.csv", "--window", "abc"}), ErrorKind::Usage);
  EXPECT_EQ(kind({"run", "--data", "p.csv", "--train-split", "1.0"}), ErrorKind::Usage);
  EXPECT_EQ(kind({"protocol", "--data", "p.csv", "--runs", "0"}), ErrorKind::Usage);
  try {
    parse_args({"run", "--data", "p.csv", "--strategy", "frobnicate"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
    for (const auto& n : strategy_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos) << n;
  }
  EXPECT_TRUE(parse_args({"--help"}).help);
}

TEST(ExitCodes, Binary) {
  const auto dir = oracle::fresh_dir("cli_exit");
  const auto prices = write_prices(dir, market::synth_scenario("bull", 3, 120, 1));
  EXPECT_EQ(run_binary({"--help"}), kExitOk);
  EXPECT_EQ(run_binary({"run", "--data", prices.string(), "--strategy", "equalweight", "--out", (dir / "ok").string()}),
            kExitOk);
  EXPECT_EQ(run_binary({"run", "--data", prices.string(), "--strategy", "frobnicate"}), kExitUsage);
  EXPECT_EQ(run_binary({"run", "--strategy", "equalweight"}), kExitUsage);

  std::ofstream(dir / "bad.csv") << "date,A\n2020-01-01,1\n2020-01-02,0\n";
  EXPECT_EQ(run_binary({"run", "--data", (dir / "bad.csv").string(), "--out", (dir / "x").string()}), kExitData);
  EXPECT_EQ(run_binary({"run", "--data", (dir / "missing.csv").string()}), kExitIo);

  std::ofstream(dir / "blocker") << "file";
  EXPECT_EQ(run_binary({"run", "--data", prices.string(), "--strategy", "equalweight", "--out",
                        (dir / "blocker" / "sub").string()}),
            kExitIo);

  // Prices that swing a hundredfold every day blow up the critic loss.
  std::ofstream wild(dir / "wild.csv");
  wild << "date,A,B\n";
  const auto dates = market::synth_scenario("bull", 1, 200, 1).dates();
  for (std::size_t t = 0; t < dates.size(); ++t) {
    wild << market::format_date(dates[t]) << ',' << (t % 2 ? "100" : "1") << ',' << (t % 2 ? "1" : "100") << '\n';
  }
  wild.close();
  EXPECT_EQ(run_binary({"train", "--data", (dir / "wild.csv").string(), "--strategy", "ddpg", "--runs", "1",
                        "--steps", "3000", "--out", (dir / "wild").string()}),
            kExitDiverged);
}

TEST(Backtest, ClassicalReportShape) {
  const auto dir = oracle::fresh_dir("cli_backtest");
  const auto frame = market::synth_scenario("bull", 3, 300, 2);
  const auto prices = write_prices(dir, frame);
  const auto out = dir / "out";
  ASSERT_EQ(run_in_process({"run", "--data", prices.string(), "--strategy", "tangency", "--strategy", "minvariance",
                            "--strategy", "riskparity", "--strategy", "equalweight", "--out", out.string()}),
            0);
  const json doc = json::parse(oracle::read_file(out / "report.json"));
  for (const char* key : {"manifest", "evaluation", "strategies", "protocol_stats"}) EXPECT_TRUE(doc.contains(key));
  EXPECT_EQ(doc["manifest"]["mode"], "backtest");
  EXPECT_EQ(doc["manifest"]["seeds"].size(), 10u);
  ASSERT_EQ(doc["strategies"].size(), 4u);
  const std::size_t boundary = 240;
  const std::size_t test_days = frame.rows() - boundary;
  EXPECT_EQ(doc["evaluation"]["start"], market::format_date(frame.dates()[boundary + 1]));
  EXPECT_EQ(doc["evaluation"]["end"], market::format_date(frame.dates().back()));
  for (const auto& s : doc["strategies"]) {
    EXPECT_EQ(s["block"], "classical");
    EXPECT_TRUE(s["seed"].is_null());
    for (const auto& k : kMetricKeys) EXPECT_TRUE(s["metrics"].contains(k)) << k;
    EXPECT_EQ(s["metrics"].size(), 7u);
    const auto cum = read_rows(out / s["files"]["cumulative"].get<std::string>());
    ASSERT_EQ(cum.size(), test_days - 1 + 1);
    EXPECT_EQ(cum[0], (std::vector<std::string>{"date", "cumulative_return"}));
    EXPECT_EQ(cum[1][1], "0");
    EXPECT_NEAR(std::stod(cum.back()[1]), s["metrics"]["cumulative_return"].get<double>(), 1e-9);
    const auto weights = read_rows(out / s["files"]["weights"].get<std::string>());
    ASSERT_EQ(weights.size(), test_days - 2 + 1);
    EXPECT_EQ(weights[0], (std::vector<std::string>{"date", "ASSET1", "ASSET2", "ASSET3"}));
    for (std::size_t t = 1; t < weights.size(); ++t) {
      double sum = 0.0;
      for (std::size_t i = 1; i < 4; ++i) sum += std::stod(weights[t][i]);
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
    if (s["id"] == "equalweight") {
      // Strictly positive weights also satisfy the price-file dialect.
      const auto parsed = market::load_csv(out / s["files"]["weights"].get<std::string>());
      EXPECT_EQ(parsed.tickers(), frame.tickers());
      EXPECT_TRUE((parsed.prices().array() == 1.0 / 3.0).all());
    }
  }
  const auto table = read_rows(out / "metrics.csv");
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0].size(), 10u);
  EXPECT_EQ(table[0][3], "annual_return");
  const std::string text = oracle::read_file(out / "metrics.txt");
  EXPECT_NE(text.find("Sharpe ratio"), std::string::npos);
  EXPECT_NE(text.find("Max drawdown (%)"), std::string::npos);
}

TEST(Backtest, UndefinedMetricsRenderAsNa) {
  const auto dir = oracle::fresh_dir("cli_na");
  market::SynthSpec spec;
  spec.drift = Eigen::Vector2d(0.0, 0.0);
  spec.vol = Eigen::Vector2d::Zero();
  spec.correlation = Eigen::Matrix2d::Identity();
  spec.days = 100;
  const auto prices = write_prices(dir, market::synth_market(spec));
  const auto out = dir / "out";
  ASSERT_EQ(run_in_process({"run", "--data", prices.string(), "--strategy", "equalweight", "--window", "10", "--out",
                            out.string()}),
            0);
  const std::string csv = oracle::read_file(out / "metrics.csv");
  EXPECT_NE(csv.find("n/a"), std::string::npos);
  const std::string txt = oracle::read_file(out / "metrics.txt");
  EXPECT_NE(txt.find("n/a"), std::string::npos);
  const std::string js = oracle::read_file(out / "report.json");
  for (const auto& text : {csv, txt, js}) {
    EXPECT_EQ(text.find("nan"), std::string::npos);
    EXPECT_EQ(text.find("inf"), std::string::npos);
  }
  EXPECT_TRUE(json::parse(js)["strategies"][0]["metrics"]["sharpe_ratio"].is_null());
}

TEST(Protocol, TableShapeAndDeterminism) {
  const auto dir = oracle::fresh_dir("cli_protocol");
  const auto frame = market::synth_scenario("bull", 3, 200, 3);
  const auto prices = write_prices(dir, frame);
  const auto out = dir / "out";
  const std::vector<std::string> args = {"protocol", "--data", prices.string(), "--runs", "2", "--seed", "7",
                                         "--steps", "150", "--window", "20", "--out", out.string()};
  ASSERT_EQ(run_in_process(args), 0);
  const auto first = snapshot(out);
  fs::remove_all(out);
  ASSERT_EQ(run_in_process(args), 0);
  EXPECT_EQ(snapshot(out), first);

  const json doc = json::parse(first.at("report.json"));
  ASSERT_EQ(doc["strategies"].size(), 14u);
  std::map<std::string, int> blocks;
  for (const auto& s : doc["strategies"]) {
    ++blocks[s["block"].get<std::string>()];
    EXPECT_EQ(s["metrics"].size(), 7u);
    EXPECT_TRUE(first.count(s["files"]["cumulative"].get<std::string>()));
    EXPECT_TRUE(first.count(s["files"]["weights"].get<std::string>()));
    if (s["block"] != "classical") {
      EXPECT_TRUE(s["seed"] == 7 || s["seed"] == 8);
    }
  }
  EXPECT_EQ(blocks["classical"], 4);
  EXPECT_EQ(blocks["best"], 5);
  EXPECT_EQ(blocks["worst"], 5);
  ASSERT_EQ(doc["protocol_stats"].size(), 5u);
  for (const auto& p : doc["protocol_stats"]) {
    EXPECT_EQ(p["runs"], 2);
    EXPECT_EQ(p["failures"], 0);
    EXPECT_FALSE(p["stdev_cumulative_return"].is_null());
    const std::string alg = p["algorithm"];
    for (int seed : {7, 8}) EXPECT_TRUE(first.count("logs/" + alg + "_seed" + std::to_string(seed) + "_training.csv"));
    EXPECT_TRUE(first.count("curves/" + alg + "_cumulative_stats.csv"));
    EXPECT_TRUE(first.count("curves/" + alg + "_mean_weights.csv"));
  }
  const auto table = read_rows(out / "metrics.csv");
  EXPECT_EQ(table.size(), 15u);
}

TEST(Train, CheckpointsReload) {
  const auto dir = oracle::fresh_dir("cli_train");
  const auto frame = market::synth_scenario("bull", 2, 60, 4);
  const auto prices = write_prices(dir, frame);
  const auto out = dir / "out";
  ASSERT_EQ(run_in_process({"train", "--data", prices.string(), "--strategy", "td3", "--runs", "2", "--seed", "3",
                            "--steps", "200", "--out", out.string()}),
            0);
  const json doc = json::parse(oracle::read_file(out / "report.json"));
  ASSERT_EQ(doc["training"].size(), 2u);
  for (const auto& t : doc["training"]) {
    agents::AgentConfig cfg;
    cfg.algorithm = agents::Algorithm::TD3;
    cfg.seed = t["seed"].get<std::uint64_t>();
    cfg.total_steps = 200;
    std::ifstream in(out / t["checkpoint"].get<std::string>(), std::ios::binary);
    const auto loaded = agents::load_agent(in, cfg, 5, 2);
    const auto direct = agents::train(cfg, frame.slice(0, 48), env::EnvConfig{});
    EXPECT_EQ(loaded->flat_parameters(), direct->flat_parameters());
    const auto log = read_rows(out / t["training_log"].get<std::string>());
    EXPECT_EQ(log.size(), t["episodes"].get<std::size_t>() + 1);
    EXPECT_EQ(log[0], (std::vector<std::string>{"episode", "cumulative_reward"}));
  }
}

TEST(Synth, WritesParseablePrices) {
  const auto dir = oracle::fresh_dir("cli_synth");
  ASSERT_EQ(run_in_process({"synth", "--scenario", "dominant", "--assets", "4", "--days", "30", "--seed", "5",
                            "--out", dir.string()}),
            0);
  const auto f = market::load_csv(dir / "prices.csv");
  EXPECT_EQ(f.rows(), 30u);
  EXPECT_EQ(f.assets(), 4u);
  EXPECT_EQ(oracle::read_file(dir / "prices.csv"), [&] {
    std::ostringstream s;
    market::write_csv(s, market::synth_scenario("dominant", 4, 30, 5));
    return s.str();
  }());
}

TEST(Report, JsonRendersOptionalsAsNull) {
  report::ReportDocument doc;
  report::StrategyRow row;
  row.id = "x";
  row.strategy = "tangency";
  row.block = "classical";
  row.metrics.annual_return = 0.1;
  doc.rows.push_back(row);
  const json j = json::parse(report::render_json(doc));
  EXPECT_TRUE(j["evaluation"]["start"].is_null());
  EXPECT_TRUE(j["strategies"][0]["metrics"]["calmar_ratio"].is_null());
  EXPECT_EQ(j["strategies"][0]["metrics"]["annual_return"], 0.1);
  EXPECT_FALSE(j.contains("training"));
  EXPECT_THROW(report::write_text_file("/proc/allocbench/nope.txt", "x"), Error);
}
