#include "allocbench/cli.hpp"

#include "allocbench/agents.hpp"
#include "allocbench/backtest.hpp"
#include "allocbench/classical.hpp"
#include "allocbench/error.hpp"
#include "allocbench/market_data.hpp"
#include "allocbench/report.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace allocbench::cli {

namespace fs = std::filesystem;

namespace {

std::string valid_names() {
  std::string s;
  for (const auto& n : strategy_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

std::string curve_path(const std::string& id, const char* kind) { return "curves/" + id + "_" + kind + ".csv"; }

void emit_curves(const fs::path& dir, const std::string& id, const backtest::BacktestResult& result,
                 const std::vector<std::string>& tickers) {
  std::ostringstream cum;
  report::write_cumulative_csv(cum, result);
  report::write_text_file(dir / curve_path(id, "cumulative"), cum.str());
  std::ostringstream w;
  report::write_weights_csv(w, result, tickers);
  report::write_text_file(dir / curve_path(id, "weights"), w.str());
}

report::StrategyRow make_row(const std::string& id, const std::string& strategy, const std::string& block,
                             const backtest::BacktestResult& result, double rf) {
  report::StrategyRow row;
  row.id = id;
  row.strategy = strategy;
  row.block = block;
  row.seed = result.seed;
  row.metrics = report::evaluate(result, rf);
  row.cumulative_file = curve_path(id, "cumulative");
  row.weights_file = curve_path(id, "weights");
  row.warnings = result.warnings;
  return row;
}

classical::SolverConfig solver_config(const RunManifest& m) {
  classical::SolverConfig cfg;
  cfg.long_only = !m.allow_short;
  cfg.risk_free_rate = m.risk_free_rate;
  return cfg;
}

env::EnvConfig env_config(const RunManifest& m) {
  env::EnvConfig cfg;
  cfg.cost_rate = m.drl_cost;
  cfg.window = m.drl_window;
  return cfg;
}

agents::AgentConfig agent_config(const RunManifest& m, const std::string& name, std::uint64_t seed) {
  agents::AgentConfig cfg;
  cfg.algorithm = agents::parse_algorithm(name);
  cfg.seed = seed;
  if (m.steps) cfg.total_steps = *m.steps;
  return cfg;
}

void set_evaluation_span(report::ReportDocument& doc, const backtest::BacktestResult& r) {
  if (doc.evaluation_start || r.dates.empty()) return;
  doc.evaluation_start = market::format_date(r.dates.front());
  doc.evaluation_end = market::format_date(r.dates.back());
}

void run_synth(const RunManifest& m, std::ostream& log) {
  const auto frame = market::synth_scenario(m.scenario, m.assets, m.days, m.seed_base);
  const fs::path path = fs::path(m.output_dir) / "prices.csv";
  std::ostringstream csv;
  market::write_csv(csv, frame);
  report::write_text_file(path, csv.str());
  log << "wrote " << frame.rows() << " rows x " << frame.assets() << " assets to " << path.string() << '\n';
}

void run_backtest(const RunManifest& m, const market::PriceFrame& frame, std::ostream& log) {
  const fs::path dir(m.output_dir);
  const std::size_t boundary = market::SplitSpec{m.train_fraction}.boundary_index(frame.rows());
  const auto [train_frame, test_frame] = market::split(frame, market::SplitSpec{m.train_fraction});
  report::ReportDocument doc;
  doc.manifest = m;
  for (const auto& name : m.classical_strategies()) {
    const auto strategy = *classical::parse_strategy(name);
    const auto eval = backtest::evaluation_frame(frame, boundary, m.classical_window);
    const auto result = backtest::run_classical(strategy, eval, m.classical_window, solver_config(m),
                                                backtest::kInitialValue, m.classical_cost);
    log << name << ": " << result.warnings.size() << " solver fallbacks\n";
    emit_curves(dir, name, result, frame.tickers());
    doc.rows.push_back(make_row(name, name, "classical", result, m.risk_free_rate));
    set_evaluation_span(doc, result);
  }
  const env::EnvConfig ecfg = env_config(m);
  const auto drl_frame = backtest::evaluation_frame(frame, boundary, ecfg.window);
  for (const auto& name : m.drl_strategies()) {
    const auto cfg = agent_config(m, name, m.seed_base);
    log << "training " << name << " (seed " << cfg.seed << ", " << cfg.total_steps << " steps)\n";
    const auto agent = agents::train(cfg, train_frame, ecfg);
    const auto result = backtest::run_agent(*agent, drl_frame, ecfg);
    const std::string id = name + "_seed" + std::to_string(cfg.seed);
    emit_curves(dir, id, result, frame.tickers());
    std::ostringstream tl;
    agents::write_training_log(tl, *agent);
    report::write_text_file(dir / ("logs/" + id + "_training.csv"), tl.str());
    doc.rows.push_back(make_row(id, name, "run", result, m.risk_free_rate));
    set_evaluation_span(doc, result);
  }
  report::write_report(dir, doc);
  log << "wrote report to " << dir.string() << '\n';
}

void run_train(const RunManifest& m, const market::PriceFrame& frame, std::ostream& log) {
  const fs::path dir(m.output_dir);
  const auto [train_frame, test_frame] = market::split(frame, market::SplitSpec{m.train_fraction});
  const env::EnvConfig ecfg = env_config(m);
  report::ReportDocument doc;
  doc.manifest = m;
  for (const auto& name : m.drl_strategies()) {
    for (std::uint64_t seed : m.seeds()) {
      const auto cfg = agent_config(m, name, seed);
      log << "training " << name << " (seed " << seed << ", " << cfg.total_steps << " steps)\n";
      const auto agent = agents::train(cfg, train_frame, ecfg);
      const std::string id = name + "_seed" + std::to_string(seed);
      report::TrainingRecord rec;
      rec.algorithm = name;
      rec.seed = seed;
      rec.checkpoint_file = "checkpoints/" + id + ".bin";
      rec.log_file = "logs/" + id + "_training.csv";
      rec.episodes = agent->episode_rewards.size();
      std::ostringstream ck(std::ios::binary);
      agents::save_agent(ck, *agent);
      report::write_text_file(dir / rec.checkpoint_file, ck.str());
      std::ostringstream tl;
      agents::write_training_log(tl, *agent);
      report::write_text_file(dir / rec.log_file, tl.str());
      doc.training.push_back(rec);
    }
  }
  report::write_report(dir, doc);
  log << "wrote " << doc.training.size() << " checkpoints to " << dir.string() << '\n';
}

void run_protocol(const RunManifest& m, const market::PriceFrame& frame, std::ostream& log) {
  const fs::path dir(m.output_dir);
  std::vector<agents::AgentConfig> cfgs;
  for (const auto& name : m.drl_strategies()) cfgs.push_back(agent_config(m, name, m.seed_base));
  backtest::ProtocolOptions opts;
  opts.classical_window = m.classical_window;
  opts.strategies.clear();
  for (const auto& name : m.classical_strategies()) opts.strategies.push_back(*classical::parse_strategy(name));
  log << "protocol: " << opts.strategies.size() << " classical strategies, " << cfgs.size() << " algorithms x "
      << m.n_runs << " runs\n";
  const auto summary =
      backtest::run_protocol(frame, market::SplitSpec{m.train_fraction}, cfgs, solver_config(m), env_config(m),
                             m.n_runs, opts);

  report::ReportDocument doc;
  doc.manifest = m;
  for (const auto& result : summary.classical) {
    emit_curves(dir, result.strategy_id, result, frame.tickers());
    doc.rows.push_back(make_row(result.strategy_id, result.strategy_id, "classical", result, m.risk_free_rate));
    set_evaluation_span(doc, result);
  }
  for (const char* block : {"best", "worst"}) {
    const bool best = std::string(block) == "best";
    for (const auto& alg : summary.algorithms) {
      const auto idx = best ? alg.best : alg.worst;
      if (!idx) continue;
      const auto& result = *alg.runs[*idx].result;
      const std::string name(agents::algorithm_name(alg.algorithm));
      const std::string id = name + "_" + block;
      emit_curves(dir, id, result, frame.tickers());
      doc.rows.push_back(make_row(id, name, block, result, m.risk_free_rate));
      set_evaluation_span(doc, result);
    }
  }
  for (const auto& alg : summary.algorithms) {
    const std::string name(agents::algorithm_name(alg.algorithm));
    report::ProtocolStat stat;
    stat.algorithm = name;
    stat.runs = alg.runs.size();
    stat.failures = alg.failures;
    stat.mean_cumulative_return = alg.mean_cumulative;
    stat.stdev_cumulative_return = alg.stdev_cumulative;
    if (alg.best) stat.best_seed = alg.runs[*alg.best].seed;
    if (alg.worst) stat.worst_seed = alg.runs[*alg.worst].seed;
    std::vector<const backtest::BacktestResult*> ok;
    for (const auto& run : alg.runs) {
      const std::string id = name + "_seed" + std::to_string(run.seed);
      if (run.result) {
        ok.push_back(&*run.result);
      } else {
        stat.errors.push_back("seed " + std::to_string(run.seed) + ": " + run.error);
        log << name << " seed " << run.seed << " failed: " << run.error << '\n';
      }
      std::ostringstream tl;
      tl << "episode,cumulative_reward\n";
      for (std::size_t k = 0; k < run.training_log.size(); ++k) {
        tl << (k + 1) << ',' << market::format_number(run.training_log[k]) << '\n';
      }
      report::write_text_file(dir / ("logs/" + id + "_training.csv"), tl.str());
    }
    if (!ok.empty()) {
      std::ostringstream stats;
      report::write_cumulative_stats_csv(stats, ok);
      report::write_text_file(dir / ("curves/" + name + "_cumulative_stats.csv"), stats.str());
      std::ostringstream mw;
      report::write_mean_weights_csv(mw, ok, frame.tickers());
      report::write_text_file(dir / ("curves/" + name + "_mean_weights.csv"), mw.str());
    }
    doc.protocol_stats.push_back(stat);
  }
  report::write_report(dir, doc);
  log << "wrote report to " << dir.string() << '\n';
}

int exit_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::TrainingDiverged: return kExitDiverged;
    case ErrorKind::Io: return kExitIo;
    default: return kExitData;
  }
}

}  // namespace

std::string_view mode_name(Mode mode) noexcept {
  switch (mode) {
    case Mode::Backtest: return "backtest";
    case Mode::Train: return "train";
    case Mode::Protocol: return "protocol";
    case Mode::Synth: return "synth";
  }
  return "backtest";
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = {"tangency", "minvariance", "riskparity", "equalweight", "a2c",
                                                 "ppo",      "ddpg",        "td3",        "sac"};
  return names;
}

bool is_classical_name(std::string_view name) { return classical::parse_strategy(name).has_value(); }

std::vector<std::uint64_t> RunManifest::seeds() const {
  std::vector<std::uint64_t> out;
  for (std::size_t k = 0; k < n_runs; ++k) out.push_back(seed_base + k);
  return out;
}

std::vector<std::string> RunManifest::classical_strategies() const {
  std::vector<std::string> out;
  for (const auto& s : strategies) {
    if (is_classical_name(s)) out.push_back(s);
  }
  return out;
}

std::vector<std::string> RunManifest::drl_strategies() const {
  std::vector<std::string> out;
  for (const auto& s : strategies) {
    if (!is_classical_name(s)) out.push_back(s);
  }
  return out;
}

ParseOutcome parse_args(const std::vector<std::string>& args) {
  ParseOutcome outcome;
  RunManifest& m = outcome.manifest;

  CLI::App app{"Portfolio allocation benchmark: classical optimizers and actor-critic agents", "alloc-bench"};
  std::string mode;
  std::vector<std::string> strategies;
  std::size_t steps = 0;
  app.add_option("mode", mode, "backtest (alias run) | train | protocol | synth")->required();
  app.add_option("--data", m.data_path, "price CSV (date,T1,...,Tn)");
  app.add_option("--strategy", strategies, "strategy name, repeatable: " + valid_names())->delimiter(',');
  app.add_option("--window", m.classical_window, "estimation window of the classical strategies")
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  app.add_option("--cost", m.drl_cost, "transaction cost rate of the learned strategies")
      ->check(CLI::Range(0.0, 0.1));
  app.add_option("--train-split", m.train_fraction, "fraction of rows used for training")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--runs", m.n_runs, "independent training runs per algorithm")
      ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
  app.add_option("--seed", m.seed_base, "base seed; run k uses seed + k");
  app.add_option("--out", m.output_dir, "output directory");
  app.add_flag("--allow-short", m.allow_short, "allow negative classical weights");
  app.add_option("--rf", m.risk_free_rate, "daily risk-free rate");
  auto* steps_opt = app.add_option("--steps", steps, "environment steps per training run");
  app.add_option("--scenario", m.scenario, "synth scenario: bull | bear | dominant");
  app.add_option("--assets", m.assets, "synth asset count")->check(CLI::Range(std::size_t{1}, std::size_t{1000}));
  app.add_option("--days", m.days, "synth price rows")->check(CLI::Range(std::size_t{2}, std::size_t{10000000}));

  std::vector<const char*> argv{"alloc-bench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    outcome.help = true;
    outcome.help_text = app.help();
    return outcome;
  } catch (const CLI::ParseError& e) {
    fail(ErrorKind::Usage, std::string(e.what()) + "\n" + app.help());
  }

  if (mode == "backtest" || mode == "run") {
    m.mode = Mode::Backtest;
  } else if (mode == "train") {
    m.mode = Mode::Train;
  } else if (mode == "protocol") {
    m.mode = Mode::Protocol;
  } else if (mode == "synth") {
    m.mode = Mode::Synth;
  } else {
    fail(ErrorKind::Usage, "unknown mode '" + mode + "' (expected backtest, run, train, protocol or synth)");
  }
  if (m.mode != Mode::Synth && m.data_path.empty()) fail(ErrorKind::Usage, "--data <path> is required");
  if (m.train_fraction <= 0.0 || m.train_fraction >= 1.0) {
    fail(ErrorKind::Usage, "--train-split must lie strictly between 0 and 1");
  }
  if (m.mode == Mode::Synth && m.scenario != "bull" && m.scenario != "bear" && m.scenario != "dominant") {
    fail(ErrorKind::Usage, "unknown scenario '" + m.scenario + "' (expected bull, bear or dominant)");
  }
  for (auto& s : strategies) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto& names = strategy_names();
    if (std::find(names.begin(), names.end(), s) == names.end()) {
      fail(ErrorKind::Usage, "invalid strategy '" + s + "'; valid names: " + valid_names());
    }
    if (std::find(m.strategies.begin(), m.strategies.end(), s) == m.strategies.end()) m.strategies.push_back(s);
  }
  if (m.strategies.empty()) {
    if (m.mode == Mode::Train) {
      m.strategies = {"a2c", "ppo", "ddpg", "td3", "sac"};
    } else {
      m.strategies = strategy_names();
    }
  }
  if (steps_opt->count() > 0) m.steps = steps;
  return outcome;
}

void execute(const RunManifest& m, std::ostream& log) {
  if (m.mode == Mode::Synth) {
    run_synth(m, log);
    return;
  }
  const auto frame = market::load_csv(m.data_path);
  log << "loaded " << frame.rows() << " rows x " << frame.assets() << " assets from " << m.data_path << '\n';
  switch (m.mode) {
    case Mode::Backtest: run_backtest(m, frame, log); break;
    case Mode::Train: run_train(m, frame, log); break;
    case Mode::Protocol: run_protocol(m, frame, log); break;
    case Mode::Synth: break;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const ParseOutcome parsed = parse_args(args);
    if (parsed.help) {
      out << parsed.help_text;
      return kExitOk;
    }
    execute(parsed.manifest, out);
    return kExitOk;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_status(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace allocbench::cli
