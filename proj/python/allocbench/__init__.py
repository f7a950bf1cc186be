"""Portfolio allocation benchmark: classical optimizers, actor-critic agents and a walk-forward backtester."""

from ._allocbench import (
    Agent,
    AllocBenchError,
    PriceFrame,
    cumulative_return,
    efficient_frontier,
    estimate,
    full_report,
    load_csv,
    max_drawdown,
    parse_csv,
    project_to_simplex,
    risk_contributions,
    run_agent,
    run_classical,
    run_cli,
    sharpe_ratio,
    solve,
    stability,
    synth_scenario,
    train,
)

__all__ = [
    "Agent",
    "AllocBenchError",
    "PriceFrame",
    "cumulative_return",
    "efficient_frontier",
    "estimate",
    "full_report",
    "load_csv",
    "max_drawdown",
    "parse_csv",
    "project_to_simplex",
    "risk_contributions",
    "run_agent",
    "run_classical",
    "run_cli",
    "sharpe_ratio",
    "solve",
    "stability",
    "synth_scenario",
    "train",
]
