import json
import os
import subprocess

import numpy as np
import pytest

import allocbench as ab


@pytest.fixture
def bull():
    return ab.synth_scenario("bull", 3, 120, 7)


def test_frame_roundtrip(bull):
    again = ab.parse_csv(bull.to_csv())
    assert again.tickers == bull.tickers
    assert again.dates == bull.dates
    np.testing.assert_array_equal(again.prices, bull.prices)
    assert len(again) == 120


def test_bad_frame_raises():
    with pytest.raises(ab.AllocBenchError):
        ab.PriceFrame(["2020-01-01"], ["A"], np.array([[0.0]]))
    with pytest.raises(ab.AllocBenchError):
        ab.parse_csv("date,A\n2020-13-01,1.0\n")


def test_solvers_on_simplex():
    mean = np.array([0.001, 0.002, 0.0005])
    cov = np.diag([1e-4, 4e-4, 2e-4])
    for name in ("tangency", "minvariance", "riskparity", "equalweight"):
        w = ab.solve(name, mean, cov)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert (w >= 0).all()
    rp = ab.solve("riskparity", mean, cov)
    rc = ab.risk_contributions(cov, rp)
    np.testing.assert_allclose(rc, rc.mean(), rtol=1e-6)
    mv = ab.solve("minvariance", mean, cov)
    inv = 1.0 / np.diag(cov)
    np.testing.assert_allclose(mv, inv / inv.sum(), atol=1e-8)


def test_metrics():
    r = [0.01, -0.02, 0.015, 0.0]
    assert ab.cumulative_return(r) == pytest.approx(np.prod(1 + np.array(r)) - 1)
    assert ab.max_drawdown(r) == pytest.approx(-0.02)
    report = ab.full_report(r)
    assert set(report) == {"annual_return", "cumulative_return", "annual_volatility", "sharpe_ratio",
                           "calmar_ratio", "stability", "max_drawdown"}


def test_run_classical(bull):
    res = ab.run_classical("equalweight", bull, window=20)
    assert res["strategy_id"] == "equalweight"
    assert res["seed"] is None
    assert len(res["equity_curve"]) == len(res["dates"])
    for w in res["weights"]:
        assert sum(w) == pytest.approx(1.0)


def test_train_and_run_agent(bull):
    agent = ab.train("a2c", bull, seed=3, steps=300)
    assert agent.algorithm == "a2c"
    assert agent.seed == 3
    blob = agent.checkpoint()
    assert blob[:4] == b"ABCK"
    again = ab.train("a2c", bull, seed=3, steps=300)
    assert again.checkpoint() == blob
    res = ab.run_agent(agent, bull)
    assert res["seed"] == 3
    assert np.isfinite(res["equity_curve"]).all()


def test_run_cli(tmp_path, bull):
    data = tmp_path / "prices.csv"
    data.write_text(bull.to_csv())
    out = tmp_path / "out"
    code, _, err = ab.run_cli(["run", "--data", str(data), "--strategy", "minvariance", "--out", str(out)])
    assert code == 0, err
    code, _, _ = ab.run_cli(["run", "--data", str(data), "--strategy", "nope"])
    assert code == 2


@pytest.mark.skipif("ALLOC_BENCH_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary(tmp_path, bull):
    data = tmp_path / "prices.csv"
    data.write_text(bull.to_csv())
    out = tmp_path / "out"
    proc = subprocess.run([os.environ["ALLOC_BENCH_CLI"], "run", "--data", str(data), "--strategy", "riskparity",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    reports = list(out.rglob("*.json"))
    assert reports
    json.loads(reports[0].read_text())
