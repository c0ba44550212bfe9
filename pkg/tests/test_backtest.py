import datetime as dt
import math

import numpy as np
import pytest

from bullbear.backtest import (
    StrategyConfig,
    annualize,
    read_sweep_csv,
    run_strategy,
    signal,
    threshold_sweep,
    write_positions_csv,
    write_summary_csv,
    write_sweep_csv,
)
from bullbear.marketdata import ReturnSeries


def _series(r, rf=None):
    r = np.asarray(r, float)
    d = [dt.date(2010, 1, 6) + dt.timedelta(weeks=k) for k in range(len(r))]
    rf = np.zeros(len(r)) if rf is None else np.asarray(rf, float)
    return ReturnSeries(d, r, r**2, rf)


def _probs(n, seed=0):
    return np.random.default_rng(seed).dirichlet(np.ones(4), size=n)


def test_threshold_zero_and_one_extremes():
    rng = np.random.default_rng(1)
    s = _series(rng.normal(0.2, 2, 60), np.full(60, 0.05))
    p = _probs(60)
    always = run_strategy(p, s, StrategyConfig("B", tau_B=0.0))
    never = run_strategy(p, s, StrategyConfig("B", tau_B=1.0))
    hold = run_strategy(p, s, StrategyConfig("buy-and-hold"))
    assert always.annualized_return == pytest.approx(hold.annualized_return)
    assert always.annualized_sharpe == pytest.approx(hold.annualized_sharpe)
    np.testing.assert_array_equal(never.weekly_returns, s.risk_free)
    assert never.annualized_return == pytest.approx(52 * 0.05 / 100)
    assert math.isnan(never.annualized_sharpe)


def test_annualize_examples():
    w = np.array([1.0, -1.0] * 26)
    out = annualize(w)
    assert out["annualized_return"] == 0.0
    assert out["annualized_sharpe"] == 0.0
    w = np.array([0.5, 0.1, 0.3, 0.1])
    out = annualize(w)
    assert out["annualized_return"] == pytest.approx(52 / 4 * 1.0 / 100)
    sd = np.std(w, ddof=1)
    assert out["annualized_sharpe"] == pytest.approx((52 / 4 * 1.0) / (math.sqrt(52) * sd))
    assert out["annualized_sharpe"] == pytest.approx(math.sqrt(52) * 0.25 / sd)


def test_annualize_zero_variance_errors():
    with pytest.raises(ValueError, match="zero variance"):
        annualize(np.full(10, 0.2), np.full(10, 0.1))
    with pytest.raises(ValueError, match="at least 4"):
        annualize([1.0, 2.0])


def test_ten_week_hand_oracle():
    r = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 0.2, -0.4, 1.5, -3.0, 2.0])
    rf = np.full(10, 0.04)
    bull = np.array([0.9, 0.2, 0.6, 0.7, 0.1, 0.55, 0.3, 0.8, 0.4, 0.51])
    p = np.zeros((10, 4))
    p[:, 3] = bull
    p[:, 0] = 1 - bull
    res = run_strategy(p, _series(r, rf), StrategyConfig("B", tau_B=0.5))
    inside = [True, False, True, True, False, True, False, True, False, True]
    np.testing.assert_array_equal(res.positions, inside)
    port = [1.0, 0.04, 0.5, 3.0, 0.04, 0.2, 0.04, 1.5, 0.04, 2.0]
    np.testing.assert_allclose(res.weekly_returns, port)
    # sum = 8.36, excess sum = 7.96
    assert res.annualized_return == pytest.approx(5.2 * 8.36 / 100, abs=1e-12)
    ex = np.array(port) - 0.04
    sd = math.sqrt(((ex - ex.mean()) ** 2).sum() / 9)
    assert res.annualized_sharpe == pytest.approx(5.2 * 7.96 / (math.sqrt(52) * sd), abs=1e-12)
    assert res.trade_count == 9  # entering in week 1 counts


def test_strategy_s_signals():
    p = np.array([
        [0.1, 0.6, 0.1, 0.2],
        [0.1, 0.1, 0.2, 0.6],
        [0.3, 0.3, 0.3, 0.1],
        [0.0, 0.45, 0.1, 0.45],
    ])
    np.testing.assert_array_equal(signal(p, StrategyConfig("S", tau_S=0.5)), [True, True, False, False])
    np.testing.assert_array_equal(signal(p, StrategyConfig("S-split", tau_S=0.5, tau_S_bull=0.4)),
                                  [True, True, False, True])
    np.testing.assert_array_equal(signal(p, StrategyConfig("B", tau_B=0.5)), [False, True, False, True])
    with pytest.raises(ValueError, match="4-state"):
        signal(np.array([[0.5, 0.5]]), StrategyConfig("S"))


def test_no_look_ahead_permutation():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = 30
        r = rng.normal(0.1, 2, n)
        p = _probs(n, int(rng.integers(1 << 30)))
        base = run_strategy(p, _series(r), StrategyConfig("S", tau_S=0.4))
        k = int(rng.integers(1, n))
        r2 = r.copy()
        r2[k:] = rng.permutation(r2[k:])
        other = run_strategy(p, _series(r2), StrategyConfig("S", tau_S=0.4))
        np.testing.assert_array_equal(base.positions, other.positions)


def test_saturated_probabilities():
    s = _series(np.random.default_rng(3).normal(0, 1, 20))
    p = np.tile([0.0, 0.0, 0.0, 1.0], (20, 1))
    res = run_strategy(p, s, StrategyConfig("B", tau_B=0.999999))
    assert res.positions.all() and res.trade_count == 1


def test_misaligned_forecasts_error():
    s = _series(np.zeros(10) + np.arange(10))
    with pytest.raises(ValueError, match="10 realized"):
        run_strategy(_probs(9), s, StrategyConfig("B"))


def test_sweep_matches_individual_runs(tmp_path):
    rng = np.random.default_rng(4)
    s = _series(rng.normal(0.1, 2, 80), np.full(80, 0.03))
    p = _probs(80, 5)
    grid = [0.1, 0.3, 0.5, 0.7]
    curve = threshold_sweep(p, s, "S-split", grid, tau_S=0.4)
    for g, ret, sh in curve:
        ref = run_strategy(p, s, StrategyConfig("S-split", tau_S=0.4, tau_S_bull=g))
        assert ret == ref.annualized_return
        assert sh == ref.annualized_sharpe or (math.isnan(sh) and math.isnan(ref.annualized_sharpe))
    write_sweep_csv(tmp_path / "sw.csv", curve, "S-split")
    back = read_sweep_csv(tmp_path / "sw.csv")
    assert [x[0] for x in back] == grid
    with pytest.raises(ValueError, match="sorted"):
        threshold_sweep(p, s, "S", [0.5, 0.1])


def test_output_files(tmp_path):
    s = _series(np.random.default_rng(5).normal(0, 1, 12))
    p = _probs(12)
    res = run_strategy(p, s, StrategyConfig("B"))
    write_positions_csv(tmp_path / "pos.csv", res, p)
    write_summary_csv(tmp_path / "sum.csv", [res])
    rows = (tmp_path / "pos.csv").read_text().splitlines()
    assert len(rows) == 13 and rows[0].startswith("date,p1,p2,p3,p4,bull_prob,position")
    assert "B(tau_B=0.5)" in (tmp_path / "sum.csv").read_text()


def test_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig("X")
    with pytest.raises(ValueError):
        StrategyConfig("B", tau_B=-0.1)
