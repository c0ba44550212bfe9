"""Market-timing strategies driven by one-week-ahead state forecasts.

Each week the investor holds either the market or the risk-free asset, chosen
from P(s_t | r_{1:t-1}); no shorting, no costs.

    B        in market iff P(bull regime) > tau_B
    S        in market iff P(bear rally) > tau_S or P(bull) > tau_S
    S-split  in market iff P(bear rally) > tau_S or P(bull) > tau_S_bull
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .marketdata import ReturnSeries
from .regime import regime_probability

KINDS = ("B", "S", "S-split", "buy-and-hold", "never-in")
WEEKS_PER_YEAR = 52


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    tau_B: float = 0.5
    tau_S: float = 0.5
    tau_S_bull: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        if min(self.tau_B, self.tau_S, self.tau_S_bull) < 0:
            raise ValueError("thresholds must be non-negative")

    @property
    def label(self) -> str:
        if self.kind == "B":
            return f"B(tau_B={self.tau_B:g})"
        if self.kind == "S":
            return f"S(tau_S={self.tau_S:g})"
        if self.kind == "S-split":
            return f"S-split(tau_S={self.tau_S:g},tau_bull={self.tau_S_bull:g})"
        return self.kind


@dataclass
class BacktestResult:
    config: StrategyConfig
    dates: list
    positions: np.ndarray
    weekly_returns: np.ndarray
    market_returns: np.ndarray
    risk_free: np.ndarray
    annualized_return: float
    annualized_sharpe: float
    trade_count: int


def annualize(weekly_returns, risk_free=None) -> dict:
    """Annualized mean log-return (decimal) and Sharpe ratio of weekly returns in percent."""
    w = np.asarray(weekly_returns, dtype=float)
    n = len(w)
    if n < 4:
        raise ValueError(f"need at least 4 weeks, got {n}")
    rf = np.zeros(n) if risk_free is None else np.asarray(risk_free, dtype=float)
    ann = WEEKS_PER_YEAR / n * w.sum() / 100.0
    x = w - rf
    sd = float(np.std(x, ddof=1))
    if sd == 0.0 or np.all(x == x[0]):
        raise ValueError("zero variance of excess returns; Sharpe ratio undefined")
    sharpe = (WEEKS_PER_YEAR / n * x.sum()) / (math.sqrt(WEEKS_PER_YEAR) * sd)
    return {"annualized_return": float(ann), "annualized_sharpe": float(sharpe)}


def signal(probs: np.ndarray, cfg: StrategyConfig) -> np.ndarray:
    """Boolean in-market flags from (n, K) predicted state probabilities."""
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    n, K = p.shape
    if cfg.kind == "buy-and-hold":
        return np.ones(n, dtype=bool)
    if cfg.kind == "never-in":
        return np.zeros(n, dtype=bool)
    if cfg.kind == "B":
        return regime_probability(p) > cfg.tau_B
    if K != 4:
        raise ValueError("strategy S needs 4-state forecasts")
    bull_tau = cfg.tau_S if cfg.kind == "S" else cfg.tau_S_bull
    return (p[:, 1] > cfg.tau_S) | (p[:, 3] > bull_tau)


def align_forecasts(forecasts, realized: ReturnSeries) -> np.ndarray:
    """(n, K) probabilities matched to ``realized`` weeks.

    ``forecasts`` is either an array already aligned with ``realized`` or a
    sequence of forecast bundles whose ``target_date`` must match the
    realized dates one for one.
    """
    if isinstance(forecasts, np.ndarray):
        p = np.atleast_2d(forecasts)
        if p.shape[0] != len(realized):
            raise ValueError(f"{p.shape[0]} forecasts for {len(realized)} realized weeks")
        return p
    dates = [b.target_date for b in forecasts]
    if dates != list(realized.dates):
        mismatch = next((i for i, (a, b) in enumerate(zip(dates, realized.dates)) if a != b), min(len(dates), len(realized)))
        raise ValueError(f"forecast and realized dates are misaligned at position {mismatch}")
    return np.vstack([b.state_probs[0] for b in forecasts])


def run_strategy(forecasts, realized: ReturnSeries, cfg: StrategyConfig) -> BacktestResult:
    probs = align_forecasts(forecasts, realized)
    pos = signal(probs, cfg)
    r = realized.log_return
    rf = realized.risk_free
    port = np.where(pos, r, rf)
    ann_ret = WEEKS_PER_YEAR / len(port) * port.sum() / 100.0
    try:
        sharpe = annualize(port, rf)["annualized_sharpe"]
    except ValueError:
        sharpe = float("nan")
    trades = int(np.count_nonzero(np.diff(np.r_[False, pos])))
    return BacktestResult(cfg, list(realized.dates), pos, port, r.copy(), rf.copy(),
                          float(ann_ret), float(sharpe), trades)


def threshold_sweep(forecasts, realized: ReturnSeries, kind: str, grid: Sequence[float],
                    tau_S: float = 0.5) -> list:
    """(threshold, annualized return, Sharpe) for each grid value.

    For ``kind="S-split"`` the bear-rally threshold stays at ``tau_S`` and the
    grid moves the bull-state threshold.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("threshold grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("threshold grid must be sorted")
    out = []
    for g in grid:
        if kind == "S":
            cfg = StrategyConfig("S", tau_S=g)
        elif kind == "S-split":
            cfg = StrategyConfig("S-split", tau_S=tau_S, tau_S_bull=g)
        elif kind == "B":
            cfg = StrategyConfig("B", tau_B=g)
        else:
            raise ValueError(f"sweeps support B, S and S-split, got {kind!r}")
        res = run_strategy(forecasts, realized, cfg)
        out.append((g, res.annualized_return, res.annualized_sharpe))
    return out


# CSV output -----------------------------------------------------------------

def write_positions_csv(path, result: BacktestResult, probs: np.ndarray) -> None:
    K = probs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [f"p{k + 1}" for k in range(K)]
                   + ["bull_prob", "position", "market_return", "risk_free", "portfolio_return"])
        bull = regime_probability(probs)
        for i, d in enumerate(result.dates):
            w.writerow([d.isoformat()] + [repr(float(x)) for x in probs[i]]
                       + [repr(float(bull[i])), "market" if result.positions[i] else "risk-free",
                          repr(float(result.market_returns[i])), repr(float(result.risk_free[i])),
                          repr(float(result.weekly_returns[i]))])


def write_summary_csv(path, results: Sequence[BacktestResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "annualized_return", "annualized_sharpe", "trades", "weeks"])
        for r in results:
            w.writerow([r.config.label, repr(r.annualized_return), repr(r.annualized_sharpe),
                        r.trade_count, len(r.dates)])


def write_sweep_csv(path, curve, kind: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "threshold", "annualized_return", "annualized_sharpe"])
        for g, ret, sh in curve:
            w.writerow([kind, repr(g), repr(ret), repr(sh)])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        return [(float(r["threshold"]), float(r["annualized_return"]), float(r["annualized_sharpe"]))
                for r in csv.DictReader(fh)]
