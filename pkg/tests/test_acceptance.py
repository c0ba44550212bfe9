"""Acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL|SKIP`` line (visible even
under output capture) before asserting. Criteria 9-13 need real daily data:

    BULLBEAR_DAILY_PRICES   daily CSV with date, adjusted_close (1885-2020)
    BULLBEAR_RISKFREE       optional daily yield CSV with date, yield (percent p.a.)
    BULLBEAR_ACCEPT_BURN_IN / BULLBEAR_ACCEPT_RETAINED   MCMC size (default 5000 / 30000)
"""
import datetime as dt
import math
import os
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from bullbear import backtest as bt
from bullbear.forecast import (
    STRONG_EVIDENCE,
    bayes_factor_trace,
    predictive_density,
    predictive_state_probs,
    rolling_forecast,
)
from bullbear.garch import GarchParams, garch_estimate, garch_loglik, rolling_garch
from bullbear.inference import (
    McmcConfig,
    gibbs_estimate,
    hamilton_filter,
    identification_report,
    simulate,
    smoothed_state_probs,
)
from bullbear.marketdata import ReturnSeries, build_weekly_series, load_daily_prices, summary_stats
from bullbear.models import MS2, MS4, MS4_T, MS4_UNRESTRICTED
from bullbear.regime import (
    MS4_ZERO_MASK,
    REFERENCE_PI,
    StateParams,
    reference_parameters,
    stationary_distribution,
)

from oracles import enumerate_loglik, forward_backward, power_iteration_stationary, random_stochastic


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if bool(ok) else "FAIL")
        with capsys.disabled():
            print(f"\ncriterion {n}: {status} | {detail}")
        return ok

    return _report


# --------------------------------------------------------------------------
# property suite


def test_criterion_1_filter_vs_enumeration(report):
    rng = np.random.default_rng(101)
    worst = 0.0
    for k in range(200):
        K = 2 if k % 2 else 4
        T = int(rng.integers(1, 9))
        mask = MS4_ZERO_MASK if K == 4 and k % 4 == 0 else ()
        P = random_stochastic(rng, K, mask)
        params = StateParams(rng.normal(0, 1, K), rng.uniform(0.5, 5, K))
        r = rng.normal(0, 2.5, T)
        init = stationary_distribution(P)
        got = hamilton_filter(r, params, P, init).total_loglik
        worst = max(worst, abs(got - enumerate_loglik(r, params.mu, params.sigma, P, init)))
    ok = worst < 1e-8
    report(1, ok, f"200 instances, max |filter - enumeration| = {worst:.2e} (tol 1e-8)")
    assert ok


def test_criterion_2_stationary_distribution(report):
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(1000):
        P = random_stochastic(rng, int(rng.integers(2, 7)))
        worst = max(worst, np.abs(stationary_distribution(P) - power_iteration_stationary(P)).max())
    _, P = reference_parameters()
    pi = stationary_distribution(P)
    dev = np.abs(pi - REFERENCE_PI).max()
    ok = worst < 1e-8 and dev <= 0.02
    report(2, ok, f"1000 matrices max dev {worst:.2e} (tol 1e-8); reference pi {np.round(pi, 4)} "
                  f"vs {REFERENCE_PI}, max dev {dev:.4f} (tol 0.02)")
    assert ok


def test_criterion_3_ffbs_frequencies(report):
    from bullbear import kernels

    params, P = reference_parameters()
    r = np.array([-2.5, 1.2, 0.4, -0.8, 0.9])
    filt = hamilton_filter(r, params, P)
    M = np.ascontiguousarray(P.matrix)
    n = 200_000
    u = np.random.default_rng(303).random((n, len(r)))
    counts = np.zeros((len(r), 4))
    masked = 0
    for k in range(n):
        path = kernels.backward_sample(filt.filtered, M, u[k])
        counts[np.arange(len(r)), path] += 1
        masked += sum((int(a), int(b)) in MS4_ZERO_MASK for a, b in zip(path[:-1], path[1:]))
    freq = counts / n
    exact = forward_backward(r, params.mu, params.sigma, P.matrix, stationary_distribution(P))
    se = np.sqrt(exact * (1 - exact) / n)
    z = np.where(se > 0, np.abs(freq - exact) / np.where(se > 0, se, 1), np.where(freq == exact, 0, np.inf))
    ok = bool(z.max() < 3) and masked == 0
    report(3, ok, f"{n} paths, max |freq - smoothed| / MC se = {z.max():.2f} (tol 3); masked transitions {masked}")
    assert ok


@pytest.fixture(scope="module")
def recovery_run():
    params, P = reference_parameters()
    r, _ = simulate(params, P, 2000, np.random.default_rng(2020))
    t0 = time.perf_counter()
    sample = gibbs_estimate(r, MS4, cfg=McmcConfig(burn_in=2000, retained=10_000, seed=1))
    return params, sample, time.perf_counter() - t0


def test_criterion_4_parameter_recovery(report, recovery_run):
    params, sample, secs = recovery_run
    z_mu = np.abs(sample.mu.mean(0) - params.mu) / sample.mu.std(0)
    z_sd = np.abs(sample.sigma.mean(0) - params.sigma) / sample.sigma.std(0)
    bad = identification_report(sample)
    ok = bool(z_mu.max() < 3 and z_sd.max() < 3) and not bad and secs < 300
    report(4, ok, f"max |z| mu {z_mu.max():.2f}, sigma {z_sd.max():.2f} (tol 3); "
                  f"unidentified draws {len(bad)}; runtime {secs:.1f}s (target 300s)")
    assert ok


def test_criterion_5_predictive_density(report, recovery_run):
    _, sample, _ = recovery_run
    b = predictive_density(sample)
    mass = integrate.trapezoid(b.pdf, b.grid)
    m1 = integrate.trapezoid(b.grid * b.pdf, b.grid) / mass
    m2 = integrate.trapezoid((b.grid - m1) ** 2 * b.pdf, b.grid) / mass
    cdf_err = max(abs(b.mixture.cdf(q)[0] - lv) for lv, q in b.var_levels.items())
    ok = 0.997 <= mass <= 1.003 and abs(m1 - b.mean) < 1e-3 and abs(m2 - b.variance) < 1e-3 and cdf_err < 1e-8
    report(5, ok, f"grid mass {mass:.6f}; |mean diff| {abs(m1 - b.mean):.1e}; |var diff| {abs(m2 - b.variance):.1e}; "
                  f"max |CDF(VaR) - level| {cdf_err:.1e}")
    assert ok


def test_criterion_6_long_horizon_convergence(report):
    _, P = reference_parameters()
    pi = stationary_distribution(P)
    starts = np.eye(4)
    d1000_ref, d1000_pi, monotone, monotone_pi = [], [], [], []
    for f in starts:
        path = predictive_state_probs(f, P, 1000)
        d_ref = np.abs(path - REFERENCE_PI).max(axis=1)
        d_pi = np.abs(path - pi).max(axis=1)
        d1000_ref.append(d_ref[-1])
        d1000_pi.append(d_pi[-1])
        monotone.append(bool(np.all(np.diff(d_ref[:200]) <= 0)))
        monotone_pi.append(bool(np.all(np.diff(d_pi[:200]) <= 0)))
    ok = max(d1000_ref) < 1e-6 and all(monotone)
    report(6, ok, f"h=1000 sup distance to reference pi {max(d1000_ref):.2e} (tol 1e-6; the rounded reference "
                  f"sums to {REFERENCE_PI.sum():.3f}), to implied pi {max(d1000_pi):.1e}; non-increasing over "
                  f"h=1..200 from e1..e4: {monotone} (to implied pi: {monotone_pi})")
    assert ok


def test_criterion_7_backtest_identities(report):
    rng = np.random.default_rng(707)
    n = 104
    d = [dt.date(2019, 1, 2) + dt.timedelta(weeks=k) for k in range(n)]
    r = rng.normal(0.15, 2.2, n)
    series = ReturnSeries(d, r, r**2, np.full(n, 0.03))
    probs = rng.dirichlet(np.ones(4), size=n)
    hold = bt.run_strategy(probs, series, bt.StrategyConfig("buy-and-hold"))
    checks = []
    for cfg in (bt.StrategyConfig("B", tau_B=0.0), bt.StrategyConfig("S", tau_S=0.0)):
        res = bt.run_strategy(probs, series, cfg)
        checks.append(np.array_equal(res.weekly_returns, hold.weekly_returns)
                      and res.annualized_return == hold.annualized_return
                      and res.annualized_sharpe == hold.annualized_sharpe)
    for cfg in (bt.StrategyConfig("B", tau_B=1.0), bt.StrategyConfig("S", tau_S=1.0)):
        res = bt.run_strategy(probs, series, cfg)
        checks.append(np.array_equal(res.weekly_returns, series.risk_free))
    look_ahead = 0
    for k in range(100):
        g = np.random.default_rng(1000 + k)
        r1 = g.normal(0.1, 2.0, 60)
        p = g.dirichlet(np.ones(4), size=60)
        s1 = ReturnSeries(d[:60], r1, r1**2)
        cut = int(g.integers(1, 60))
        r2 = r1.copy()
        r2[cut:] = g.permutation(r2[cut:])
        s2 = ReturnSeries(d[:60], r2, r2**2)
        for cfg in (bt.StrategyConfig("B"), bt.StrategyConfig("S"), bt.StrategyConfig("S-split", tau_S_bull=0.3)):
            a, b = bt.run_strategy(p, s1, cfg), bt.run_strategy(p, s2, cfg)
            if not np.array_equal(a.positions, b.positions) or not np.array_equal(
                    a.weekly_returns[:cut], b.weekly_returns[:cut]):
                look_ahead += 1
    ok = all(checks) and look_ahead == 0
    report(7, ok, f"extreme thresholds reproduce buy-and-hold / risk-free: {checks}; "
                  f"permutation panels with look-ahead: {look_ahead}/100")
    assert ok


def test_criterion_8_garch(report):
    rng = np.random.default_rng(808)
    r = rng.normal(0.2, 1.7, 500)
    ll, _ = garch_loglik(r, GarchParams(0.2, 1.7**2, 0.0, 0.0))
    e = r[1:] - 0.2
    closed = -0.5 * len(e) * math.log(2 * math.pi * 1.7**2) - float(e @ e) / (2 * 1.7**2)
    iid_err = abs(ll - closed)

    truth = GarchParams(0.1, 0.2, 0.1, 0.85)
    sim = np.empty(5000)
    h = truth.unconditional_variance
    g = np.random.default_rng(5)
    for t in range(5000):
        sim[t] = truth.mu + math.sqrt(h) * g.standard_normal()
        h = truth.omega + truth.alpha * (sim[t] - truth.mu) ** 2 + truth.beta * h
    fit = garch_estimate(sim, seed=0)
    z = np.abs(fit.params.as_array() - truth.as_array()) / fit.std_errors

    p = GarchParams(0.15, 0.3, 0.12, 0.8)
    _, _, grad = garch_loglik(sim[:400], p, with_grad=True)
    x = p.as_array()
    rel = 0.0
    for k in range(4):
        step = 1e-6 * max(abs(x[k]), 1e-2)
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        num = (garch_loglik(sim[:400], GarchParams(*xp))[0] - garch_loglik(sim[:400], GarchParams(*xm))[0]) / (2 * step)
        rel = max(rel, abs(grad[k] - num) / abs(num))
    ok = iid_err < 1e-9 * abs(closed) and z.max() < 3 and rel < 1e-5
    report(8, ok, f"alpha=beta=0 vs closed form |diff| {iid_err:.1e}; recovery max |z| {z.max():.2f} (tol 3); "
                  f"gradient max rel err {rel:.1e} (tol 1e-5)")
    assert ok


# --------------------------------------------------------------------------
# data-dependent suite

PRICES = os.environ.get("BULLBEAR_DAILY_PRICES")
RISKFREE = os.environ.get("BULLBEAR_RISKFREE")
Y2020 = (dt.date(2020, 1, 1), dt.date(2020, 12, 31))


def _need_data(report, n):
    if not PRICES:
        report(n, None, "needs real daily data; set BULLBEAR_DAILY_PRICES (and optionally BULLBEAR_RISKFREE)")
        pytest.skip("no daily price file supplied")


def _mcmc(seed=0):
    return McmcConfig(burn_in=int(os.environ.get("BULLBEAR_ACCEPT_BURN_IN", 5000)),
                      retained=int(os.environ.get("BULLBEAR_ACCEPT_RETAINED", 30000)), seed=seed)


_cache = {}


def _weekly():
    if "weekly" not in _cache:
        daily = load_daily_prices(PRICES)
        rf = load_daily_prices(RISKFREE, price_column="yield", require_positive=False) if RISKFREE else None
        s = build_weekly_series(daily, rf)
        _cache["weekly"] = s[: s.index_of(dt.date(2021, 1, 1))]
    return _cache["weekly"]


def _rolling(spec):
    key = ("rolling", spec.name)
    if key not in _cache:
        _cache[key] = rolling_forecast(_weekly(), spec, *Y2020, _mcmc(), with_density=False)
    return _cache[key]


def _full_sample():
    if "full" not in _cache:
        _cache["full"] = gibbs_estimate(_weekly(), MS4, cfg=_mcmc())
    return _cache["full"]


def test_criterion_9_weekly_statistics(report):
    _need_data(report, 9)
    s = summary_stats(_weekly())
    target = dict(count=7064, mean=0.125, mean_rv_sqrt=1.938, skewness=-0.565, excess_kurtosis=8.007)
    tol = dict(count=5, mean=0.01, mean_rv_sqrt=0.05, skewness=0.05, excess_kurtosis=0.05)
    got = {k: getattr(s, k) for k in target}
    ok = all(abs(got[k] - target[k]) <= tol[k] for k in target)
    report(9, ok, ", ".join(f"{k} {got[k]:.3f} (target {target[k]})" for k in target))
    assert ok


def test_criterion_10_posterior_inside_intervals(report):
    _need_data(report, 10)
    di_mu = [(-1.09, -0.79), (0.14, 0.32), (-0.21, -0.02), (0.42, 0.64)]
    di_sigma = [(5.21, 6.03), (2.27, 2.61), (1.69, 2.04), (0.97, 1.21)]
    sample = _full_sample()
    mu, sd = sample.mu.mean(0), sample.sigma.mean(0)
    inside = [lo <= m <= hi for m, (lo, hi) in zip(mu, di_mu)] + [lo <= m <= hi for m, (lo, hi) in zip(sd, di_sigma)]
    ok = all(inside)
    report(10, ok, f"mu {np.round(mu, 3)}, sigma {np.round(sd, 3)}; inside intervals {inside}")
    assert ok


def test_criterion_11_strategy_returns(report):
    _need_data(report, 11)
    res = _rolling(MS4)
    realized = _weekly().between(*Y2020)
    hold = bt.run_strategy(res.bundles, realized, bt.StrategyConfig("buy-and-hold"))
    s = bt.run_strategy(res.bundles, realized, bt.StrategyConfig("S", tau_S=0.5))
    b = bt.run_strategy(res.bundles, realized, bt.StrategyConfig("B", tau_B=0.5))
    ok = (abs(hold.annualized_return - 0.131) <= 0.01 and abs(hold.annualized_sharpe - 0.566) <= 0.05
          and abs(s.annualized_return - 0.220) <= 0.03
          and s.annualized_return > hold.annualized_return > b.annualized_return)
    report(11, ok, f"buy-and-hold {hold.annualized_return:.3f} / Sharpe {hold.annualized_sharpe:.3f}; "
                   f"S {s.annualized_return:.3f}; B {b.annualized_return:.3f}")
    assert ok


def test_criterion_12_predictive_likelihood(report):
    _need_data(report, 12)
    traces = [_rolling(spec).trace for spec in (MS4, MS4_T, MS4_UNRESTRICTED, MS2)]
    traces.append(rolling_garch(_weekly(), *Y2020).trace)
    totals = [t.total for t in traces]
    bf = bayes_factor_trace(traces, "GARCH11")
    ordered = all(a > b for a, b in zip(totals, totals[1:]))
    ok = ordered and abs(totals[0] + 127.6) <= 2 and bf.final["MS4"] > STRONG_EVIDENCE
    report(12, ok, ", ".join(f"{t.label} {t.total:.1f}" for t in traces) + f"; log BF MS4 vs GARCH {bf.final['MS4']:.2f}")
    assert ok


def test_criterion_13_dating(report):
    _need_data(report, 13)
    series = _weekly()
    probs, bull = smoothed_state_probs(_full_sample())
    j = next(i for i, d in enumerate(series.dates) if d >= dt.date(2020, 2, 24))
    crossing = bull[j] < 0.5 <= bull[j - 1]
    nov = [i for i, d in enumerate(series.dates) if d.year == 2020 and d.month == 11]
    modal = all(int(np.argmax(probs[i])) == 1 for i in nov)
    last = float(probs[-1, 1])
    ok = crossing and modal and abs(last - 0.824) <= 0.05
    report(13, ok, f"bull prob {bull[j - 1]:.3f} -> {bull[j]:.3f} in week of {series.dates[j]}; "
                   f"bear rally modal through November: {modal}; final bear-rally prob {last:.3f}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
