import datetime as dt
import math

import numpy as np
import pytest

from bullbear.forecast import predictive_state_probs
from bullbear.garch import (
    GarchParams,
    conditional_variance,
    garch_estimate,
    garch_forecast,
    garch_loglik,
    rolling_garch,
)
from bullbear.inference import hamilton_filter
from bullbear.marketdata import ReturnSeries


def _simulate(p: GarchParams, T, seed):
    rng = np.random.default_rng(seed)
    r = np.empty(T)
    h = p.unconditional_variance
    for t in range(T):
        r[t] = p.mu + math.sqrt(h) * rng.standard_normal()
        h = p.omega + p.alpha * (r[t] - p.mu) ** 2 + p.beta * h
    return r


def test_white_noise_closed_form():
    r = np.random.default_rng(0).normal(0.2, 1.5, 50)
    p = GarchParams(0.2, 2.25, 0.0, 0.0)
    ll, h = garch_loglik(r, p)
    np.testing.assert_allclose(h, 2.25)
    e = r[1:] - 0.2
    assert ll == pytest.approx(float(np.sum(-0.5 * np.log(2 * np.pi * 2.25) - e**2 / 4.5)), abs=1e-10)


def test_five_step_hand_recursion():
    r = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
    p = GarchParams(0.0, 0.1, 0.2, 0.7)
    h = [0.1 / 0.1]
    for t in range(1, 5):
        h.append(0.1 + 0.2 * r[t - 1] ** 2 + 0.7 * h[-1])
    # 1.0, 0.1+0.2+0.7=1.0, 0.1+0.8+0.7=1.6, 0.1+0.05+1.12=1.27, 0.1+1.8+0.889=2.789
    np.testing.assert_allclose(h, [1.0, 1.0, 1.6, 1.27, 2.789], atol=1e-12)
    np.testing.assert_allclose(conditional_variance(r, p), h, atol=1e-12)
    ll, _ = garch_loglik(r, p)
    hh = np.array(h[1:])
    assert ll == pytest.approx(float(np.sum(-0.5 * np.log(2 * np.pi * hh) - r[1:] ** 2 / (2 * hh))), abs=1e-12)


def test_first_observation_initialization():
    r = np.array([2.0, 0.0, 1.0])
    h = conditional_variance(r, GarchParams(0.0, 0.1, 0.2, 0.7), init_var="first")
    np.testing.assert_allclose(h, [4.0, 0.1 + 0.8 + 2.8, 0.1 + 0.0 + 0.7 * 3.7])


@pytest.mark.parametrize("init_var", ["unconditional", "first"])
def test_gradient_matches_finite_differences(init_var):
    r = np.random.default_rng(3).normal(0.1, 2.0, 300)
    p = GarchParams(0.15, 0.3, 0.12, 0.8)
    _, _, g = garch_loglik(r, p, init_var, with_grad=True)
    x = p.as_array()
    for k in range(4):
        d = 1e-6 * max(abs(x[k]), 1e-2)
        xp, xm = x.copy(), x.copy()
        xp[k] += d
        xm[k] -= d
        num = (garch_loglik(r, GarchParams(*xp), init_var)[0] - garch_loglik(r, GarchParams(*xm), init_var)[0]) / (2 * d)
        assert g[k] == pytest.approx(num, rel=1e-5)


def test_parameter_validation():
    with pytest.raises(ValueError, match="below 1"):
        GarchParams(0.0, 0.1, 0.5, 0.5)
    with pytest.raises(ValueError, match="omega"):
        GarchParams(0.0, 0.0, 0.1, 0.5)
    assert GarchParams(0.0, 0.1, 0.1, 0.8).half_life == pytest.approx(math.log(0.5) / math.log(0.9))


def test_recovers_simulation_truth():
    truth = GarchParams(0.1, 0.2, 0.1, 0.85)
    fit = garch_estimate(_simulate(truth, 5000, 5), seed=0)
    z = (fit.params.as_array() - truth.as_array()) / fit.std_errors
    assert np.all(np.abs(z) < 3), z
    assert fit.converged


def test_no_arch_effect_gives_small_alpha():
    r = np.random.default_rng(6).normal(0.0, 2.0, 3000)
    fit = garch_estimate(r, seed=0)
    assert fit.params.alpha < 0.02


def test_estimate_is_deterministic():
    r = _simulate(GarchParams(0.0, 0.3, 0.1, 0.8), 800, 7)
    a, b = garch_estimate(r, seed=2), garch_estimate(r, seed=2)
    np.testing.assert_array_equal(a.params.as_array(), b.params.as_array())


def test_estimate_needs_100_observations():
    with pytest.raises(ValueError, match="at least 100"):
        garch_estimate(np.zeros(50))


def test_three_observation_forecast():
    p = GarchParams(0.1, 0.2, 0.1, 0.8)
    r = np.array([1.1, -0.9, 2.1])
    h = [2.0]
    for x in r:
        h.append(0.2 + 0.1 * (x - 0.1) ** 2 + 0.8 * h[-1])
    # 2.0 -> 0.2+0.1+1.6=1.9 -> 0.2+0.1+1.52=1.82 -> 0.2+0.4+1.456=2.056
    fc = garch_forecast(r, p, realized=0.5)
    assert fc.variance == pytest.approx(2.056, abs=1e-12)
    assert fc.mean == 0.1
    assert fc.var_levels[0.05] == pytest.approx(0.1 - 1.6448536 * math.sqrt(2.056), abs=1e-6)
    z = (0.5 - 0.1) / math.sqrt(2.056)
    assert fc.logscore == pytest.approx(-0.5 * math.log(2 * math.pi * 2.056) - 0.5 * z * z, abs=1e-12)


def test_rolling_garch_window():
    r = _simulate(GarchParams(0.1, 0.2, 0.1, 0.85), 160, 9)
    s = ReturnSeries.from_returns(r, start=dt.date(2001, 1, 3))
    out = rolling_garch(s, s.dates[150], s.dates[154])
    assert out.trace.dates == list(s.dates[150:155])
    for fc, j in zip(out.forecasts, range(150, 155)):
        ref = garch_forecast(s[:j], out.fits[j - 150].params, float(r[j]))
        assert fc.logscore == pytest.approx(ref.logscore, abs=1e-12)
        assert fc.origin_date == s.dates[j - 1]


def test_shock_reaction_garch_vs_switching(ref_params):
    """A large negative week lifts GARCH variance at once; the switching model moves state mass."""
    params, P = ref_params
    calm = np.full(30, 0.3)
    shocked = np.r_[calm, -15.0]
    g = GarchParams(0.2, 0.1, 0.1, 0.85)
    assert garch_forecast(shocked, g).variance > 5 * garch_forecast(calm, g).variance
    before = predictive_state_probs(hamilton_filter(calm, params, P).filtered[-1], P, 1)[0]
    after = predictive_state_probs(hamilton_filter(shocked, params, P).filtered[-1], P, 1)[0]
    assert after[0] > 0.5 > before[0]
