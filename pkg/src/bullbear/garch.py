"""GARCH(1,1) benchmark: Gaussian likelihood, ML fit, one-step forecasts, rolling scores.

    eps_t     = r_t - mu
    sigma2_t  = omega + alpha * eps_{t-1}^2 + beta * sigma2_{t-1}

The recursion starts at the unconditional variance omega / (1 - alpha - beta)
(or at the first squared residual with ``init_var="first"``), and the
likelihood sums over t >= 2.
"""
from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special

from . import kernels
from .forecast import DEFAULT_LEVELS, PredictiveLikelihoodTrace, target_indices
from .marketdata import ReturnSeries

LOG_2PI = math.log(2.0 * math.pi)


class GarchError(RuntimeError):
    pass


@dataclass(frozen=True)
class GarchParams:
    mu: float
    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.alpha + self.beta < 1:
            raise ValueError("alpha + beta must be below 1 (covariance stationarity)")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    @property
    def half_life(self) -> float:
        """Weeks for a variance shock to decay by half."""
        p = self.persistence
        return math.inf if p >= 1 else (0.0 if p == 0 else math.log(0.5) / math.log(p))

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.omega, self.alpha, self.beta])


def _r(series) -> np.ndarray:
    return np.ascontiguousarray(series.log_return if isinstance(series, ReturnSeries) else series, dtype=float)


def _h0(eps, p: GarchParams, init_var: str):
    if init_var == "unconditional":
        u = 1.0 - p.alpha - p.beta
        return p.omega / u, np.array([0.0, 1.0 / u, p.omega / u**2, p.omega / u**2])
    if init_var == "first":
        return eps[0] ** 2, np.array([-2.0 * eps[0], 0.0, 0.0, 0.0])
    raise ValueError("init_var must be 'unconditional' or 'first'")


def conditional_variance(series, params: GarchParams, init_var: str = "unconditional") -> np.ndarray:
    r = _r(series)
    eps = r - params.mu
    h0, dh0 = _h0(eps, params, init_var)
    h, _ = kernels.garch_recursion(eps, params.omega, params.alpha, params.beta, h0, dh0, False)
    return h


def garch_loglik(series, params: GarchParams, init_var: str = "unconditional", with_grad: bool = False):
    """Total Gaussian log-likelihood over t >= 2 and the conditional variance path.

    With ``with_grad`` also returns d loglik / d(mu, omega, alpha, beta).
    """
    r = _r(series)
    eps = r - params.mu
    h0, dh0 = _h0(eps, params, init_var)
    h, dh = kernels.garch_recursion(eps, params.omega, params.alpha, params.beta, h0, dh0, with_grad)
    e, hh = eps[1:], h[1:]
    ll = float(-0.5 * np.sum(LOG_2PI + np.log(hh) + e * e / hh))
    if not with_grad:
        return ll, h
    g = -0.5 * ((1.0 / hh - e * e / hh**2)[:, None] * dh[1:]).sum(axis=0)
    g[0] += np.sum(e / hh)
    return ll, h, g


# reparameterization: (mu, log omega, logit(alpha + beta), logit(alpha / (alpha + beta)))

def _to_natural(x) -> GarchParams:
    p = special.expit(x[2])
    a = special.expit(x[3])
    return GarchParams(float(x[0]), float(math.exp(x[1])), float(p * a), float(p * (1 - a)))


def _jacobian(x) -> np.ndarray:
    """d(mu, omega, alpha, beta) / dx."""
    p, a = special.expit(x[2]), special.expit(x[3])
    dp, da = p * (1 - p), a * (1 - a)
    J = np.zeros((4, 4))
    J[0, 0] = 1.0
    J[1, 1] = math.exp(x[1])
    J[2, 2], J[2, 3] = dp * a, p * da
    J[3, 2], J[3, 3] = dp * (1 - a), -p * da
    return J


def _to_free(p: GarchParams) -> np.ndarray:
    pers = min(max(p.alpha + p.beta, 1e-6), 1 - 1e-6)
    share = min(max(p.alpha / pers if pers > 0 else 0.5, 1e-6), 1 - 1e-6)
    return np.array([p.mu, math.log(p.omega), special.logit(pers), special.logit(share)])


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    cov: np.ndarray
    loglik: float
    converged: bool

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0, None))


def _default_starts(r: np.ndarray, seed: int, n_random: int):
    m, v = float(r.mean()), float(r.var())
    starts = []
    for pers, share in ((0.95, 0.08), (0.9, 0.15), (0.98, 0.04), (0.5, 0.5)):
        starts.append(GarchParams(m, v * (1 - pers), pers * share, pers * (1 - share)))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        pers = rng.uniform(0.3, 0.995)
        share = rng.uniform(0.01, 0.5)
        starts.append(GarchParams(m, v * (1 - pers), pers * share, pers * (1 - share)))
    return starts


def numerical_hessian(r, params: GarchParams, init_var="unconditional", step=1e-5) -> np.ndarray:
    """Central differences of the analytic gradient in natural parameters."""
    x = params.as_array()
    H = np.zeros((4, 4))
    for k in range(4):
        d = step * max(abs(x[k]), 1e-2)
        xp, xm = x.copy(), x.copy()
        xp[k] += d
        xm[k] -= d
        try:
            gp = garch_loglik(r, GarchParams(*xp), init_var, True)[2]
            gm = garch_loglik(r, GarchParams(*xm), init_var, True)[2]
        except ValueError:  # step crosses a boundary; use a one-sided difference
            xs = xp if xp[k] >= 0 and xp[2] + xp[3] < 1 else xm
            g0 = garch_loglik(r, params, init_var, True)[2]
            gs = garch_loglik(r, GarchParams(*xs), init_var, True)[2]
            H[:, k] = (gs - g0) / (xs[k] - x[k])
            continue
        H[:, k] = (gp - gm) / (2 * d)
    return 0.5 * (H + H.T)


def garch_estimate(series, seed: int = 0, starts: Optional[Sequence[GarchParams]] = None,
                   n_random: int = 4, init_var: str = "unconditional") -> GarchFit:
    """Maximum likelihood with multi-start L-BFGS on the stationarity-preserving reparameterization."""
    r = _r(series)
    if len(r) < 100:
        raise ValueError(f"need at least 100 observations, got {len(r)}")
    if starts is None:
        starts = _default_starts(r, seed, n_random)

    def objective(x):
        try:
            p = _to_natural(x)
            ll, _, g = garch_loglik(r, p, init_var, True)
        except (ValueError, FloatingPointError):
            return 1e300, np.zeros(4)
        if not math.isfinite(ll):
            return 1e300, np.zeros(4)
        return -ll, -(g @ _jacobian(x))

    best = None
    for s in starts:
        res = optimize.minimize(objective, _to_free(s), jac=True, method="L-BFGS-B",
                                options={"maxiter": 500, "gtol": 1e-7})
        if not np.all(np.isfinite(res.x)) or res.fun >= 1e299:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise GarchError("GARCH optimizer failed from every starting point")
    params = _to_natural(best.x)
    H = numerical_hessian(r, params, init_var)
    try:
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
    return GarchFit(params, cov, -float(best.fun), bool(best.success))


@dataclass
class GarchForecast:
    origin_date: Optional[dt.date]
    mean: float
    variance: float
    var_levels: dict
    target_date: Optional[dt.date] = None
    realized: Optional[float] = None
    logscore: Optional[float] = None

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def garch_forecast(series, params: GarchParams, realized: Optional[float] = None,
                   levels=DEFAULT_LEVELS, init_var: str = "unconditional") -> GarchForecast:
    """One-step mean, variance, normal VaR and (optionally) log-score of the next return."""
    r = _r(series)
    h = conditional_variance(r, params, init_var)
    e = r[-1] - params.mu
    var = params.omega + params.alpha * e * e + params.beta * h[-1]
    sd = math.sqrt(var)
    vl = {lv: params.mu + sd * float(special.ndtri(lv)) for lv in levels}
    score = None
    if realized is not None:
        z = (realized - params.mu) / sd
        score = -0.5 * LOG_2PI - math.log(sd) - 0.5 * z * z
    origin = series.dates[-1] if isinstance(series, ReturnSeries) else None
    return GarchForecast(origin, params.mu, var, vl, realized=realized, logscore=score)


@dataclass
class GarchRolling:
    forecasts: list
    trace: PredictiveLikelihoodTrace
    fits: list


def rolling_garch(series: ReturnSeries, start: dt.date, end: dt.date, seed: int = 0,
                  levels=DEFAULT_LEVELS, init_var: str = "unconditional", label: str = "GARCH11") -> GarchRolling:
    """Refit by ML on r_{1:t} for each target week t+1 in [start, end] and score r_{t+1}.

    Each refit starts from the previous optimum, falling back to the full
    multi-start set if that fails.
    """
    targets = target_indices(series, start, end)
    if not targets:
        raise ValueError("evaluation window contains no observations")
    forecasts, fits, dates, scores = [], [], [], []
    prev = None
    for j in targets:
        hist = series[:j]
        try:
            fit = garch_estimate(hist, seed=seed, starts=None if prev is None else [prev], init_var=init_var)
        except GarchError:
            fit = garch_estimate(hist, seed=seed, init_var=init_var)
        prev = fit.params
        fc = garch_forecast(hist, fit.params, float(series.log_return[j]), levels, init_var)
        fc.target_date = series.dates[j]
        forecasts.append(fc)
        fits.append(fit)
        dates.append(series.dates[j])
        scores.append(fc.logscore)
    return GarchRolling(forecasts, PredictiveLikelihoodTrace(label, dates, scores), fits)
