"""Out-of-sample forecasts from a posterior sample.

The one-week-ahead predictive density is a mixture with one component per
(posterior draw, state), weighted by that draw's one-step state forecast.
Moments, CDF and log-scores are computed from the components analytically;
the grid is only for plotting.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

from .inference import (
    McmcConfig,
    McmcError,
    PosteriorSample,
    PriorSpec,
    _std_t_logpdf,
    gibbs_estimate,
    hamilton_filter,
)
from .marketdata import ReturnSeries
from .models import ModelSpec
from .regime import ReducibleChainError, regime_probability

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.01, 0.05)
GRID_POINTS = 801
GRID_HALF_WIDTH = 12.0
STRONG_EVIDENCE = math.log(5.0)


class Mixture:
    """Finite mixture of normal or variance-standardized Student-t components."""

    def __init__(self, weights, mu, sigma, nu=None):
        w = np.asarray(weights, dtype=float).ravel()
        keep = w > 0
        self.weights = w[keep] / w[keep].sum()
        self.mu = np.asarray(mu, dtype=float).ravel()[keep]
        self.sigma = np.asarray(sigma, dtype=float).ravel()[keep]
        self.nu = None if nu is None else np.asarray(nu, dtype=float).ravel()[keep]
        if self.nu is not None:
            self._scale = self.sigma * np.sqrt((self.nu - 2.0) / self.nu)

    @property
    def mean(self) -> float:
        return float(self.weights @ self.mu)

    @property
    def variance(self) -> float:
        return float(self.weights @ (self.sigma**2 + self.mu**2) - self.mean**2)

    def _chunks(self, size=4096):
        n = len(self.weights)
        for a in range(0, n, size):
            yield slice(a, min(a + size, n))

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        parts = []
        for sl in self._chunks():
            if self.nu is None:
                z = (x[:, None] - self.mu[sl]) / self.sigma[sl]
                lc = -0.5 * math.log(2 * math.pi) - np.log(self.sigma[sl]) - 0.5 * z * z
            else:
                lc = _std_t_logpdf(x[:, None], self.mu[sl], self.sigma[sl], self.nu[sl])
            parts.append(special.logsumexp(lc, axis=1, b=self.weights[sl]))
        return special.logsumexp(np.stack(parts, axis=1), axis=1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(len(x))
        for sl in self._chunks():
            if self.nu is None:
                c = special.ndtr((x[:, None] - self.mu[sl]) / self.sigma[sl])
            else:
                c = stats.t.cdf((x[:, None] - self.mu[sl]) / self._scale[sl], self.nu[sl])
            out += c @ self.weights[sl]
        return out

    def quantile(self, level: float, tol: float = 1e-12) -> float:
        """Solve cdf(x) = level by bracketing root search on the analytic CDF."""
        sd = math.sqrt(self.variance)
        lo, hi = self.mean - sd, self.mean + sd
        while self.cdf(lo)[0] > level:
            lo -= 2 * sd
        while self.cdf(hi)[0] < level:
            hi += 2 * sd
        return float(optimize.brentq(lambda q: self.cdf(q)[0] - level, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))


@dataclass
class ForecastBundle:
    origin_date: Optional[dt.date]
    horizon: int
    state_probs: np.ndarray
    bull_prob: np.ndarray
    mean: float
    variance: float
    sharpe: float
    var_levels: dict
    var_normal: dict
    grid: Optional[np.ndarray] = None
    pdf: Optional[np.ndarray] = None
    target_date: Optional[dt.date] = None
    logscore: Optional[float] = None
    realized: Optional[float] = None
    mixture: Optional[Mixture] = field(default=None, repr=False)

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass
class PredictiveLikelihoodTrace:
    label: str
    dates: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.dates = list(self.dates)
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values differ in length")

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.values)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "date", "logscore", "cumulative"])
            for d, v, c in zip(self.dates, self.values, self.cumulative):
                w.writerow([self.label, d.isoformat(), repr(float(v)), repr(float(c))])

    @classmethod
    def from_csv(cls, path) -> "PredictiveLikelihoodTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty trace")
        return cls(rows[0]["model"], [dt.date.fromisoformat(r["date"]) for r in rows],
                   [float(r["logscore"]) for r in rows])


# --------------------------------------------------------------------------


def predictive_state_probs(filtered_t, P, h: int) -> np.ndarray:
    """Rows k = 1..h of ``filtered_t @ P^k``.

    ``filtered_t`` and ``P`` may also be stacks over posterior draws, shapes
    (M, K) and (M, K, K); the result is then averaged over draws.
    """
    if h < 1:
        raise ValueError("horizon must be at least 1")
    x = np.asarray(filtered_t, dtype=float)
    M = np.asarray(getattr(P, "matrix", P), dtype=float)
    batched = x.ndim == 2
    if not batched:
        x, M = x[None], M[None]
    out = np.empty((h, x.shape[-1]))
    for k in range(h):
        x = np.einsum("mi,mij->mj", x, M)
        out[k] = x.mean(axis=0)
    return out


def _filtered_last(sample: PosteriorSample, series) -> np.ndarray:
    """p(s_T | r_{1:T}, theta_m) for each draw; recomputed unless ``series`` is the fitted one."""
    if series is None:
        return sample.filtered_last
    r = series.log_return if isinstance(series, ReturnSeries) else np.asarray(series, dtype=float)
    same = len(r) == sample.T and (
        not isinstance(series, ReturnSeries) or series.fingerprint() == sample.data_hash
    )
    if same:
        return sample.filtered_last
    out = np.empty((sample.n_draws, sample.K))
    for m in range(sample.n_draws):
        out[m] = hamilton_filter(r, sample.params(m), sample.P[m]).filtered[-1]
    return out


def predictive_mixture(sample: PosteriorSample, series=None) -> tuple:
    """One-step mixture and the draw-averaged one-step state probabilities."""
    filt = _filtered_last(sample, series)
    weights = np.einsum("mi,mij->mj", filt, sample.P)
    mix = Mixture(weights, sample.mu, sample.sigma, sample.nu)
    return mix, weights.mean(axis=0)


def default_grid(mix: Mixture, points: int = GRID_POINTS, half_width: float = GRID_HALF_WIDTH) -> np.ndarray:
    sd = math.sqrt(mix.variance)
    return np.linspace(mix.mean - half_width * sd, mix.mean + half_width * sd, points)


def bundle_from_mixture(mix: Mixture, state_probs, levels=DEFAULT_LEVELS, grid=None,
                        origin_date=None, with_density=True) -> ForecastBundle:
    mean, var = mix.mean, mix.variance
    pdf = None
    if with_density:
        if grid is None:
            grid = default_grid(mix)
        grid = np.asarray(grid, dtype=float)
        pdf = mix.pdf(grid)
        mass = float(integrate.trapezoid(pdf, grid))
        if mass < 0.995:
            sd = math.sqrt(var)
            raise ValueError(
                f"grid captures only {mass:.4f} of the predictive mass; "
                f"use a grid spanning at least [{mean - 10 * sd:.3f}, {mean + 10 * sd:.3f}]"
            )
    var_levels = {lv: mix.quantile(lv) for lv in levels}
    var_normal = {lv: mean + math.sqrt(var) * float(special.ndtri(lv)) for lv in levels}
    sp = np.atleast_2d(state_probs)
    return ForecastBundle(
        origin_date=origin_date, horizon=1, state_probs=sp,
        bull_prob=np.atleast_1d(regime_probability(sp)) if sp.shape[1] in (2, 4) else np.full(1, np.nan),
        mean=mean, variance=var, sharpe=mean / math.sqrt(var),
        var_levels=var_levels, var_normal=var_normal, grid=grid if with_density else None, pdf=pdf,
        mixture=mix,
    )


def predictive_density(sample: PosteriorSample, series=None, grid=None, levels=DEFAULT_LEVELS,
                       with_density: bool = True) -> ForecastBundle:
    """One-week-ahead predictive bundle after the last observation of ``series``.

    With ``series=None`` the sample's own data are used and no filter is rerun.
    """
    mix, sp = predictive_mixture(sample, series)
    origin = series.dates[-1] if isinstance(series, ReturnSeries) else None
    return bundle_from_mixture(mix, sp, levels, grid, origin, with_density)


def predictive_sharpe(bundle: ForecastBundle) -> float:
    if not bundle.variance > 0:
        raise ValueError("predictive variance must be positive")
    return bundle.mean / math.sqrt(bundle.variance)


def value_at_risk(bundle: ForecastBundle, level: float):
    """(mixture quantile, normal-benchmark quantile) at tail probability ``level``."""
    if not 0 < level < 0.5:
        raise ValueError("VaR level must lie in (0, 0.5)")
    if bundle.mixture is not None:
        q = bundle.mixture.quantile(level)
    else:
        q = bundle.var_levels[level]
    return q, bundle.mean + math.sqrt(bundle.variance) * float(special.ndtri(level))


def horizon_forecast(sample: PosteriorSample, h: int, series=None, origin_date=None) -> ForecastBundle:
    """h-step state and regime forecasts, averaged over draws (no density)."""
    filt = _filtered_last(sample, series)
    sp = predictive_state_probs(filt, sample.P, h)
    mix, _ = predictive_mixture(sample, series)
    mean, var = mix.mean, mix.variance
    return ForecastBundle(
        origin_date=origin_date, horizon=h, state_probs=sp, bull_prob=regime_probability(sp),
        mean=mean, variance=var, sharpe=mean / math.sqrt(var), var_levels={}, var_normal={},
    )


# --------------------------------------------------------------------------
# rolling out-of-sample evaluation


def origin_seeds(master_seed: int, n: int) -> list:
    """Independent per-origin seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master_seed).spawn(n)]


def _one_origin(args):
    series, spec, priors, cfg, t, init, levels, with_density = args
    hist = series[: t]
    sample = gibbs_estimate(hist, spec, priors, cfg, init=init, keep_paths=False)
    bundle = predictive_density(sample, None, levels=levels, with_density=with_density)
    return sample, bundle


@dataclass
class RollingResult:
    bundles: list
    trace: PredictiveLikelihoodTrace
    failures: list


def target_indices(series: ReturnSeries, start: dt.date, end: dt.date) -> list:
    """Indices of weeks whose dates fall in [start, end]; each is forecast from the week before."""
    return [j for j, d in enumerate(series.dates) if start <= d <= end]


def rolling_forecast(
    series: ReturnSeries,
    spec: ModelSpec,
    start: dt.date,
    end: dt.date,
    cfg: McmcConfig = McmcConfig(),
    priors: Optional[PriorSpec] = None,
    warm_start: bool = True,
    warm_burn_in: int = 500,
    levels: Sequence[float] = DEFAULT_LEVELS,
    with_density: bool = True,
    jobs: int = 1,
    min_history: int = 200,
) -> RollingResult:
    """Re-estimate on r_{1:t} for every target week t+1 in [start, end] and score r_{t+1}.

    With ``warm_start`` each origin's chain starts from the previous origin's
    last draw and uses ``warm_burn_in``; origins then run sequentially.
    Otherwise origins are independent and ``jobs`` > 1 runs them in processes.
    """
    targets = target_indices(series, start, end)
    if not targets:
        raise ValueError("evaluation window contains no observations")
    if targets[0] < min_history:
        raise ValueError(f"evaluation window leaves only {targets[0]} weeks of history; need {min_history}")
    seeds = origin_seeds(cfg.seed, len(targets))
    bundles, dates, scores, failures = [], [], [], []

    def record(j, bundle):
        r_next = float(series.log_return[j])
        bundle.origin_date = series.dates[j - 1]
        bundle.target_date = series.dates[j]
        bundle.realized = r_next
        bundle.logscore = float(bundle.mixture.logpdf(r_next)[0])
        bundles.append(bundle)
        dates.append(series.dates[j])
        scores.append(bundle.logscore)

    if warm_start:
        init = None
        for k, j in enumerate(targets):
            c = McmcConfig(
                burn_in=cfg.burn_in if init is None else warm_burn_in,
                retained=cfg.retained, seed=seeds[k], max_rejections=cfg.max_rejections, thin=cfg.thin,
            )
            try:
                sample, bundle = _one_origin((series, spec, priors, c, j, init, levels, with_density))
            except (McmcError, ValueError, ReducibleChainError) as exc:
                log.warning("origin %s skipped: %s", series.dates[j - 1], exc)
                failures.append((series.dates[j - 1], str(exc)))
                continue
            init = sample.draw(sample.n_draws - 1)
            record(j, bundle)
    else:
        tasks = [
            (series, spec, priors,
             McmcConfig(cfg.burn_in, cfg.retained, seeds[k], cfg.max_rejections, cfg.thin),
             j, None, levels, with_density)
            for k, j in enumerate(targets)
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_safe_origin, tasks))
        else:
            results = [_safe_origin(t) for t in tasks]
        for j, res in zip(targets, results):
            if isinstance(res, str):
                log.warning("origin %s skipped: %s", series.dates[j - 1], res)
                failures.append((series.dates[j - 1], res))
            else:
                record(j, res[1])
    trace = PredictiveLikelihoodTrace(spec.label or spec.name, dates, scores)
    return RollingResult(bundles, trace, failures)


def _safe_origin(task):
    try:
        return _one_origin(task)
    except (McmcError, ValueError, ReducibleChainError) as exc:
        return str(exc)


@dataclass
class BayesFactorTrace:
    benchmark: str
    dates: list
    log_bf: dict
    final: dict
    strong: dict


def bayes_factor_trace(traces: Sequence[PredictiveLikelihoodTrace], benchmark: str) -> BayesFactorTrace:
    """Cumulative log predictive Bayes factors of every model against ``benchmark``."""
    by_label = {t.label: t for t in traces}
    if benchmark not in by_label:
        raise ValueError(f"benchmark {benchmark!r} not among {sorted(by_label)}")
    base = by_label[benchmark]
    out, final, strong = {}, {}, {}
    for t in traces:
        if t.dates != base.dates:
            raise ValueError(f"trace {t.label!r} covers a different evaluation window than {benchmark!r}")
        d = t.cumulative - base.cumulative
        out[t.label] = d
        final[t.label] = float(d[-1]) if len(d) else 0.0
        strong[t.label] = abs(final[t.label]) > STRONG_EVIDENCE
    return BayesFactorTrace(benchmark, list(base.dates), out, final, strong)


# --------------------------------------------------------------------------
# CSV output

def bundle_header(K: int, levels=DEFAULT_LEVELS) -> list:
    return (["date", "target_date", "bull_prob"] + [f"p{k + 1}" for k in range(K)]
            + ["mean", "sd", "sharpe"] + [f"var{round(lv * 100):02d}" for lv in levels]
            + [f"var{round(lv * 100):02d}_normal" for lv in levels] + ["realized", "logscore"])


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, dt.date):
        return x.isoformat()
    return repr(float(x))


def write_bundles_csv(path, bundles: Sequence[ForecastBundle], levels=DEFAULT_LEVELS) -> None:
    K = bundles[0].state_probs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(bundle_header(K, levels))
        for b in bundles:
            sp = b.state_probs[0]
            w.writerow([_fmt(b.origin_date), _fmt(b.target_date), _fmt(b.bull_prob[0])]
                       + [_fmt(p) for p in sp] + [_fmt(b.mean), _fmt(b.sd), _fmt(b.sharpe)]
                       + [_fmt(b.var_levels[lv]) for lv in levels] + [_fmt(b.var_normal[lv]) for lv in levels]
                       + [_fmt(b.realized), _fmt(b.logscore)])


def read_bundles_csv(path) -> list:
    """Read a bundle CSV back into bundles (without mixtures or density grids)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames
        K = sum(1 for c in cols if c.startswith("p") and c[1:].isdigit())
        levels = [int(c[3:]) / 100 for c in cols if c.startswith("var") and c[3:].isdigit()]
        out = []
        for row in reader:
            opt = lambda k: float(row[k]) if row.get(k) else None  # noqa: E731
            date = lambda k: dt.date.fromisoformat(row[k]) if row.get(k) else None  # noqa: E731
            sp = np.array([[float(row[f"p{k + 1}"]) for k in range(K)]])
            sd = float(row["sd"])
            out.append(ForecastBundle(
                origin_date=date("date"), horizon=1, state_probs=sp,
                bull_prob=np.array([float(row["bull_prob"])]), mean=float(row["mean"]), variance=sd * sd,
                sharpe=float(row["sharpe"]),
                var_levels={lv: float(row[f"var{round(lv * 100):02d}"]) for lv in levels},
                var_normal={lv: float(row[f"var{round(lv * 100):02d}_normal"]) for lv in levels},
                target_date=date("target_date"), realized=opt("realized"), logscore=opt("logscore"),
            ))
    return out


def write_density_csv(path, bundles: Sequence[ForecastBundle]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["origin", "grid_point", "pdf"])
        for b in bundles:
            if b.grid is None:
                continue
            for x, p in zip(b.grid, b.pdf):
                w.writerow([_fmt(b.origin_date), repr(float(x)), repr(float(p))])


def write_horizon_csv(path, bundle: ForecastBundle) -> None:
    K = bundle.state_probs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h"] + [f"p{k + 1}" for k in range(K)] + ["bull_prob"])
        for h in range(bundle.horizon):
            w.writerow([h + 1] + [repr(float(p)) for p in bundle.state_probs[h]] + [repr(float(bundle.bull_prob[h]))])


def write_bayes_factor_csv(path, bf: BayesFactorTrace) -> None:
    labels = list(bf.log_bf)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + labels)
        for k, d in enumerate(bf.dates):
            w.writerow([d.isoformat()] + [repr(float(bf.log_bf[lb][k])) for lb in labels])
