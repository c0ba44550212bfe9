"""Likelihood, state sampling and Gibbs estimation for the Markov-switching variants.

The sampler alternates

1. a forward filter / backward sampler draw of the whole state path,
2. Dirichlet draws of each transition row over its free cells,
3. conjugate normal draws of each state mean, truncated to its sign region,
4. conjugate inverse-gamma draws of each state variance,
5. (Student-t variant) latent precision weights and a griddy-Gibbs draw of
   the degrees of freedom.

Proposals that break the long-run regime-mean restrictions are rejected and
the previous value of that block is kept.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats

from . import kernels
from .marketdata import ReturnSeries
from .models import MS4, ModelSpec
from .regime import (
    ReducibleChainError,
    StateParams,
    TransitionMatrix,
    check_identification,
    regime_probability,
    stationary_distribution,
)

log = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class McmcError(RuntimeError):
    """The sampler could not continue (stuck restriction block, non-finite likelihood)."""


@dataclass(frozen=True)
class PriorSpec:
    """Conjugate prior hyperparameters, one entry per state.

    ``dirichlet`` is a K x K array of concentrations; masked cells must be 0.
    """

    mu_mean: np.ndarray
    mu_var: np.ndarray
    sigma2_shape: np.ndarray
    sigma2_scale: np.ndarray
    dirichlet: np.ndarray
    nu_grid: np.ndarray = field(default_factory=lambda: np.arange(3.0, 41.0))

    def __post_init__(self):
        for name in ("mu_mean", "mu_var", "sigma2_shape", "sigma2_scale", "dirichlet", "nu_grid"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if np.any(self.mu_var <= 0) or np.any(self.sigma2_shape <= 0) or np.any(self.sigma2_scale <= 0):
            raise ValueError("prior variances and inverse-gamma parameters must be positive")
        if np.any(self.dirichlet < 0):
            raise ValueError("Dirichlet concentrations must be non-negative")
        if np.any(self.nu_grid <= 2):
            raise ValueError("degrees-of-freedom grid must lie above 2")

    @classmethod
    def default(cls, spec: ModelSpec) -> "PriorSpec":
        K = spec.K
        alpha = np.full((K, K), 2.0)
        np.fill_diagonal(alpha, 8.0)
        alpha[~spec.free_mask()] = 0.0
        return cls(
            mu_mean=np.zeros(K),
            mu_var=np.ones(K),
            sigma2_shape=np.full(K, 2.5),
            sigma2_scale=np.full(K, 2.5),
            dirichlet=alpha,
        )

    def check(self, spec: ModelSpec) -> None:
        free = spec.free_mask()
        if self.dirichlet.shape != free.shape:
            raise ValueError("Dirichlet prior has the wrong shape")
        if np.any(self.dirichlet[~free] != 0):
            raise ValueError("masked transition cells must carry no Dirichlet concentration")
        if np.any(self.dirichlet[free] <= 0):
            raise ValueError("free transition cells need positive Dirichlet concentration")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("mu_mean", "mu_var", "sigma2_shape", "sigma2_scale", "dirichlet", "nu_grid")}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(**d)


@dataclass(frozen=True)
class McmcConfig:
    burn_in: int = 5000
    retained: int = 30000
    seed: int = 0
    max_rejections: int = 1000
    thin: int = 1

    def __post_init__(self):
        if self.burn_in < 0 or self.retained < 1 or self.thin < 1 or self.max_rejections < 1:
            raise ValueError("need burn_in >= 0, retained >= 1, thin >= 1, max_rejections >= 1")


@dataclass(frozen=True)
class FilterOutput:
    predicted: np.ndarray
    filtered: np.ndarray
    loglik_contrib: np.ndarray

    @property
    def total_loglik(self) -> float:
        return float(self.loglik_contrib.sum())

    def one_step_ahead(self, P) -> np.ndarray:
        """State probabilities for the period after the last observation."""
        M = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P)
        return self.filtered[-1] @ M


# --------------------------------------------------------------------------
# emissions


def _std_t_logpdf(r, mu, sigma, nu):
    scale = sigma * np.sqrt((nu - 2.0) / nu)
    z = (r - mu) / scale
    return (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
        - np.log(scale)
        - (nu + 1.0) / 2.0 * np.log1p(z * z / nu)
    )


def emission_logdensity(r: float, params: StateParams, state: int) -> float:
    """Log density of one return under one state (normal, or variance-standardized t)."""
    mu, sigma = params.mu[state], params.sigma[state]
    if params.nu is None:
        z = (r - mu) / sigma
        return float(-LOG_SQRT_2PI - math.log(sigma) - 0.5 * z * z)
    return float(_std_t_logpdf(r, mu, sigma, params.nu[state]))


def emission_matrix(r, mu, sigma, nu=None) -> np.ndarray:
    """(T, K) array of per-state log densities."""
    r = np.asarray(r, dtype=float)[:, None]
    if nu is None:
        z = (r - mu) / sigma
        return np.ascontiguousarray(-LOG_SQRT_2PI - np.log(sigma) - 0.5 * z * z)
    return np.ascontiguousarray(_std_t_logpdf(r, mu, sigma, nu))


def _returns(series) -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.log_return
    return np.asarray(series, dtype=float)


def hamilton_filter(series, params: StateParams, P, init=None) -> FilterOutput:
    """Run the forward filter; ``init`` defaults to the stationary distribution of ``P``."""
    r = _returns(series)
    if not np.all(np.isfinite(r)):
        raise ValueError("returns must be finite")
    M = np.ascontiguousarray(P.matrix if isinstance(P, TransitionMatrix) else P, dtype=float)
    if M.shape != (params.K, params.K):
        raise ValueError("parameter and transition dimensions differ")
    if init is None:
        init = stationary_distribution(M)
    init = np.ascontiguousarray(init, dtype=float)
    logdens = emission_matrix(r, params.mu, params.sigma, params.nu)
    pred, filt, ll = kernels.filter_forward(logdens, M, init)
    return FilterOutput(pred, filt, ll)


def ffbs_sample(filt: FilterOutput, P, rng: np.random.Generator) -> np.ndarray:
    """Draw one state path (0-based) from p(s_{1:T} | r_{1:T}, params)."""
    M = np.ascontiguousarray(P.matrix if isinstance(P, TransitionMatrix) else P, dtype=float)
    u = rng.random(filt.filtered.shape[0])
    return kernels.backward_sample(filt.filtered, M, u)


def simulate(params: StateParams, P, T: int, rng: np.random.Generator, init=None):
    """Simulate (returns, states) of length T from the Markov-switching model."""
    M = P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    K = params.K
    p0 = stationary_distribution(M) if init is None else np.asarray(init, dtype=float)
    states = np.empty(T, dtype=np.int64)
    states[0] = rng.choice(K, p=p0)
    cum = np.cumsum(M, axis=1)
    u = rng.random(T)
    for t in range(1, T):
        states[t] = min(int(np.searchsorted(cum[states[t - 1]], u[t], side="right")), K - 1)
    eps = rng.standard_normal(T)
    if params.nu is not None:
        nu = params.nu[states]
        eps = rng.standard_t(nu) * np.sqrt((nu - 2.0) / nu)
    return params.mu[states] + params.sigma[states] * eps, states


# --------------------------------------------------------------------------
# posterior sample container


@dataclass(frozen=True)
class PosteriorDraw:
    params: StateParams
    P: TransitionMatrix
    state_path: Optional[np.ndarray] = None


@dataclass
class PosteriorSample:
    """Retained draws stored column-wise.

    ``filtered_last[m]`` holds p(s_T | r_{1:T}, theta_m) for draw m, which is
    what the one-step predictive density needs.
    """

    spec: ModelSpec
    priors: PriorSpec
    seed: int
    data_hash: str
    T: int
    mu: np.ndarray
    sigma: np.ndarray
    P: np.ndarray
    state_counts: np.ndarray
    filtered_last: np.ndarray
    last_state: np.ndarray
    loglik: np.ndarray
    nu: Optional[np.ndarray] = None
    paths: Optional[np.ndarray] = None
    rejections: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.mu.shape[0]

    @property
    def K(self) -> int:
        return self.mu.shape[1]

    def params(self, m: int) -> StateParams:
        return StateParams(self.mu[m], self.sigma[m], None if self.nu is None else self.nu[m])

    def transition(self, m: int) -> TransitionMatrix:
        return TransitionMatrix(self.P[m], self.spec.zero_mask)

    def draw(self, m: int) -> PosteriorDraw:
        path = None if self.paths is None else self.paths[m].astype(np.int64)
        return PosteriorDraw(self.params(m), self.transition(m), path)

    @property
    def draws(self):
        return [self.draw(m) for m in range(self.n_draws)]

    def thinned(self, n: int) -> "PosteriorSample":
        if n <= 1:
            return self
        sl = slice(None, None, n)
        # without stored paths the full-sample frequencies are the best available
        counts = self.state_counts
        if self.paths is not None:
            counts = np.zeros_like(self.state_counts)
            for k in range(self.K):
                counts[:, k] = (self.paths[sl] == k).sum(axis=0)
        return replace(
            self,
            mu=self.mu[sl], sigma=self.sigma[sl], P=self.P[sl],
            nu=None if self.nu is None else self.nu[sl],
            paths=None if self.paths is None else self.paths[sl],
            filtered_last=self.filtered_last[sl], last_state=self.last_state[sl],
            loglik=self.loglik[sl],
            state_counts=counts,
        )

    # persistence --------------------------------------------------------

    def save(self, path, thin: int = 1) -> None:
        s = self.thinned(thin)
        header = {
            "format": "bullbear-posterior/1",
            "spec": s.spec.to_dict(),
            "priors": s.priors.to_dict(),
            "seed": s.seed,
            "data_hash": s.data_hash,
            "T": s.T,
            "thin": thin,
            "rejections": s.rejections,
        }
        arrays = dict(
            mu=s.mu, sigma=s.sigma, P=s.P, state_counts=s.state_counts,
            filtered_last=s.filtered_last, last_state=s.last_state, loglik=s.loglik,
        )
        if s.nu is not None:
            arrays["nu"] = s.nu
        if s.paths is not None:
            arrays["paths"] = s.paths
        with open(path, "wb") as fh:
            np.savez_compressed(fh, header=np.array(json.dumps(header)), **arrays)

    @classmethod
    def load(cls, path) -> "PosteriorSample":
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            if header.get("format") != "bullbear-posterior/1":
                raise ValueError(f"{path}: not a posterior sample file")
            get = lambda k: z[k] if k in z.files else None  # noqa: E731
            return cls(
                spec=ModelSpec.from_dict(header["spec"]),
                priors=PriorSpec.from_dict(header["priors"]),
                seed=header["seed"],
                data_hash=header["data_hash"],
                T=header["T"],
                mu=z["mu"], sigma=z["sigma"], P=z["P"], state_counts=z["state_counts"],
                filtered_last=z["filtered_last"], last_state=z["last_state"], loglik=z["loglik"],
                nu=get("nu"), paths=get("paths"), rejections=header.get("rejections", {}),
            )


# --------------------------------------------------------------------------
# Gibbs sampler


def _signs(spec: ModelSpec) -> Optional[np.ndarray]:
    if not spec.sign_restricted:
        return None
    return np.array([-1.0, 1.0, -1.0, 1.0]) if spec.K == 4 else np.array([-1.0, 1.0])


def _truncated_normal(rng, mean, sd, sign):
    """Normal(mean, sd) conditioned on sign*x > 0, by inverse CDF."""
    # Work with y = sign*x, which must be positive: y ~ N(sign*mean, sd) on (0, inf).
    m = sign * mean
    a = -m / sd
    tail = special.ndtr(-a)
    if tail > 1e-300:
        u = 1.0 - rng.random()  # (0, 1]
        z = -special.ndtri(u * tail)
        z = max(z, a)
    else:
        z = stats.truncnorm.rvs(a, np.inf, random_state=rng)
    y = m + sd * z
    if y <= 0.0:
        y = np.nextafter(0.0, 1.0)
    return sign * y


def _long_run_ok(mu, pi, K) -> bool:
    if K != 4:
        return True
    bear = pi[0] + pi[1]
    bull = pi[2] + pi[3]
    return bear > 0 and bull > 0 and (pi[0] * mu[0] + pi[1] * mu[1]) < 0 and (pi[2] * mu[2] + pi[3] * mu[3]) > 0


def _draw_rows(rng, alpha: np.ndarray, free: np.ndarray) -> np.ndarray:
    K = alpha.shape[0]
    P = np.zeros((K, K))
    for i in range(K):
        idx = free[i]
        g = rng.gamma(alpha[i, idx])
        P[i, idx] = g / g.sum()
    return P


def initial_state(r: np.ndarray, spec: ModelSpec, priors: PriorSpec):
    """Deterministic, restriction-satisfying starting values.

    Means come from return quantiles assigned in the order
    bear < bull correction < bear rally < bull, sigma is the sample standard
    deviation and P is the prior mean of the Dirichlet rows.
    """
    K = spec.K
    sd = float(np.std(r))
    if K == 4:
        mu = np.quantile(r, [0.10, 0.65, 0.35, 0.90])
    elif K == 2:
        mu = np.quantile(r, [0.25, 0.75])
    else:
        mu = np.quantile(r, np.linspace(0.1, 0.9, K))
    signs = _signs(spec)
    if signs is not None:
        wrong = signs * mu <= 0
        mu[wrong] = signs[wrong] * 0.1 * sd
    sigma = np.full(K, sd)
    P = priors.dirichlet / priors.dirichlet.sum(axis=1, keepdims=True)
    nu = np.full(K, 10.0) if spec.student_t else None
    pi = stationary_distribution(P)
    if spec.long_run and not _long_run_ok(mu, pi, K):
        mu = signs * np.array([0.5, 0.25, 0.1, 0.5]) * sd
    return mu, sigma, nu, P


def gibbs_estimate(
    series,
    spec: ModelSpec = MS4,
    priors: Optional[PriorSpec] = None,
    cfg: Optional[McmcConfig] = None,
    init: Optional[PosteriorDraw] = None,
    keep_paths: Optional[bool] = None,
) -> PosteriorSample:
    """Posterior simulation for a Markov-switching ``spec``.

    ``init`` warm-starts the chain (e.g. from the previous forecast origin).
    ``keep_paths`` stores every retained state path; by default paths are
    kept when the result stays under ~50M entries.
    """
    if spec.K < 1:
        raise ValueError(f"{spec.name} is not a Markov-switching model")
    cfg = cfg or McmcConfig()
    priors = priors or PriorSpec.default(spec)
    priors.check(spec)
    r = np.ascontiguousarray(_returns(series), dtype=float)
    T = len(r)
    if T < 50:
        raise ValueError(f"need at least 50 observations, got {T}")
    K = spec.K
    free = spec.free_mask()
    signs = _signs(spec)
    rng = np.random.default_rng(cfg.seed)
    n_keep = cfg.retained
    if keep_paths is None:
        keep_paths = n_keep * T <= 50_000_000

    if init is not None:
        mu = init.params.mu.copy()
        sigma = init.params.sigma.copy()
        nu = None if init.params.nu is None else init.params.nu.copy()
        P = init.P.matrix.copy() if isinstance(init.P, TransitionMatrix) else np.array(init.P, dtype=float)
        if spec.student_t and nu is None:
            nu = np.full(K, 10.0)
    else:
        mu, sigma, nu, P = initial_state(r, spec, priors)
    try:
        pi = stationary_distribution(P)
    except ReducibleChainError as exc:
        raise McmcError(f"initial transition matrix unusable: {exc}") from exc
    if spec.long_run and not _long_run_ok(mu, pi, K):
        raise McmcError("starting values violate the long-run regime restrictions")

    out_mu = np.empty((n_keep, K))
    out_sigma = np.empty((n_keep, K))
    out_nu = np.empty((n_keep, K)) if spec.student_t else None
    out_P = np.empty((n_keep, K, K))
    out_last = np.empty(n_keep, dtype=np.int64)
    out_filt = np.empty((n_keep, K))
    out_ll = np.empty(n_keep)
    out_paths = np.empty((n_keep, T), dtype=np.int8) if keep_paths else None
    counts_state = np.zeros((T, K), dtype=np.int64)
    onehot = np.eye(K, dtype=np.int64)

    a0, b0 = priors.sigma2_shape, priors.sigma2_scale
    m0, v0 = priors.mu_mean, priors.mu_var
    nu_grid = priors.nu_grid
    stuck = {"P": 0, "mu": 0}
    rejected = {"P": 0, "mu": 0}
    pending = -1
    kept = 0
    total = cfg.burn_in + n_keep * cfg.thin

    def run_filter():
        logdens = emission_matrix(r, mu, sigma, nu)
        try:
            return kernels.filter_forward(logdens, P, pi)
        except FloatingPointError as exc:
            raise McmcError(f"non-finite likelihood: {exc}") from exc

    for it in range(total):
        _, filt, ll = run_filter()
        if pending >= 0:
            out_filt[pending] = filt[-1]
            out_ll[pending] = ll.sum()
            pending = -1
        path = kernels.backward_sample(filt, P, rng.random(T))

        # transition rows; the initial-state term p(s_1 | P) = pi(P)[s_1] enters as an MH ratio
        trans = kernels.transition_counts(path, K)
        P_new = _draw_rows(rng, priors.dirichlet + trans, free)
        u_mh = rng.random()
        try:
            pi_new = stationary_distribution(P_new)
            ok = u_mh * pi[path[0]] < pi_new[path[0]]
            ok = ok and (not spec.long_run or _long_run_ok(mu, pi_new, K))
        except ReducibleChainError:
            ok = False
        if ok:
            P, pi = P_new, pi_new
            stuck["P"] = 0
        else:
            stuck["P"] += 1
            rejected["P"] += 1

        s = path
        resid_w = None
        if spec.student_t:
            c = (nu - 2.0) / nu
            z2 = (r - mu[s]) ** 2 / (sigma[s] ** 2 * c[s])
            lam = rng.gamma((nu[s] + 1.0) / 2.0, 2.0 / (nu[s] + z2))
            w = lam / c[s]
            resid_w = w
        else:
            w = None
        sw = np.bincount(s, weights=w, minlength=K) if w is not None else np.bincount(s, minlength=K).astype(float)
        swr = np.bincount(s, weights=r if w is None else w * r, minlength=K)
        n_i = np.bincount(s, minlength=K)

        # state means, one at a time so a long-run rejection only undoes one state
        mu_rejected = False
        for i in range(K):
            prec = 1.0 / v0[i] + sw[i] / sigma[i] ** 2
            mean = (m0[i] / v0[i] + swr[i] / sigma[i] ** 2) / prec
            sd = 1.0 / math.sqrt(prec)
            if signs is not None:
                cand = _truncated_normal(rng, mean, sd, signs[i])
            else:
                cand = mean + sd * rng.standard_normal()
            old = mu[i]
            mu[i] = cand
            if spec.long_run and not _long_run_ok(mu, pi, K):
                mu[i] = old
                mu_rejected = True
                rejected["mu"] += 1
        stuck["mu"] = stuck["mu"] + 1 if mu_rejected else 0

        for name, n in stuck.items():
            if n > cfg.max_rejections:
                raise McmcError(
                    f"{name} block rejected {n} consecutive times; prior and data conflict with the restrictions"
                )

        e2 = (r - mu[s]) ** 2
        ss = np.bincount(s, weights=e2 if resid_w is None else resid_w * e2, minlength=K)
        sigma = np.sqrt((b0 + 0.5 * ss) / rng.gamma(a0 + 0.5 * n_i))

        if spec.student_t:
            for i in range(K):
                ri = r[s == i]
                lp = np.array([_std_t_logpdf(ri, mu[i], sigma[i], v).sum() for v in nu_grid])
                p = np.exp(lp - lp.max())
                nu[i] = nu_grid[min(int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right")), len(p) - 1)]

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            out_mu[kept] = mu
            out_sigma[kept] = sigma
            if out_nu is not None:
                out_nu[kept] = nu
            out_P[kept] = P
            out_last[kept] = path[-1]
            if out_paths is not None:
                out_paths[kept] = path
            counts_state += onehot[path]
            pending = kept
            kept += 1

    if pending >= 0:
        _, filt, ll = run_filter()
        out_filt[pending] = filt[-1]
        out_ll[pending] = ll.sum()

    data_hash = series.fingerprint() if isinstance(series, ReturnSeries) else ReturnSeries.from_returns(r).fingerprint()
    return PosteriorSample(
        spec=spec, priors=priors, seed=cfg.seed, data_hash=data_hash, T=T,
        mu=out_mu, sigma=out_sigma, P=out_P, state_counts=counts_state,
        filtered_last=out_filt, last_state=out_last, loglik=out_ll,
        nu=out_nu, paths=out_paths, rejections=rejected,
    )


def smoothed_state_probs(sample: PosteriorSample):
    """Per-period state frequencies over retained draws, and the bull-regime column."""
    if sample.n_draws == 0:
        raise ValueError("empty posterior sample")
    probs = sample.state_counts / sample.state_counts.sum(axis=1, keepdims=True)
    bull = regime_probability(probs) if sample.K in (2, 4) else None
    return probs, bull


def hpd_interval(x: np.ndarray, mass: float = 0.95):
    """Shortest interval holding ``mass`` of the draws."""
    x = np.sort(np.asarray(x))
    n = len(x)
    k = max(int(math.ceil(mass * n)), 1)
    if k >= n:
        return float(x[0]), float(x[-1])
    widths = x[k - 1 :] - x[: n - k + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + k - 1])


def posterior_summary(sample: PosteriorSample) -> dict:
    """Posterior means and 95% density intervals in the layout of a parameter table."""
    out = {"mu": [], "sigma": [], "sharpe": [], "nu": []}
    for i in range(sample.K):
        for key, x in (("mu", sample.mu[:, i]), ("sigma", sample.sigma[:, i]),
                       ("sharpe", sample.mu[:, i] / sample.sigma[:, i])):
            out[key].append((float(x.mean()), *hpd_interval(x)))
        if sample.nu is not None:
            x = sample.nu[:, i]
            out["nu"].append((float(x.mean()), *hpd_interval(x)))
    out["P"] = sample.P.mean(axis=0)
    pis = []
    for m in range(sample.n_draws):
        try:
            pis.append(stationary_distribution(sample.P[m]))
        except ReducibleChainError:
            continue
    out["pi"] = np.mean(pis, axis=0)
    return out


def identification_report(sample: PosteriorSample):
    """Index and reason of every retained draw that fails identification (normally empty)."""
    bad = []
    for m in range(sample.n_draws):
        res = check_identification(sample.params(m), sample.transition(m),
                                   restricted=sample.spec.sign_restricted, long_run=sample.spec.long_run)
        if not res:
            bad.append((m, res.reason))
    return bad


def fixed_parameter_sample(series, params: StateParams, P: TransitionMatrix, n: int,
                           rng: np.random.Generator, spec: ModelSpec = MS4) -> PosteriorSample:
    """``n`` state-path draws at fixed parameters (the sampler with parameter blocks skipped)."""
    r = np.ascontiguousarray(_returns(series), dtype=float)
    filt = hamilton_filter(r, params, P)
    M = np.ascontiguousarray(P.matrix, dtype=float)
    T, K = filt.filtered.shape
    counts = np.zeros((T, K), dtype=np.int64)
    paths = np.empty((n, T), dtype=np.int8)
    onehot = np.eye(K, dtype=np.int64)
    for m in range(n):
        path = kernels.backward_sample(filt.filtered, M, rng.random(T))
        paths[m] = path
        counts += onehot[path]
    rep = lambda x: np.repeat(np.asarray(x, dtype=float)[None], n, axis=0)  # noqa: E731
    return PosteriorSample(
        spec=spec, priors=PriorSpec.default(spec), seed=-1,
        data_hash=series.fingerprint() if isinstance(series, ReturnSeries) else "",
        T=T, mu=rep(params.mu), sigma=rep(params.sigma), P=rep(M), state_counts=counts,
        filtered_last=rep(filt.filtered[-1]), last_state=paths[:, -1].astype(np.int64),
        loglik=np.full(n, filt.total_loglik), nu=None if params.nu is None else rep(params.nu), paths=paths,
    )
