"""Markov-switching parameter types, identification restrictions and regime maps.

States are 0-based in code. Anything user-facing (JSON, reports, CSV headers)
uses 1-based labels: 1 bear, 2 bear rally, 3 bull correction, 4 bull.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

STATE_NAMES = {
    4: ("bear", "bear rally", "bull correction", "bull"),
    2: ("bear", "bull"),
}

# Cells (0-based) that a bear/bear-rally state cannot reach (bull correction)
# and that a bull/bull-correction state cannot reach (bear rally).
MS4_ZERO_MASK = frozenset({(0, 2), (1, 2), (2, 1), (3, 1)})

ROW_SUM_TOL = 1e-12


class ReducibleChainError(ValueError):
    """The transition matrix has no unique stationary distribution."""


@dataclass(frozen=True)
class StateParams:
    """Per-state means and volatilities (weekly %), plus t degrees of freedom."""

    mu: np.ndarray
    sigma: np.ndarray
    nu: Optional[np.ndarray] = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        sigma = np.array(self.sigma, dtype=float).ravel()
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma must have the same length")
        if np.any(~(sigma > 0)):
            raise ValueError("every sigma must be positive")
        if self.nu is not None:
            nu = np.array(self.nu, dtype=float).ravel()
            if nu.shape != mu.shape:
                raise ValueError("nu must have one entry per state")
            if np.any(~(nu > 2)):
                raise ValueError("degrees of freedom must exceed 2")
            object.__setattr__(self, "nu", nu)

    @property
    def K(self) -> int:
        return len(self.mu)

    @property
    def pseudo_sharpe(self) -> np.ndarray:
        return self.mu / self.sigma


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix with a set of structurally-zero cells."""

    matrix: np.ndarray
    zero_mask: frozenset = frozenset()

    def __post_init__(self):
        P = np.array(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", P)
        object.__setattr__(self, "zero_mask", frozenset(tuple(c) for c in self.zero_mask))
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {P.shape}")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be non-negative")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1, got {P.sum(axis=1)}")
        for i, j in self.zero_mask:
            if P[i, j] != 0.0:
                raise ValueError(f"masked cell ({i + 1},{j + 1}) is not zero")

    @classmethod
    def from_rows(cls, rows, zero_mask=frozenset(), normalize=False) -> "TransitionMatrix":
        """Build from possibly rounded rows (e.g. values rounded to 3 digits); optionally renormalize."""
        P = np.array(rows, dtype=float)
        for i, j in zero_mask:
            P[i, j] = 0.0
        if normalize:
            P = P / P.sum(axis=1, keepdims=True)
        return cls(P, frozenset(zero_mask))

    @property
    def K(self) -> int:
        return self.matrix.shape[0]

    def free_mask(self) -> np.ndarray:
        """Boolean K x K array, True where the cell is not structurally zero."""
        free = np.ones((self.K, self.K), dtype=bool)
        for i, j in self.zero_mask:
            free[i, j] = False
        return free


def _as_array(P) -> np.ndarray:
    return P.matrix if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)


def _is_irreducible(P: np.ndarray) -> bool:
    K = P.shape[0]
    adj = P > 0
    for start in range(K):
        seen = {start}
        stack = [start]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i]):
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        if len(seen) < K:
            return False
    return True


def stationary_distribution(P) -> np.ndarray:
    """Long-run state probabilities from the least-squares system.

    Stacks ``P' - I`` on a row of ones and solves
    ``pi = (A'A)^{-1} A'e`` with ``e = (0, ..., 0, 1)``.

    Raises
    ------
    ReducibleChainError
        If some state cannot reach another (no unique stationary vector).
    """
    P = _as_array(P)
    K = P.shape[0]
    if not _is_irreducible(P):
        raise ReducibleChainError("transition matrix is reducible; stationary distribution is not unique")
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    e = np.zeros(K + 1)
    e[-1] = 1.0
    AtA = A.T @ A
    if np.linalg.cond(AtA) > 1e14:
        raise ReducibleChainError("A'A is singular; stationary distribution is not unique")
    pi = np.linalg.solve(AtA, A.T @ e)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


class RegimeMap:
    """State index -> regime (0 bear, 1 bull), 0-based."""

    BEAR = 0
    BULL = 1

    def __init__(self, K: int):
        if K == 4:
            self.labels = np.array([0, 0, 1, 1])
        elif K == 2:
            self.labels = np.array([0, 1])
        else:
            raise ValueError(f"regimes are defined for K in {{2, 4}}, got {K}")
        self.K = K

    def states(self, regime: int) -> np.ndarray:
        return np.flatnonzero(self.labels == regime)


def _regime_index(regime) -> int:
    if isinstance(regime, str):
        return {"bear": RegimeMap.BEAR, "bull": RegimeMap.BULL}[regime.lower()]
    return int(regime)


def regime_mean(pi, params, regime) -> float:
    """Long-run mean return within a regime, weighting its states by ``pi``."""
    mu = params.mu if isinstance(params, StateParams) else np.asarray(params, dtype=float)
    pi = np.asarray(pi, dtype=float)
    idx = RegimeMap(len(mu)).states(_regime_index(regime))
    mass = pi[idx].sum()
    if mass <= 0:
        raise ValueError("regime has zero stationary probability")
    return float(pi[idx] @ mu[idx] / mass)


def regime_probability(state_probs) -> float | np.ndarray:
    """Probability of the bull regime; works on a K-vector or a (T, K) array."""
    p = np.asarray(state_probs, dtype=float)
    idx = RegimeMap(p.shape[-1]).states(RegimeMap.BULL)
    out = p[..., idx].sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def bear_probability(state_probs):
    p = np.asarray(state_probs, dtype=float)
    idx = RegimeMap(p.shape[-1]).states(RegimeMap.BEAR)
    out = p[..., idx].sum(axis=-1)
    return float(out) if out.ndim == 0 else out


class Identification(NamedTuple):
    ok: bool
    reason: str = ""

    def __bool__(self):
        return self.ok


def _signs(K: int) -> np.ndarray:
    return np.array([-1, 1, -1, 1]) if K == 4 else np.array([-1, 1])


def check_identification(params, P, restricted: bool = True, long_run: Optional[bool] = None) -> Identification:
    """Check sign restrictions, structural zeros and long-run regime means.

    ``long_run`` defaults to ``restricted and K == 4``. The first violated
    restriction is named in ``reason``.
    """
    mu = params.mu if isinstance(params, StateParams) else np.asarray(params, dtype=float)
    K = len(mu)
    if isinstance(P, TransitionMatrix):
        M, mask = P.matrix, P.zero_mask
    else:
        M, mask = np.asarray(P, dtype=float), frozenset()
    if M.shape != (K, K):
        raise ValueError("parameter and transition dimensions differ")
    if restricted and K in (2, 4):
        for i, s in enumerate(_signs(K)):
            if not (s * mu[i] > 0):
                return Identification(False, f"mu_{i + 1} sign")
    for i, j in sorted(mask):
        if M[i, j] != 0.0:
            return Identification(False, f"zero mask ({i + 1},{j + 1})")
    if long_run is None:
        long_run = restricted and K == 4
    if long_run:
        try:
            pi = stationary_distribution(M)
        except ReducibleChainError:
            return Identification(False, "reducible transition matrix")
        if not regime_mean(pi, mu, "bear") < 0:
            return Identification(False, "bear long-run mean")
        if not regime_mean(pi, mu, "bull") > 0:
            return Identification(False, "bull long-run mean")
    return Identification(True, "")


def params_to_dict(params: StateParams, P: TransitionMatrix) -> dict:
    return {
        "mu": params.mu.tolist(),
        "sigma": params.sigma.tolist(),
        "nu": None if params.nu is None else params.nu.tolist(),
        "P": P.matrix.tolist(),
        "zero_mask": sorted([i + 1, j + 1] for i, j in P.zero_mask),
    }


def params_from_dict(d: dict):
    mask = frozenset((int(i) - 1, int(j) - 1) for i, j in d.get("zero_mask", []))
    params = StateParams(d["mu"], d["sigma"], d.get("nu"))
    return params, TransitionMatrix(np.array(d["P"], dtype=float), mask)


def save_params(path, params: StateParams, P: TransitionMatrix) -> None:
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, P), fh, indent=2)


def load_params(path):
    with open(path) as fh:
        return params_from_dict(json.load(fh))


# Rounded posterior means for weekly S&P 500 returns, 1885-2020; used as
# simulation truth and as fixed parameters in tests.
REFERENCE_MU = np.array([-0.94, 0.23, -0.11, 0.52])
REFERENCE_SIGMA = np.array([5.60, 2.44, 1.85, 1.09])
REFERENCE_P_ROWS = np.array(
    [
        [0.906, 0.092, 0.0, 0.002],
        [0.013, 0.968, 0.0, 0.019],
        [0.013, 0.0, 0.891, 0.097],
        [0.001, 0.0, 0.122, 0.876],
    ]
)
REFERENCE_PI = np.array([0.084, 0.245, 0.356, 0.316])


def reference_parameters():
    """Reference parameters; the rounded rows are renormalized to sum to one."""
    return (
        StateParams(REFERENCE_MU, REFERENCE_SIGMA),
        TransitionMatrix.from_rows(REFERENCE_P_ROWS, MS4_ZERO_MASK, normalize=True),
    )
