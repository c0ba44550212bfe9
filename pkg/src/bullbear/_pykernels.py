"""Pure-Python reference versions of the compiled kernels.

Same signatures and semantics as ``_ckernels``; used when the extension is
not built or when ``BULLBEAR_NO_EXT=1`` is set.
"""
import math

import numpy as np


def filter_forward(logdens, P, init):
    logdens = np.ascontiguousarray(logdens, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    T, K = logdens.shape
    pred = np.empty((T, K))
    filt = np.empty((T, K))
    ll = np.empty(T)
    pred[0] = init
    for t in range(T):
        row = logdens[t]
        m = row.max()
        if not math.isfinite(m):
            raise FloatingPointError(f"non-finite emission density at t={t}")
        w = pred[t] * np.exp(row - m)
        c = w.sum()
        if not (c > 0.0) or not math.isfinite(c):
            raise FloatingPointError(f"zero likelihood for every state at t={t}")
        filt[t] = w / c
        ll[t] = math.log(c) + m
        if t + 1 < T:
            pred[t + 1] = filt[t] @ P
    return pred, filt, ll


def _pick(w, u):
    cum = np.cumsum(w)
    target = u * cum[-1]
    for j in range(len(w)):
        if cum[j] > target and w[j] > 0.0:
            return j
    return int(np.flatnonzero(w > 0)[-1]) if np.any(w > 0) else 0


def backward_sample(filtered, P, uniforms):
    T, _ = filtered.shape
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = _pick(filtered[T - 1], uniforms[T - 1])
    for t in range(T - 2, -1, -1):
        path[t] = _pick(filtered[t] * P[:, path[t + 1]], uniforms[t])
    return path


def transition_counts(path, K):
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (path[:-1], path[1:]), 1)
    return counts


def garch_recursion(eps, omega, alpha, beta, h0, dh0, with_grad):
    T = len(eps)
    h = np.empty(T)
    h[0] = h0
    dh = np.zeros((T, 4) if with_grad else (0, 4))
    if with_grad:
        dh[0] = dh0
    for t in range(1, T):
        e = eps[t - 1]
        h[t] = omega + alpha * e * e + beta * h[t - 1]
        if with_grad:
            dh[t, 0] = -2.0 * alpha * e + beta * dh[t - 1, 0]
            dh[t, 1] = 1.0 + beta * dh[t - 1, 1]
            dh[t, 2] = e * e + beta * dh[t - 1, 2]
            dh[t, 3] = h[t - 1] + beta * dh[t - 1, 3]
    return h, dh
