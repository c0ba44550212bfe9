# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Hamilton filter, backward state sampling, GARCH recursion.

Each function mirrors its counterpart in ``_pykernels`` exactly; callers go
through :mod:`bullbear.kernels`, which picks whichever backend is importable.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, isfinite

cnp.import_array()


def filter_forward(double[:, ::1] logdens, double[:, ::1] P, double[::1] init):
    cdef Py_ssize_t T = logdens.shape[0]
    cdef Py_ssize_t K = logdens.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double m, c, acc

    predicted_arr = np.empty((T, K), dtype=np.float64)
    filtered_arr = np.empty((T, K), dtype=np.float64)
    loglik_arr = np.empty(T, dtype=np.float64)
    cdef double[:, ::1] pred = predicted_arr
    cdef double[:, ::1] filt = filtered_arr
    cdef double[::1] ll = loglik_arr

    for j in range(K):
        pred[0, j] = init[j]

    for t in range(T):
        m = logdens[t, 0]
        for j in range(1, K):
            if logdens[t, j] > m:
                m = logdens[t, j]
        if not isfinite(m):
            raise FloatingPointError(f"non-finite emission density at t={t}")
        c = 0.0
        for j in range(K):
            filt[t, j] = pred[t, j] * exp(logdens[t, j] - m)
            c += filt[t, j]
        if not (c > 0.0) or not isfinite(c):
            raise FloatingPointError(f"zero likelihood for every state at t={t}")
        for j in range(K):
            filt[t, j] /= c
        ll[t] = log(c) + m
        if t + 1 < T:
            for j in range(K):
                acc = 0.0
                for i in range(K):
                    acc += filt[t, i] * P[i, j]
                pred[t + 1, j] = acc

    return predicted_arr, filtered_arr, loglik_arr


cdef inline Py_ssize_t _pick(double* w, Py_ssize_t K, double u) noexcept nogil:
    cdef double total = 0.0
    cdef double target, run
    cdef Py_ssize_t j, last = 0
    for j in range(K):
        total += w[j]
        if w[j] > 0.0:
            last = j
    target = u * total
    run = 0.0
    for j in range(K):
        run += w[j]
        if run > target and w[j] > 0.0:
            return j
    return last


def backward_sample(double[:, ::1] filtered, double[:, ::1] P, double[::1] uniforms):
    cdef Py_ssize_t T = filtered.shape[0]
    cdef Py_ssize_t K = filtered.shape[1]
    cdef Py_ssize_t t, i, nxt
    path_arr = np.empty(T, dtype=np.int64)
    cdef cnp.int64_t[::1] path = path_arr
    cdef double[::1] w = np.empty(K, dtype=np.float64)

    with nogil:
        for i in range(K):
            w[i] = filtered[T - 1, i]
        path[T - 1] = _pick(&w[0], K, uniforms[T - 1])
        t = T - 2
        while t >= 0:
            nxt = path[t + 1]
            for i in range(K):
                w[i] = filtered[t, i] * P[i, nxt]
            path[t] = _pick(&w[0], K, uniforms[t])
            t -= 1
    return path_arr


def transition_counts(cnp.int64_t[::1] path, Py_ssize_t K):
    counts_arr = np.zeros((K, K), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t t
    for t in range(1, path.shape[0]):
        counts[path[t - 1], path[t]] += 1
    return counts_arr


def garch_recursion(double[::1] eps, double omega, double alpha, double beta,
                    double h0, double[::1] dh0, bint with_grad):
    """Conditional variances, and their derivatives w.r.t. (mu, omega, alpha, beta)."""
    cdef Py_ssize_t T = eps.shape[0]
    cdef Py_ssize_t t, k
    h_arr = np.empty(T, dtype=np.float64)
    cdef double[::1] h = h_arr
    dh_arr = np.zeros((T if with_grad else 0, 4), dtype=np.float64)
    cdef double[:, ::1] dh = dh_arr

    h[0] = h0
    if with_grad:
        for k in range(4):
            dh[0, k] = dh0[k]
    for t in range(1, T):
        h[t] = omega + alpha * eps[t - 1] * eps[t - 1] + beta * h[t - 1]
        if with_grad:
            dh[t, 0] = -2.0 * alpha * eps[t - 1] + beta * dh[t - 1, 0]
            dh[t, 1] = 1.0 + beta * dh[t - 1, 1]
            dh[t, 2] = eps[t - 1] * eps[t - 1] + beta * dh[t - 1, 2]
            dh[t, 3] = h[t - 1] + beta * dh[t - 1, 3]
    return h_arr, dh_arr
