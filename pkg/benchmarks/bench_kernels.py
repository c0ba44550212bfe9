"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--T 3500] [--repeat 5] [--sweeps 20]

Each kernel is timed on identical inputs for every importable backend, then a
short Gibbs run is timed end to end with the backend swapped in.
"""
import argparse
import time
import timeit

import numpy as np

from bullbear import kernels
from bullbear.inference import McmcConfig, gibbs_estimate, hamilton_filter, simulate
from bullbear.models import MS4
from bullbear.regime import reference_parameters

NAMES = ("filter_forward", "backward_sample", "transition_counts", "garch_recursion")


def _inputs(T, seed=0):
    params, P = reference_parameters()
    r, s = simulate(params, P, T, np.random.default_rng(seed))
    M = np.ascontiguousarray(P.matrix)
    logdens = np.ascontiguousarray(-0.5 * ((r[:, None] - params.mu) / params.sigma) ** 2 - np.log(params.sigma))
    init = np.full(4, 0.25)
    filt = hamilton_filter(r, params, P).filtered
    u = np.random.default_rng(seed + 1).random(T)
    eps = r - r.mean()
    dh0 = np.array([0.0, 1.0, 1.0, 1.0])
    return {
        "filter_forward": (logdens, M, init),
        "backward_sample": (filt, M, u),
        "transition_counts": (s.astype(np.int64), 4),
        "garch_recursion": (eps, 0.1, 0.1, 0.85, float(eps.var()), dh0, True),
    }, r


def _best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def _gibbs_time(mod, r, sweeps):
    saved = {n: getattr(kernels, n) for n in NAMES}
    try:
        for n in NAMES:
            setattr(kernels, n, getattr(mod, n))
        t0 = time.perf_counter()
        gibbs_estimate(r, MS4, cfg=McmcConfig(burn_in=0, retained=sweeps, seed=0), keep_paths=False)
        return time.perf_counter() - t0
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=3500, help="series length (about 67 years of weeks)")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sweeps", type=int, default=20, help="Gibbs sweeps for the end-to-end timing")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    inputs, r = _inputs(args.T)
    print(f"T={args.T}, backends: {', '.join(sorted(backends))} (active: {kernels.BACKEND})")
    print(f"{'kernel':20s}" + "".join(f"{b:>14s}" for b in sorted(backends)) + f"{'speedup':>10s}")
    rows = [(n, {b: _best(getattr(m, n), inputs[n], args.repeat) for b, m in backends.items()}) for n in NAMES]
    rows.append((f"gibbs x{args.sweeps}", {b: _gibbs_time(m, r, args.sweeps) for b, m in backends.items()}))
    for name, t in rows:
        line = f"{name:20s}" + "".join(f"{t[b] * 1e3:12.2f}ms" for b in sorted(t))
        if "cython" in t:
            line += f"{t['python'] / t['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
