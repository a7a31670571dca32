"""Compare the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the speedup,
and the largest output difference between backends.
"""

import argparse
import time

import numpy as np

from ehrsig import _pycore

try:
    from ehrsig import _core
except ImportError:  # pragma: no cover
    _core = None


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def enet_case(n, d, l1, l2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = np.zeros(d)
    w[:5] = [1.5, -1.0, 0.8, -0.6, 0.4]
    y = (rng.random(n) < 1 / (1 + np.exp(-(X @ w)))).astype(float)
    b0 = float(np.log(y.mean() / (1 - y.mean())))
    args = (X, y, np.ones(d), l1, l2, np.zeros(d), b0, 200, 2000, 1e-7)
    return lambda mod: mod.enet_logistic(*args)


def rash_case(n_events, tau, seed=0):
    rng = np.random.default_rng(seed)
    days = np.sort(rng.integers(0, tau, n_events))
    h = rng.integers(7, 731, n_events)
    offsets = rng.random(16)
    return lambda mod: mod.rash_accumulate(days, h, offsets, 0, tau)


CASES = [
    ("enet n=350 d=65 l1=1e-4", enet_case(350, 65, 1e-4, 1e-4)),
    ("enet n=350 d=65 l1=1e-2", enet_case(350, 65, 1e-2, 1e-2)),
    ("enet n=2000 d=200 l1=1e-2", enet_case(2000, 200, 1e-2, 1e-3)),
    ("rash 200 events, 8 y", rash_case(200, 2922)),
    ("rash 5000 events, 20 y", rash_case(5000, 7305)),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core not built; only the fallback is timed")
    print(f"{'case':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, case in CASES:
        tp, outp = _best(lambda: case(_pycore), args.repeat)
        if _core is None:
            print(f"{name:28s} {1e3 * tp:10.2f}")
            continue
        tc, outc = _best(lambda: case(_core), args.repeat)
        a = outp[0] if isinstance(outp, tuple) else outp
        c = outc[0] if isinstance(outc, tuple) else outc
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(c))))
        print(f"{name:28s} {1e3 * tp:10.2f} {1e3 * tc:10.2f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
