"""Compiled vs pure-Python kernels: Mittag-Leffler evaluation and the Hermite table.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints wall times and the
largest relative disagreement between the two backends.
"""

import argparse
import time

import numpy as np

from rbhomog import _kernels_py as py

try:
    from rbhomog import _kernels as cy
except ImportError:  # extension not built
    cy = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(npts=16384, repeat=3):
    z = -np.geomspace(1e-4, 1e3, npts)
    u = np.linspace(-8.0, 8.0, npts)
    rows = []
    for beta in (0.4, 0.6, 0.9):
        tp, (vp, *_) = _time(lambda: py.ml_core(beta, z), repeat)
        if cy is not None:
            tc, (vc, *_) = _time(lambda: cy.ml_core(beta, z), repeat)
            err = float(np.max(np.abs(vc - vp) / np.maximum(np.abs(vp), 1e-300)))
        else:
            tc, err = float("nan"), float("nan")
        rows.append((f"ml_core beta={beta}", tp, tc, err))
    tp, hp = _time(lambda: py.hermite_table(40, u), repeat)
    if cy is not None:
        tc, hc = _time(lambda: cy.hermite_table(40, u), repeat)
        err = float(np.max(np.abs(hc - hp) / np.maximum(np.abs(hp), 1e-300)))
    else:
        tc, err = float("nan"), float("nan")
    rows.append(("hermite_table sigma<=40", tp, tc, err))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=16384)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':28s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, tp, tc, err in bench(args.points, args.repeat):
        print(f"{name:28s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f} {err:13.2e}")


if __name__ == "__main__":
    main()
