"""Compiled vs pure Python KMC event loops: throughput and trajectory identity.

Usage: python benchmarks/bench_kmc.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from sharpint.dynamics import bernstein_rate, kac_model_1d, simulate_gk, simulate_glauber_kac
from sharpint.dynamics._backend import get_backend
from sharpint.models import make_reaction_pair


def _kac(backend):
    return simulate_glauber_kac(kac_model_1d(), 1 / 64, 8.0, 40.0, 11, m0=0.3, backend=backend)


def _gk(backend):
    c = bernstein_rate(make_reaction_pair())
    return simulate_gk(64, c, 0.2, 11, u0=lambda x: 0.5 + 0.3 * np.sin(2 * np.pi * x), backend=backend)


def _time(fn, backend, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        get_backend("cython")
    except ImportError:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'case':<6}{'events':>10}{'python s':>12}{'cython s':>12}{'speedup':>10}  identical")
    for name, fn in (("kac", _kac), ("gk", _gk)):
        tp, rp = _time(fn, "python", args.repeat)
        tc, rc = _time(fn, "cython", args.repeat)
        same = np.array_equal(rp.snapshots, rc.snapshots) and rp.events == rc.events
        print(f"{name:<6}{rc.events:>10d}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
