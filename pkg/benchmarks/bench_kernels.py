"""Time the compiled and pure-numpy kernels, alone and inside the solvers.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--number 20]
"""
import argparse
import timeit
from contextlib import contextmanager

import numpy as np

from assortmatch import _backend
from assortmatch.affinity import estimate_affinity
from assortmatch.entropic import solve_scaled, synthetic_market
from assortmatch.max_score import ScoreSpec, fit_max_score, generate_inequalities


@contextmanager
def backend(name):
    saved = _backend._impl
    _backend._impl = _backend.get_kernels(name)
    try:
        yield
    finally:
        _backend._impl = saved


def workloads(rng):
    S = rng.normal(scale=3.0, size=(200, 200))
    v = rng.normal(size=200)
    u = rng.normal(size=200)
    D = rng.normal(size=(2000, 2))
    off = rng.normal(size=2000)
    thetas = rng.uniform(-10, 10, size=(200, 2))
    p = np.full(200, 1 / 200)
    mk = synthetic_market(np.diag([2.0, 0.5]), 5000, seed=0)
    mk3 = synthetic_market(np.diag([1.0, 3.0, 1.5]), 2000, seed=0)
    ineq = generate_inequalities(mk3.sample, 2000, seed=0)
    spec = ScoreSpec("diagonal", mk3.sample.names)
    return [
        ("lse_rows 200x200", 1, lambda: _backend.lse_rows(S, v)),
        ("lse_cols 200x200", 1, lambda: _backend.lse_cols(S, u)),
        ("score_batch 2000 x 200 thetas", 1, lambda: _backend.score_batch(D, off, thetas)),
        ("IPFP solve 200x200", 10, lambda: solve_scaled(S / 3.0, p, p)),
        ("estimate_affinity N=5000, O=2", 20, lambda: estimate_affinity(mk.sample)),
        ("max score 1 run, pop 200", 20, lambda: fit_max_score(ineq, spec, runs=1, population=200, seed=0)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args()
    names = ["python"]
    try:
        _backend.get_kernels("cython")
        names.append("cython")
    except ImportError:
        print("compiled extension not built; timing the numpy kernels only")
    print(f"{'workload':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, cost, fn in workloads(np.random.default_rng(0)):
        number = max(1, args.number // cost)
        times = []
        for name in names:
            with backend(name):
                times.append(min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number)
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
