"""Time the staged-program sweep under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --points 200000 --repeat 5
"""
import argparse
import time

import numpy as np

from convstab import zoo
from convstab._kernels import HAVE_NUMBA, sweep


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(entry, points, repeat, rng):
    prog = entry.expr.program
    lo, hi = (np.array(b) for b in zip(*entry.domain))
    X = rng.uniform(lo, hi, size=(points, entry.expr.n))
    S = rng.standard_normal(X.shape)
    row = {"entry": entry.name, "points": points}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not HAVE_NUMBA:
            row[backend] = float("nan")
            continue
        try:
            sweep(prog.tape, X[:8], S[:8], backend=backend)  # compile / warm up
        except RuntimeError:
            row[backend] = float("nan")
            continue
        row[backend] = best_of(lambda: sweep(prog.tape, X, S, backend=backend), repeat)
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--entries", default=",".join(zoo.NAMES))
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'entry':12s} {'points':>8s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name in args.entries.split(","):
        r = bench(zoo.get(name), args.points, args.repeat, rng)
        speed = r["numpy"] / r["numba"] if r["numba"] == r["numba"] else float("nan")
        print(f"{r['entry']:12s} {r['points']:8d} {r['numpy']:10.4f} {r['numba']:10.4f} {speed:8.2f}")


if __name__ == "__main__":
    main()
