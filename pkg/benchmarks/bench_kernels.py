"""Time each hot kernel and one training epoch under the numpy and numba backends.

    python benchmarks/bench_kernels.py [--repeats N] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time

import numpy as np

from ais_sentinel import kernels
from ais_sentinel.nn import TrainConfig, fit


def _median_time(fn, repeats):
    fn()  # warm-up; also triggers numba compilation
    runs = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return statistics.median(runs)


def _cases(rng):
    present = rng.random((40_000, 60)) < 0.8
    present[:, 0] = True
    lat, lon = rng.uniform(53.5, 55.5, 300_000), rng.uniform(10.5, 13.5, 300_000)
    shape = (300, 100)
    p, g = rng.normal(size=shape), rng.normal(size=shape)
    m, v = np.zeros(shape), np.zeros(shape)
    logits = rng.normal(size=(200, 3))
    onehot = np.eye(3)[rng.integers(0, 3, 200)]
    X = rng.random((20_000, 240))
    y = (X[:, :4].sum(axis=1) > 2).astype(np.int64)

    def epoch(be):
        cfg = TrainConfig(max_epochs=1, seed=0)
        return lambda: fit(X, y, 2, cfg)

    return {
        "missing_run 40k x 60": lambda be: (lambda: be.missing_run(present)),
        "haversine 300k": lambda be: (lambda: be.haversine_nmi(lat, lon, np.full_like(lat, 54.1),
                                                               np.full_like(lon, 12.1))),
        "adam_update 300x100": lambda be: (lambda: be.adam_update(p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 1)),
        "softmax_xent 200x3": lambda be: (lambda: be.softmax_xent(logits.copy(), onehot, 1e-12)),
        "train epoch 20k x 240": epoch,
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)

    names = ["numpy"] + (["numba"] if kernels.numba_available() else [])
    results = {}
    original = kernels._active
    try:
        for name in names:
            be = kernels.load_backend(name)
            kernels._active = be  # training goes through the module-level dispatch
            for label, make in _cases(np.random.default_rng(0)).items():
                results.setdefault(label, {})[name] = _median_time(make(be), args.repeats)
    finally:
        kernels._active = original

    width = max(map(len, results))
    print(f"{'kernel'.ljust(width)}  " + "  ".join(f"{n:>12}" for n in names) + "  speedup")
    for label, row in results.items():
        cells = "  ".join(f"{row[n] * 1e3:10.3f}ms" for n in names)
        speed = f"{row['numpy'] / row['numba']:7.2f}x" if "numba" in row else "     n/a"
        print(f"{label.ljust(width)}  {cells}  {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
