"""Compare the compiled and numpy codebook-scan kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Each case runs on both backends, checks that they return the same answer and
reports the best wall time and the throughput in codewords per second.
"""

import argparse
import time

import numpy as np

from pointcover import _kernels_py
from pointcover.rng import SeedSpec, bernoulli_threshold

try:
    from pointcover import _kernels
except ImportError:  # extension not built
    _kernels = None


def _cases():
    key = SeedSpec(1, ("bench",)).key()
    thr = bernoulli_threshold(0.5)
    rng = np.random.default_rng(0)
    pos16 = np.sort(rng.choice(1600, 16, replace=False)).astype(np.int64)
    pos24 = np.sort(rng.choice(1600, 24, replace=False)).astype(np.int64)
    n_scan = 1 << 21
    return [
        # almost surely no cover: the whole book is scanned
        ("first_cover, k=24, 2^21 codewords", n_scan,
         lambda k: k.first_cover(key, thr, pos24, 0, n_scan, 1)),
        ("count_covers, k=16, 2^21 codewords", n_scan,
         lambda k: k.count_covers(key, thr, pos16, 0, n_scan, 1 << 30)),
        ("first_cover stride 85, k=16", n_scan // 85,
         lambda k: k.first_cover(key, thr, pos16, 0, n_scan, 85)),
        ("codeword_bits, 2000 x 1600 bits", 2000,
         lambda k: [k.codeword_bits(key, thr, j, 1600) for j in range(2000)]),
    ]


def _best(fn, kernels, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(kernels)
        best = min(best, time.perf_counter() - t0)
    return out, best


def _same(a, b):
    if isinstance(a, list):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'case':40s} " + " ".join(f"{name + ' s':>12s}" for name, _ in backends)
          + f" {'cw/s (best)':>14s} {'speedup':>8s}")
    for name, work, fn in _cases():
        results = [_best(fn, k, args.repeat) for _, k in backends]
        if len(results) == 2 and not _same(results[0][0], results[1][0]):
            raise SystemExit(f"backends disagree on {name}")
        times = [t for _, t in results]
        speedup = times[0] / times[-1] if len(times) == 2 else 1.0
        print(f"{name:40s} " + " ".join(f"{t:12.4f}" for t in times)
              + f" {work / min(times):14.3g} {speedup:8.1f}")


if __name__ == "__main__":
    main()
