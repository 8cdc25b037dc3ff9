"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the result does not depend on
GRAPHMCMC_PURE. Outputs are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from graphmcmc import _pure

try:
    from graphmcmc import _core
except ImportError:  # extension not built
    _core = None


def cases(rng):
    nodes = np.ascontiguousarray(rng.standard_normal((1600, 103)))
    x = np.ascontiguousarray(rng.standard_normal(103))
    v = rng.standard_normal(103)
    v = np.ascontiguousarray(v / np.linalg.norm(v))
    pts = rng.standard_normal((400, 2))
    cost = np.ascontiguousarray(np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)))
    return {
        "nearest m=1600 p=103": lambda k: k.nearest(nodes, x),
        "segment_bounds m=1600 p=103": lambda k: k.segment_bounds(nodes, 7, v, 20.0, 2e-7, 200),
        "prim_mst m=400": lambda k: k.prim_mst(cost),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not available; only the fallback can run")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        ref = fn(_pure)
        n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(_pure), number=1), 1e-6)))
        t_py = min(timeit.repeat(lambda: fn(_pure), number=n, repeat=args.repeat)) / n
        if _core is None:
            print(f"{name:32s} {t_py * 1e3:10.3f} {'-':>10s} {'-':>8s}")
            continue
        got = fn(_core)
        if not np.allclose(np.asarray(ref, dtype=float), np.asarray(got, dtype=float)):
            raise SystemExit(f"{name}: backends disagree ({ref!r} vs {got!r})")
        n = max(1, int(0.2 / max(timeit.timeit(lambda: fn(_core), number=1), 1e-6)))
        t_c = min(timeit.repeat(lambda: fn(_core), number=n, repeat=args.repeat)) / n
        print(f"{name:32s} {t_py * 1e3:10.3f} {t_c * 1e3:10.3f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
