"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time of each kernel on both backends, the
speedup, and whether the two backends returned identical results.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mbrrm.kernels import _pykernels

try:
    from mbrrm.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(rng: np.random.Generator):
    gain3 = rng.random((3, 3)) * 0.4 + np.eye(3)
    gain20 = rng.random((20, 20)) * 0.2 + np.eye(20)
    x = (rng.random((16, 20)) < 0.3).astype(float)
    return [
        ("hungarian 16x20", "hungarian", (rng.normal(size=(16, 20)),)),
        ("hungarian 64x64", "hungarian", (rng.normal(size=(64, 64)),)),
        ("best_composition G=5 N=12", "best_composition", (rng.random((4, 5)), 12)),
        ("best_power_grid K*L=9 levels=4", "best_power_grid",
         (gain3, np.ones(3), rng.random(3) * 5, 3, 1.0, 10.0, 4)),
        ("best_power_grid K*L=9 levels=5", "best_power_grid",
         (gain3, np.ones(3), rng.random(3) * 5, 3, 1.0, 10.0, 5)),
        ("marginal_usc_gains K=16 L=20", "marginal_usc_gains",
         (gain20, np.ones(20), rng.random(20) * 50, 1.0, x, rng.random(20) * 10)),
    ]


def _best_time(fn, args, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=1e-10, atol=1e-12, equal_nan=True)
    return np.array_equal(a, b)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats, best kept (default: 5)")
    ap.add_argument("--seed", type=int, default=0, help="input seed (default: 0)")
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>9s}  same")
    for label, name, fargs in _cases(np.random.default_rng(args.seed)):
        tp, outp = _best_time(getattr(_pykernels, name), fargs, args.repeat)
        tc, outc = _best_time(getattr(_ckernels, name), fargs, args.repeat)
        print(f"{label:34s} {tp * 1e3:12.3f} {tc * 1e3:12.3f} {tp / tc:8.1f}x  {_same(outp, outc)}")


if __name__ == "__main__":
    main()
