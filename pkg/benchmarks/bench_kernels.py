"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--frames N] [--svm-points N]

Both backends are imported directly, so ``NET_SENTINEL_PURE`` has no effect
here; it only changes which backend the package itself uses.
"""

import argparse
import time

import numpy as np

from net_sentinel import _pykernels
from net_sentinel.detectors import default_gamma, rbf_kernel
from net_sentinel.synth import ScenarioScript, generate

try:
    from net_sentinel import _ckernels
except ImportError:
    _ckernels = None


def _best_of(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dissect(frames):
    def run(mod):
        return lambda: [mod.dissect_frame(f) for f in frames]
    return {name: _best_of(run(mod)) for name, mod in _backends()}


def bench_smo(n, nu=0.1, seed=0):
    x = np.random.default_rng(seed).normal(size=(n, 8))
    K = np.ascontiguousarray(rbf_kernel(x, x, default_gamma(x)))
    C = 1.0 / (nu * n)
    full = int(nu * n)
    start = np.zeros(n)
    start[:full] = C
    start[full] = 1.0 - full * C

    def run(mod):
        return lambda: mod.smo_solve(K, start.copy(), C, 1e-9, 1_000_000)
    return {name: _best_of(run(mod)) for name, mod in _backends()}


def _backends():
    yield "python", _pykernels
    if _ckernels is not None:
        yield "cython", _ckernels


def _report(label, times, units):
    line = f"{label:<28}" + "".join(f"{k} {v * 1e3:9.2f} ms   " for k, v in times.items())
    if "cython" in times:
        line += f"speedup {times['python'] / times['cython']:6.1f}x"
    print(line + f"  ({units})")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=50_000)
    ap.add_argument("--svm-points", type=int, nargs="+", default=[200, 500])
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; timing the Python fallback only")

    records = generate(ScenarioScript("flood", 40, 0)).records
    frames = [f for _, f in records][: args.frames]
    _report("dissect_frame", bench_dissect(frames), f"{len(frames)} frames")
    for n in args.svm_points:
        _report(f"smo_solve n={n}", bench_smo(n), "one fit")


if __name__ == "__main__":
    main()
