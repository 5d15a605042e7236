"""Time the compiled and pure-Python path kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--steps 5000] [--repeat 5]
"""
import argparse
import dataclasses
import time

import numpy as np

from rdrs_lab import _backend
from rdrs_lab.config import parse_config
from rdrs_lab.experiments import _replication_inputs
from rdrs_lab.rdrs import run_kernel

CASES = (
    ("example1_fig5", 1, "game"),
    ("example1_fig5", 1, "twod"),
    ("example2_fig7", 2, "game"),
    ("example2_fig7", 2, "pooling"),
)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        _backend.get_kernels("cython")
    except ImportError:
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")

    print(f"{'preset':<15} {'policy':<8} {'python ms':>10} {'cython ms':>10} {'speedup':>8}  identical")
    for preset, example, policy in CASES:
        cfg = dataclasses.replace(parse_config(preset), steps=args.steps)
        params = cfg.diffusion_params()
        states, noise = _replication_inputs(cfg, 0)

        def go(backend):
            return run_kernel(example, policy, params, states, noise, cfg.dt, cfg.prices, cfg.const_prices(),
                              backend=backend)

        py, cy = go("python"), go("cython")
        same = all(np.array_equal(getattr(py, f), getattr(cy, f)) for f in ("W", "Qhat", "Phat", "cost"))
        t_py = best_of(lambda: go("python"), args.repeat)
        t_cy = best_of(lambda: go("cython"), args.repeat)
        print(f"{preset:<15} {policy:<8} {1e3 * t_py:>10.2f} {1e3 * t_cy:>10.2f} {t_py / t_cy:>8.1f}  {same}")


if __name__ == "__main__":
    main()
