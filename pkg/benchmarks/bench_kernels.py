"""Compare the compiled and pure-Python day-span kernels.

    python benchmarks/bench_kernels.py [--days 7] [--doses 8] [--repeat 5]

Prints per-call time for each backend and the wall time of one full trial,
and checks that both backends return identical severities.
"""

import argparse
import timeit

import numpy as np

from fluentrx import kernels
from fluentrx.experiment import ExperimentConfig, run_trial
from fluentrx.hmm import GaussianHmm
from fluentrx.pharmacology import load_default_catalog


def span_inputs(n_days, k, seed=0):
    rng = np.random.default_rng(seed)
    T = GaussianHmm.default().transition
    return (
        np.array([3, 4, 2], dtype=np.int64),
        10,
        np.ascontiguousarray(np.stack([T, T, T])),
        rng.integers(0, 10, k).astype(float),
        rng.uniform(0.5, 2.0, k),
        rng.integers(0, 8, k).astype(float),
        np.full(k, 7.0),
        rng.uniform(0.0, 0.4, (k, 3)),
        rng.uniform(0.0, 0.04, (k, 3)),
        rng.standard_normal((n_days, k, 3)),
        rng.random((n_days, 3)),
    )


def best_of(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, default=7)
    ap.add_argument("--doses", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = {"python": kernels.python_simulate_span}
    if kernels.compiled_simulate_span is not None:
        backends["cython"] = kernels.compiled_simulate_span
    else:
        print("compiled extension not available; timing the fallback only")

    inputs = span_inputs(args.days, args.doses)
    results = {name: fn(*inputs) for name, fn in backends.items()}
    if len(results) == 2:
        assert np.array_equal(results["python"], results["cython"]), "backends disagree"

    cfg = ExperimentConfig(n_runs=1)
    catalog = load_default_catalog()
    print(f"span: {args.days} days, {args.doses} doses")
    print(f"{'backend':<8} {'span (us)':>12} {'trial (ms)':>12}")
    timings = {}
    for name, fn in backends.items():
        span = best_of(lambda: fn(*inputs), 200, args.repeat)
        trial = best_of(lambda: run_trial(cfg, catalog, 0, simulate_span=fn), 3, args.repeat)
        timings[name] = (span, trial)
        print(f"{name:<8} {span * 1e6:>12.1f} {trial * 1e3:>12.1f}")
    if len(timings) == 2:
        print(f"speedup  {timings['python'][0] / timings['cython'][0]:>12.1f}x "
              f"{timings['python'][1] / timings['cython'][1]:>11.1f}x")


if __name__ == "__main__":
    main()
