"""Compare the compiled aggregation kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [--m 40] [--d 10000]``.
Prints the median time per call for each kernel and backend.
"""

import argparse
import time

import numpy as np

from zenosim import _kernels_py

try:
    from zenosim import _kernels
except ImportError:
    _kernels = None


def median_ns(fn, *args, repeats=30):
    fn(*args)
    samples = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        fn(*args)
        samples.append(time.perf_counter_ns() - start)
    return float(np.median(samples))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=40)
    p.add_argument("--d", type=int, default=10_000)
    p.add_argument("--repeats", type=int, default=30)
    args = p.parse_args()

    v = np.random.default_rng(0).normal(size=(args.m, args.d))
    rows = np.arange(args.m, dtype=np.intp)
    dist = _kernels_py.pairwise_sq_dists(v)
    cases = {
        "mean_rows": (v, rows),
        "coordinate_median": (v,),
        "pairwise_sq_dists": (v,),
        "krum_scores": (dist, max(args.m - 3, 0)),
        "sq_norms": (v,),
    }
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["compiled"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"m={args.m} d={args.d} repeats={args.repeats}")
    print(f"{'kernel':<20}" + "".join(f"{name:>14}" for name in backends) + f"{'ratio':>10}")
    for kernel, kargs in cases.items():
        times = {name: median_ns(getattr(mod, kernel), *kargs, repeats=args.repeats) / 1e6
                 for name, mod in backends.items()}
        ratio = f"{times['python'] / times['compiled']:.2f}x" if "compiled" in times else "-"
        print(f"{kernel:<20}" + "".join(f"{t:>12.3f}ms" for t in times.values()) + f"{ratio:>10}")


if __name__ == "__main__":
    main()
