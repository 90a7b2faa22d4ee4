"""Time the compiled and pure-Python fluid kernels on the same random workloads.

Usage::

    python benchmarks/bench_fluid.py --flows 150 --links 60 --reps 20
"""

import argparse
import statistics
import time

import numpy as np

from vtnroute import fluid


def make_instance(rng, n_flows, n_links, max_hops):
    cap = rng.uniform(0.2e9, 1e9, n_links)
    paths = [
        rng.choice(n_links, size=int(rng.integers(1, max_hops + 1)), replace=False).tolist()
        for _ in range(n_flows)
    ]
    sizes = rng.lognormal(np.log(8e5), 2.0, n_flows)
    starts = np.sort(rng.exponential(1e-3, n_flows).cumsum())
    return cap, paths, sizes, starts


def bench(impl, instances, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        for inst in instances:
            fluid.simulate(*inst, impl=impl)
        times.append(time.perf_counter() - t0)
    return statistics.median(times) / len(instances)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--flows", type=int, default=150)
    ap.add_argument("--links", type=int, default=60)
    ap.add_argument("--hops", type=int, default=6)
    ap.add_argument("--instances", type=int, default=10)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    instances = [make_instance(rng, args.flows, args.links, args.hops) for _ in range(args.instances)]
    impls = fluid.backends()
    if "cython" not in impls:
        print("compiled backend not built; only timing the pure-Python kernel")

    worst = 0.0
    if len(impls) > 1:
        for inst in instances:
            a, _ = fluid.simulate(*inst, impl=impls["python"])
            b, _ = fluid.simulate(*inst, impl=impls["cython"])
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))

    results = {name: bench(impl, instances, args.reps) for name, impl in impls.items()}
    print(f"{args.flows} flows, {args.links} links, {args.instances} instances x {args.reps} reps")
    for name, t in results.items():
        print(f"  {name:7s} {t * 1e3:9.3f} ms / simulation")
    if len(results) > 1:
        print(f"  speedup {results['python'] / results['cython']:.1f}x, max rel. finish-time diff {worst:.2e}")


if __name__ == "__main__":
    main()
