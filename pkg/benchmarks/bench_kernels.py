#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-Python/NumPy fallback.

Times the two hot kernels on the bundled three-warehouse reference
instance:

* the discrete-event simulator loop (one campaign)
* the preconditioned projected descent (repeated solves)

The script measures the current process's path, then re-executes itself
with ``GCHAIN_DISABLE_NUMBA=1`` to measure the fallback, and prints both
with the speedup. JIT compilation is warmed before timing, so numbers
reflect steady-state throughput.

    python benchmarks/bench_kernels.py [--horizon 2000] [--replications 2]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def build_config(horizon, replications):
    from gchain import (
        Allocation,
        BatchDistribution,
        SimConfig,
        SupplyChainInstance,
        closed_form_allocation,
    )

    inst = SupplyChainInstance(
        arrival=[25.0, 20.0, 15.0], perish=[1.0, 2.0, 3.0], order_rate=300.0,
        batch=BatchDistribution.geometric(0.3), base_price=3.0, price_slope=-0.01,
    )
    P_star = closed_form_allocation(inst).P_star
    return inst, SimConfig(instance=inst, allocation=P_star, horizon=horizon,
                           warmup=0.1 * horizon, replications=replications, seed=7)


def measure(horizon, replications, solves):
    from gchain import numerical_allocation, simulate

    inst, config = build_config(horizon, replications)
    simulate(build_config(50.0, 1)[1])  # warm the JIT cache
    t0 = time.perf_counter()
    estimates = simulate(config)
    sim_seconds = time.perf_counter() - t0
    events = int(estimates.event_counts[:, :, :3].sum())

    numerical_allocation(inst)
    t0 = time.perf_counter()
    for _ in range(solves):
        numerical_allocation(inst)
    descent_seconds = time.perf_counter() - t0
    return {"simulate_s": sim_seconds, "events": events,
            "descent_s": descent_seconds, "solves": solves}


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--horizon", type=float, default=2000.0)
    parser.add_argument("--replications", type=int, default=2)
    parser.add_argument("--solves", type=int, default=200)
    parser.add_argument("--_worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args._worker:
        print(json.dumps(measure(args.horizon, args.replications, args.solves)))
        return

    results = {}
    for label, disable in (("numba", "0"), ("fallback", "1")):
        env = dict(os.environ, GCHAIN_DISABLE_NUMBA=disable)
        out = subprocess.run(
            [sys.executable, __file__, "--_worker",
             "--horizon", str(args.horizon),
             "--replications", str(args.replications),
             "--solves", str(args.solves)],
            capture_output=True, text=True, env=env, check=True,
        )
        results[label] = json.loads(out.stdout.strip().splitlines()[-1])

    nb, fb = results["numba"], results["fallback"]
    print(f"simulator: {nb['events']} events")
    print(f"  numba    {nb['simulate_s']:#.4g} s "
          f"({nb['events'] / nb['simulate_s'] / 1e6:#.3g} M events/s)")
    print(f"  fallback {fb['simulate_s']:#.4g} s "
          f"({fb['events'] / fb['simulate_s'] / 1e6:#.3g} M events/s)")
    print(f"  speedup  {fb['simulate_s'] / nb['simulate_s']:#.3g}x")
    print(f"descent: {nb['solves']} solves")
    print(f"  numba    {nb['descent_s']:#.4g} s")
    print(f"  fallback {fb['descent_s']:#.4g} s")
    print(f"  speedup  {fb['descent_s'] / nb['descent_s']:#.3g}x")


if __name__ == "__main__":
    main()
