"""Time the compiled kernels against the pure-Python fallback.

Run from the repository root after building the extension:

    python3 benchmarks/bench_kernels.py [--repeat 200]

Each kernel is timed on a 20x30 map with 4 drones, the configuration the
simulator runs by default. A frozen coordinated-RL episode, which exercises
every kernel, is also timed under each backend in a subprocess so that the
backend switch takes effect.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dronepatrol import _pykernels

try:
    from dronepatrol import _ckernels
except ImportError:
    _ckernels = None

EPISODE = """
import time
from dronepatrol.config import load_config
from dronepatrol.harness import run_episode
from dronepatrol.kernels import BACKEND
from dronepatrol.qnet import init_params
cfg = load_config(preset="desk", overrides={"run.horizon": "%d", "run.policy": "rl",
                                             "learner.online_learning": "false"})
params = init_params(cfg.train.net_dims, 0)
t = time.perf_counter()
run_episode(cfg, params)
print(BACKEND, time.perf_counter() - t)
"""


def workload(seed=0):
    rng = np.random.default_rng(seed)
    values = rng.random((20, 30))
    weighted = values * rng.random((20, 30))
    obstacle = np.zeros((20, 30), dtype=np.uint8)
    pi = rng.integers(0, 20, 4).astype(np.int64)
    pj = rng.integers(0, 30, 4).astype(np.int64)
    q = rng.normal(size=(4, 5))
    dest = (pi[:, None] * 30 + pj[:, None] + np.array([0, -30, 30, -1, 1])).astype(np.int64)
    return {
        "step_idleness": lambda m: m.step_idleness(values, obstacle, pi, pj, 0.1, 0.025),
        "neighborhood_sums": lambda m: m.neighborhood_sums(weighted, pi, pj),
        "build_states": lambda m: m.build_states(values, weighted, obstacle, pi, pj),
        "joint_exhaustive": lambda m: m.joint_exhaustive(q, dest),
    }


def time_kernel(call, module, repeat):
    per_call = min(timeit.repeat(lambda: call(module), number=repeat, repeat=3)) / repeat
    return per_call * 1e6


def time_episode(backend, horizon):
    env = dict(os.environ, DRONEPATROL_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", EPISODE % horizon], env=env, capture_output=True,
                         text=True, check=True)
    name, seconds = out.stdout.split()
    return name, float(seconds)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200, help="calls per timing sample")
    ap.add_argument("--horizon", type=int, default=500, help="episode length for the end-to-end timing")
    args = ap.parse_args(argv)

    print(f"{'kernel':<20}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for name, call in workload().items():
        py = time_kernel(call, _pykernels, args.repeat)
        if _ckernels is None:
            print(f"{name:<20}{py:>12.1f}{'n/a':>12}{'':>10}")
            continue
        cy = time_kernel(call, _ckernels, args.repeat)
        print(f"{name:<20}{py:>12.1f}{cy:>12.1f}{py / cy:>9.1f}x")

    print()
    runs = {}
    for backend in ("python", "cython"):
        name, seconds = time_episode(backend, args.horizon)
        runs[name] = seconds
        print(f"episode ({args.horizon} steps, frozen coordinated rl) on {name} kernels: {seconds:.2f}s")
    if len(runs) == 2:
        print(f"end-to-end speedup: {runs['python'] / runs['cython']:.2f}x")
    else:
        print("compiled kernels unavailable; both episodes used the Python fallback")


if __name__ == "__main__":
    main()
