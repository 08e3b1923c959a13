#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends on realistic workloads.

Each backend runs in its own subprocess with IQABENCH_NUMBA forced, so the
measurement uses exactly the env-flag path users get. Numba timings exclude
compilation (one warmup call precedes the timed repeats).

    python3 benchmarks/bench_backends.py [--repeats 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

TASKS = ["map_384x256", "map_128x128", "bm3d_sweep_256"]


def run_task(task: str, repeats: int) -> dict:
    import numpy as np

    from iqabench import kernels
    from iqabench.blockmatch import BlockSpec, dissimilarity_map
    from iqabench.denoise import DenoiseParams, bm3d_sweep_detailed

    rng = np.random.default_rng(8261)

    if task == "map_384x256":
        img = rng.integers(0, 256, size=(256, 384)).astype(np.float64)
        work = lambda: dissimilarity_map(img, BlockSpec(5, 19))
    elif task == "map_128x128":
        img = rng.integers(0, 256, size=(128, 128)).astype(np.float64)
        work = lambda: dissimilarity_map(img, BlockSpec(5, 19))
    elif task == "bm3d_sweep_256":
        ref = np.full((256, 256), 70.0)
        ref[:, 128:] = 190.0
        img = ref + rng.normal(0, np.sqrt(200.0), size=ref.shape)
        params = DenoiseParams(sigma=np.sqrt(200.0), lam=1.6)
        work = lambda: bm3d_sweep_detailed(img, params, [1.6, 2.0, 2.4, 2.8])
    else:
        raise SystemExit(f"unknown task {task!r}")

    work()  # warmup (compiles the numba kernels on first use)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        work()
        times.append(time.perf_counter() - start)
    return {"task": task, "backend": kernels.backend_name(), "best_s": min(times),
            "mean_s": sum(times) / len(times)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--worker-task", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker_task:
        print(json.dumps(run_task(args.worker_task, args.repeats)))
        return 0

    results = {}
    for backend_flag, label in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, IQABENCH_NUMBA=backend_flag)
        for task in TASKS:
            proc = subprocess.run(
                [sys.executable, os.path.abspath(__file__),
                 "--worker-task", task, "--repeats", str(args.repeats)],
                capture_output=True, text=True, env=env, check=True,
            )
            results[(task, label)] = json.loads(proc.stdout.strip().splitlines()[-1])

    print(f"{'task':<16} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>8}")
    for task in TASKS:
        fast = results[(task, "numba")]["best_s"]
        slow = results[(task, "numpy")]["best_s"]
        print(f"{task:<16} {fast:>10.3f} {slow:>10.3f} {slow / fast:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
