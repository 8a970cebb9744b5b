"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because ``DERFDD_NUMBA`` is read
at import time::

    python3 benchmarks/bench_kernels.py            # both backends
    python3 benchmarks/bench_kernels.py --backend numba
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def run_here(repeat):
    from derfdd import _accel
    from derfdd.dataset import run_scenario
    from derfdd.faults import TABLE1_TRAIN
    from derfdd.ml import KnnModel

    rng = np.random.default_rng(0)
    ex = rng.normal(size=(20_000, 60))
    lab = rng.integers(0, 12, 20_000)
    q = ex[rng.choice(20_000, 200)] + rng.normal(scale=0.1, size=(200, 60))
    knn = KnnModel(ex, lab)
    # warm-up call triggers compilation so it is not timed
    run_scenario(TABLE1_TRAIN, sample_period=50e-6, duration=0.001)
    knn.classify_batch(q[:2])
    dur = 0.1 if _accel.USE_NUMBA else 0.02
    sim = _best(lambda: run_scenario(TABLE1_TRAIN, sample_period=50e-6, duration=dur), repeat)
    search = _best(lambda: knn.classify_batch(q), repeat)
    return {"backend": _accel.backend_name(),
            "simulate_s_per_sim_second": sim / dur,
            "knn_ms_per_query": 1e3 * search / len(q)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--backend", choices=["numba", "numpy", "both"], default="both")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if args.backend != "both":
        print(json.dumps(run_here(args.repeat)))
        return
    rows = []
    for flag, name in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, DERFDD_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--backend", name, "--repeat",
                              str(args.repeat)], env=env, check=True, capture_output=True,
                             text=True).stdout
        rows.append(json.loads(out.strip().splitlines()[-1]))
    print(f"{'backend':<8} {'simulate [s per simulated s]':>30} {'knn [ms/query]':>16}")
    for r in rows:
        print(f"{r['backend']:<8} {r['simulate_s_per_sim_second']:>30.3f} "
              f"{r['knn_ms_per_query']:>16.3f}")
    print(f"speed-up simulate x{rows[1]['simulate_s_per_sim_second'] / rows[0]['simulate_s_per_sim_second']:.1f}, "
          f"knn x{rows[1]['knn_ms_per_query'] / rows[0]['knn_ms_per_query']:.1f}")


if __name__ == "__main__":
    main()
