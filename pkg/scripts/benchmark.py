"""Time and memory for building and quantifying one long combined matrix.

    python3 scripts/benchmark.py [--days 14] [--window-s 450] [--repeat 5]
"""

import argparse
import time
import tracemalloc

import numpy as np

from sparq.ingest import Trajectory
from sparq.metrics import contact_metrics
from sparq.preprocess import QuantConfig, WindowConfig, l_min_for, to_grid
from sparq.recurrence import proximity_matrix


def random_walk(agent, ts, rng, step_m=3.0):
    return Trajectory(agent, ts, np.cumsum(rng.normal(0, step_m, ts.size)),
                      np.cumsum(rng.normal(0, step_m, ts.size)))


def run_once(c, h, window, quant):
    t = time.perf_counter()
    m = proximity_matrix(to_grid(h, window, quant), to_grid(c, window, quant))
    cm = contact_metrics(m, window.window_s, l_min_for(window.critical_exposure_s, window.window_s))
    return time.perf_counter() - t, m, cm


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--days", type=int, default=14)
    ap.add_argument("--window-s", type=int, default=450)
    ap.add_argument("--sample-s", type=int, default=60)
    ap.add_argument("--cell-m", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    ts = np.arange(0, args.days * 86400, args.sample_s)
    c, h = random_walk("c", ts, rng), random_walk("h", ts, rng)
    window, quant = WindowConfig(args.window_s), QuantConfig(args.cell_m)

    times = []
    for _ in range(args.repeat):
        dt, m, cm = run_once(c, h, window, quant)
        times.append(dt)
    tracemalloc.start()
    run_once(c, h, window, quant)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    print(f"n={m.n} matrix bytes={m.nbytes} c_tot_raw={cm.c_tot_raw}")
    print(f"time: best {min(times):.3f}s median {float(np.median(times)):.3f}s over {args.repeat} runs")
    print(f"peak traced memory: {peak / 2 ** 20:.2f} MiB")


if __name__ == "__main__":
    main()
