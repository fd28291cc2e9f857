"""Benchmark the numpy and compiled chain-update kernels.

Runs identical MALA and ULA workloads through both backends and reports
per-step wall time and the speedup. Usage:

    python benchmarks/bench_backends.py --chains 1024 10240 --steps 200
"""

import argparse
import time

import numpy as np

from slcreduce.kernels import available_backends, get_backend, pack_mixture
from slcreduce.models import bundled_bimodal_2d
from slcreduce.samplers import run_chains


def time_backend(name: str, method: str, n_chains: int, steps: int, repeats: int) -> float:
    model = bundled_bimodal_2d()
    pack = pack_mixture(model, n_chains)
    x0 = np.zeros((n_chains, model.dim))
    backend = get_backend(name)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_chains(pack, x0, 0.05, steps, method=method, seed_or_rng=0, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best / steps


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--chains", type=int, nargs="+", default=[256, 2048, 10240])
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'method':>6} {'chains':>8}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for method in ("mala", "ula"):
        for n in args.chains:
            times = [time_backend(b, method, n, args.steps, args.repeats) for b in backends]
            row = f"{method:>6} {n:>8}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times)
            if len(times) > 1:
                row += f"{times[-1] / times[0]:>9.2f}x"
            print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
