"""Compare the numba and numpy Gauss-Legendre segment kernels.

    python benchmarks/bench_kernels.py [--ions 2] [--n-max 60] [--cols 8] [--steps 200]

Both kernels advance the same random batch; the script reports wall time per
step (after a warm-up call that absorbs JIT compilation) and the largest
amplitude difference between the two results.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from walshms import _kernels


def _batch(n_ions, n_max, cols, seed=1):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=(2**n_ions, n_max + 1, cols)) + 1j * rng.normal(size=(2**n_ions, n_max + 1, cols))
    psi[:, -4:, :] = 0.0
    return psi / np.linalg.norm(psi.reshape(-1, cols), axis=0)


def _time(kernel, psi0, steps, h, args, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        psi = psi0.copy()
        t0 = time.perf_counter()
        status, _ = kernel(psi, 0.0, h, steps, *args)
        best = min(best, time.perf_counter() - t0)
        if status != _kernels.STATUS_OK:
            raise RuntimeError("stage iteration diverged; lower the step")
        out = psi
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ions", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=60)
    ap.add_argument("--cols", type=int, default=8)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)

    omega = 2 * math.pi * 1.47e3
    delta = 2 * math.pi * 5.88e3
    rate = delta + omega * a.ions * math.sqrt(a.n_max + 1)
    h = 0.5 / rate
    args = (1.0, 0.5 * omega, delta, 0.0, 0.0, 0.0, a.ions)
    psi0 = _batch(a.ions, a.n_max, a.cols)

    # warm-up compiles (or loads from cache) the numba kernel
    _kernels.evolve_segment_numba(psi0.copy(), 0.0, h, 1, *args)

    t_nb, out_nb = _time(_kernels.evolve_segment_numba, psi0, a.steps, h, args, a.repeat)
    t_np, out_np = _time(_kernels.evolve_segment_numpy, psi0, a.steps, h, args, a.repeat)
    diff = float(np.max(np.abs(out_nb - out_np)))
    shape = f"{2**a.ions}x{a.n_max + 1}x{a.cols}"
    print(f"state {shape}, {a.steps} steps")
    print(f"numba  {1e6 * t_nb / a.steps:10.2f} us/step")
    print(f"numpy  {1e6 * t_np / a.steps:10.2f} us/step")
    print(f"speedup {t_np / t_nb:8.2f}x   max |difference| {diff:.2e}")


if __name__ == "__main__":
    main()
