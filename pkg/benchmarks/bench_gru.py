"""Benchmark the recurrent kernels: numba-compiled vs pure-numpy path.

Runs the forward+backward recurrence at training-like shapes and reports
steps/second for each backend.

    python benchmarks/bench_gru.py --seq-len 80 --batch 16 --hidden 128
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ocref.kernels import gru_numpy


def make_case(rng, T, B, H):
    xz, xr, xn = (rng.normal(size=(T, B, H)) for _ in range(3))
    wz, wr, wn = (rng.normal(size=(H, H)) * 0.3 for _ in range(3))
    lengths = rng.integers(max(1, T // 2), T + 1, size=B)
    mask = (np.arange(T)[:, None] < lengths[None, :]).astype(np.float64)
    dh = rng.normal(size=(B, H))
    return xz, xr, xn, wz, wr, wn, mask, dh


def run_backend(mod, case, repeats):
    xz, xr, xn, wz, wr, wn, mask, dh = case
    # warmup (and JIT compile for the numba path)
    h, z, r, n = mod.gru_forward(xz, xr, xn, wz, wr, wn, mask)
    mod.gru_backward(dh, h, z, r, n, wz, wr, wn, mask)
    t0 = time.perf_counter()
    for _ in range(repeats):
        h, z, r, n = mod.gru_forward(xz, xr, xn, wz, wr, wn, mask)
        mod.gru_backward(dh, h, z, r, n, wz, wr, wn, mask)
    return time.perf_counter() - t0


def main() -> None:
    parser = argparse.ArgumentParser(description="GRU kernel throughput: numba vs numpy")
    parser.add_argument("--seq-len", type=int, default=80)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--hidden", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    case = make_case(rng, args.seq_len, args.batch, args.hidden)
    steps = args.repeats * args.seq_len

    print(f"T={args.seq_len} B={args.batch} H={args.hidden} repeats={args.repeats}")
    t_np = run_backend(gru_numpy, case, args.repeats)
    print(f"numpy : {t_np:8.3f}s  {steps / t_np:10.0f} steps/s")
    try:
        from ocref.kernels import gru_numba
    except ImportError:
        print("numba : unavailable")
        return
    t_nb = run_backend(gru_numba, case, args.repeats)
    print(f"numba : {t_nb:8.3f}s  {steps / t_nb:10.0f} steps/s")
    print(f"speedup: {t_np / t_nb:.2f}x")


if __name__ == "__main__":
    main()
