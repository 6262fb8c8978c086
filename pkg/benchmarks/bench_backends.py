#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Measures the workloads that dominate real use: single-window decision latency
(the receiver's critical path) and batched Monte-Carlo throughput, in both
arithmetic families, plus one end-to-end BER sweep point.  Also verifies on
the way that the two backends produce bit-identical outputs.

Usage: python benchmarks/bench_backends.py [--symbols N]
"""

import argparse
import time

import numpy as np

from rofaccel import kernels
from rofaccel.channel import generate
from rofaccel.defaults import build_default_bcnn, build_default_cnn, load_default_sweep
from rofaccel.nn_core import FIXED, Tensor1D, forward, forward_batch
from rofaccel.numerics import Q16_8, to_fixed


def _time(fn, min_seconds=0.4):
    fn()  # warm up
    reps = 1
    while True:
        start = time.perf_counter()
        for _ in range(reps):
            fn()
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return elapsed / reps
        reps = max(reps * 2, int(reps * min_seconds / max(elapsed, 1e-9)))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--symbols", type=int, default=30_000, help="symbols for the batch workloads")
    args = parser.parse_args()

    if "compiled" not in kernels.available_backends():
        print("compiled backend not built; nothing to compare")
        return 1

    sweep = load_default_sweep()
    dataset = generate(sweep["points"][2].config, args.symbols)
    nets = {
        "cnn/real32": build_default_cnn(),
        "cnn/q16.8": build_default_cnn(arithmetic=FIXED),
        "bcnn/real32": build_default_bcnn(),
    }

    rows = []
    for name, net in nets.items():
        fixed = net.arithmetic == FIXED
        window = dataset.windows[0]
        x = Tensor1D(to_fixed(window, Q16_8), Q16_8) if fixed else Tensor1D(window)

        per_backend = {}
        for backend in ("compiled", "pure"):
            kernels.set_backend(backend)
            single = _time(lambda: forward(net, x))
            batch = _time(lambda: forward_batch(net, dataset.windows), min_seconds=0.8)
            decisions, scores = forward_batch(net, dataset.windows)
            per_backend[backend] = (single, batch, decisions, scores)
        kernels.set_backend("auto")

        c_single, c_batch, c_dec, c_scores = per_backend["compiled"]
        p_single, p_batch, p_dec, p_scores = per_backend["pure"]
        assert np.array_equal(c_dec, p_dec) and np.array_equal(c_scores, p_scores), name
        rows.append(
            (
                name,
                c_single * 1e6,
                p_single * 1e6,
                p_single / c_single,
                dataset.n_frames / c_batch,
                dataset.n_frames / p_batch,
                p_batch / c_batch,
            )
        )

    print(f"\nworkload: {dataset.n_frames} windows of length {dataset.windows.shape[2]} "
          f"(outputs verified bit-identical across backends)\n")
    header = (
        f"{'network':12s} {'1-win compiled':>15s} {'1-win pure':>12s} {'speedup':>8s} "
        f"{'batch compiled':>15s} {'batch pure':>12s} {'speedup':>8s}"
    )
    print(header)
    print("-" * len(header))
    for name, cs, ps, s1, cb, pb, sb in rows:
        print(
            f"{name:12s} {cs:13.1f}us {ps:10.1f}us {s1:7.1f}x "
            f"{cb:11.0f}w/s {pb:10.0f}w/s {sb:7.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
