#!/usr/bin/env python3
"""Benchmark the per-group detector kernels: compiled extension vs numpy.

Times each kernel on the soft estimates of a large-system frame batch and
prints microseconds per frame plus the speedup of the compiled path.

Usage: python benchmarks/bench_kernels.py [--frames 200] [--n 64]
"""
import argparse
import time

import numpy as np

from gsmafdm import _kernels
from gsmafdm.detectors import DetectorContext
from gsmafdm.mapping import GsmConfig


def make_inputs(n, frames, seed=0):
    ctx = DetectorContext.build(GsmConfig(4, 4, n, 2, 4))
    rng = np.random.default_rng(seed)
    xts = []
    for _ in range(frames):
        clean = ctx.codewords[rng.integers(0, 64, size=n)]
        xts.append(clean + 0.3 * (rng.standard_normal((n, 4)) +
                                  1j * rng.standard_normal((n, 4))))
    return ctx, xts


def time_backend(name, ctx, xts, n0=0.05):
    _kernels.use_backend(name)
    kern = _kernels.active
    out = {}
    t0 = time.perf_counter()
    for xt in xts:
        kern.group_mld(xt, ctx.codewords)
    out["group-mld"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    lams = [kern.llr_matrix(xt, ctx.points, n0, 2) for xt in xts]
    out["llr"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for xt, lam in zip(xts, lams):
        kern.llrd(lam, xt, ctx.masks, ctx.taps, ctx.points)
    out["llrd"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for xt, lam in zip(xts, lams):
        kern.tc_llrd(lam, xt, ctx.masks, ctx.taps, ctx.points)
    out["tc-llrd"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for xt in xts:
        kern.grcd(xt, ctx.taps, ctx.ant_indptr, ctx.ant_ids, ctx.points, 3, 0.01)
    out["grcd"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    for xt in xts:
        kern.rscd(xt, ctx.taps, ctx.points, 3)
    out["rscd"] = time.perf_counter() - t0
    # joint search on a small product space (4 groups of 16 codewords)
    rng = np.random.default_rng(1)
    t_stack = (rng.standard_normal((4, 16, 8)) +
               1j * rng.standard_normal((4, 16, 8)))
    y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    t0 = time.perf_counter()
    for _ in range(len(xts)):
        kern.mld_scan(t_stack, y)
    out["mld-scan(64k)"] = time.perf_counter() - t0
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()

    ctx, xts = make_inputs(args.n, args.frames)
    backends = _kernels.available_backends()
    results = {b: time_backend(b, ctx, xts) for b in backends}
    _kernels.use_backend(backends[-1])

    print(f"\nper-frame kernel timings, N={args.n} groups, M_t=4, K=2, Q=4, "
          f"{args.frames} frames")
    print(f"{'kernel':16s}" + "".join(f"{b:>14s}" for b in backends) +
          ("{:>10s}".format("speedup") if len(backends) == 2 else ""))
    for key in results[backends[0]]:
        row = f"{key:16s}"
        for b in backends:
            row += f"{1e6 * results[b][key] / args.frames:>12.1f}us"
        if len(backends) == 2:
            row += f"{results['python'][key] / results['compiled'][key]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
