"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times the three iteration-heavy kernels on representative workloads (a
stacked DARE solve, the spectral-norm line search at optimizer-like sizes,
and a long closed-loop rollout) and prints per-kernel timings plus the
speedup of the compiled extension.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lqconsensus import _kernels_py

try:
    from lqconsensus import _kernels
except ImportError:
    _kernels = None


def make_dare(n: int, m: int, seed: int):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= 0.98 / np.abs(np.linalg.eigvals(A)).max()
    B = rng.standard_normal((n, m))
    M = rng.standard_normal((n, n))
    Q = M @ M.T + 0.05 * np.eye(n)
    R = np.eye(m)
    return A, B, Q, R


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1

    workloads = []

    # near-marginal closed loop makes the value iteration genuinely long
    A, B, Q, R = make_dare(12, 3, 0)
    workloads.append(
        (
            "dare_value_iteration (n=12, m=3)",
            lambda k: k.dare_value_iteration(A, B, Q, R, 1e-11, 200000),
        )
    )

    rng = np.random.default_rng(1)
    M0 = rng.standard_normal((24, 24))
    D = rng.standard_normal((24, 24))
    f0 = _kernels_py.spectral_norm(M0)

    def linesearch_burst(k):
        out = None
        for _ in range(500):
            out = k.sigma_linesearch(M0, D, f0, 1e-4, 1.0, 1e-4, 30)
        return out

    workloads.append(("sigma_linesearch x500 (24x24, 30 halvings)", linesearch_burst))

    def smax_burst(k):
        acc = 0.0
        for _ in range(2000):
            acc += k.spectral_norm(M0)
        return acc

    workloads.append(("spectral_norm x2000 (24x24)", smax_burst))

    Msmall = rng.standard_normal((6, 6))
    Dsmall = rng.standard_normal((6, 6))
    fsmall = _kernels_py.spectral_norm(Msmall)

    def linesearch_small(k):
        out = None
        for _ in range(2000):
            out = k.sigma_linesearch(Msmall, Dsmall, fsmall, 1e-4, 1.0, 1e-4, 30)
        return out

    workloads.append(("sigma_linesearch x2000 (6x6, 30 halvings)", linesearch_small))

    Mroll = rng.standard_normal((30, 30))
    Mroll *= 0.95 / np.abs(np.linalg.eigvals(Mroll)).max()
    z0 = rng.standard_normal(30)
    workloads.append(
        ("linear_rollout (dim=30, 20000 steps)",
         lambda k: k.linear_rollout(Mroll, z0, 20000))
    )

    print(f"{'kernel workload':<45} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, fn in workloads:
        t_py, out_py = bench(lambda: fn(_kernels_py), args.repeats)
        t_c, out_c = bench(lambda: fn(_kernels), args.repeats)
        if isinstance(out_py, tuple):
            check = np.allclose(
                np.asarray(out_py[0], dtype=float),
                np.asarray(out_c[0], dtype=float),
                atol=1e-9,
            )
        else:
            check = np.allclose(out_py, out_c, atol=1e-9)
        flag = "" if check else "  (MISMATCH)"
        print(
            f"{name:<45} {t_py * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms "
            f"{t_py / t_c:>7.1f}x{flag}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
