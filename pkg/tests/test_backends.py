"""Parity between the compiled extension kernels and the numpy fallback."""

import numpy as np
import pytest

from lqconsensus import _kernels_py as kpy
from lqconsensus import backend

try:
    from lqconsensus import _kernels as kc
except ImportError:  # extension not built in this environment
    kc = None

needs_compiled = pytest.mark.skipif(kc is None, reason="compiled kernels unavailable")


def random_dare(rng):
    n = int(rng.integers(1, 7))
    m = int(rng.integers(1, 4))
    A = rng.standard_normal((n, n))
    A *= rng.uniform(0.3, 1.1) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-9)
    B = rng.standard_normal((n, m))
    M = rng.standard_normal((n, n))
    Q = M @ M.T + 0.2 * np.eye(n)
    Rm = rng.standard_normal((m, m))
    R = Rm @ Rm.T + 0.5 * np.eye(m)
    return A, B, Q, R


@needs_compiled
def test_dare_iteration_parity():
    rng = np.random.default_rng(0)
    for _ in range(25):
        A, B, Q, R = random_dare(rng)
        P1, r1, i1, c1 = kc.dare_value_iteration(A, B, Q, R, 1e-11, 20000)
        P2, r2, i2, c2 = kpy.dare_value_iteration(A, B, Q, R, 1e-11, 20000)
        assert c1 == c2
        assert i1 == i2
        np.testing.assert_allclose(P1, P2, rtol=1e-9, atol=1e-11)
        assert abs(r1 - r2) <= 1e-12 * (1 + abs(r2))


@needs_compiled
def test_spectral_norm_parity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        M = rng.standard_normal((int(rng.integers(1, 12)), int(rng.integers(1, 12))))
        assert kc.spectral_norm(M) == pytest.approx(kpy.spectral_norm(M), abs=1e-12)


@needs_compiled
def test_linesearch_parity():
    rng = np.random.default_rng(2)
    for _ in range(30):
        d = int(rng.integers(2, 9))
        M = rng.standard_normal((d, d))
        D = rng.standard_normal((d, d))
        f0 = kpy.spectral_norm(M)
        dec = float(rng.uniform(0.01, 2.0))
        out_c = kc.sigma_linesearch(M, D, f0, dec, 1.0, 1e-4, 30)
        out_p = kpy.sigma_linesearch(M, D, f0, dec, 1.0, 1e-4, 30)
        assert out_c[2] == out_p[2]
        assert out_c[0] == pytest.approx(out_p[0], rel=1e-12)
        assert out_c[1] == pytest.approx(out_p[1], rel=1e-10, abs=1e-12)


@needs_compiled
def test_rollout_parity():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((6, 6)) * 0.4
    z0 = rng.standard_normal(6)
    Z1 = kc.linear_rollout(M, z0, 40)
    Z2 = kpy.linear_rollout(M, z0, 40)
    np.testing.assert_allclose(Z1, Z2, atol=1e-12)


def test_backend_selection_reports_name():
    assert backend.backend_name() in ("compiled", "python")


def test_python_fallback_env(tmp_path):
    import subprocess
    import sys

    code = (
        "import os; os.environ['LQCONSENSUS_PURE_PYTHON']='1';"
        "import lqconsensus; print(lqconsensus.backend_name())"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
