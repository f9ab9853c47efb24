"""Kernel backend selection.

The hot numerical kernels (DARE value iteration, spectral-norm line search,
closed-loop rollouts) exist twice: a Cython extension compiled at install
time and a pure-numpy fallback with identical signatures. The compiled one
is used when importable unless ``LQCONSENSUS_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("LQCONSENSUS_PURE_PYTHON", "") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return "python" if _impl is _kernels_py else "compiled"


dare_value_iteration = _impl.dare_value_iteration
spectral_norm = _impl.spectral_norm
sigma_linesearch = _impl.sigma_linesearch
linear_rollout = _impl.linear_rollout
