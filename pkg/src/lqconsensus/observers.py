"""Observer-error matrices and spectral-norm gain synthesis.

Each agent runs a full-order observer of the stacked error (or state)
system driven by its local measurement. The stacked observer-error
dynamics matrix is affine in the injection gains; gains are chosen by
minimizing its spectral norm, which is the exact Schur-complement reading
of the semidefinite program

    min rho  s.t.  [[-rho I, M'], [M, -I]] <= 0.

The minimization runs as subgradient descent with Armijo backtracking;
since the objective is a convex function of the stacked gain entries, any
descent sequence is globally valid. Near-degenerate top singular values
are handled by averaging the subgradients of the clustered pairs, where
plain subgradient steps would stall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import backend
from .riccati import spectral_radius
from .systems import GlobalErrorSystem, GlobalStateSystem

_CLUSTER_GAP = 1e-8
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 30
_MAX_STEP = 8.0


@dataclass(frozen=True)
class ObserverGains:
    """Per-agent injection gains, in 'error' or 'state' form."""

    gains: tuple[np.ndarray, ...]
    form: str

    def __post_init__(self):
        if self.form not in ("error", "state"):
            raise ValueError(f"form must be 'error' or 'state', got {self.form!r}")
        object.__setattr__(
            self,
            "gains",
            tuple(np.atleast_2d(np.asarray(g, dtype=np.float64)) for g in self.gains),
        )

    @classmethod
    def zeros(cls, sys, form: str) -> "ObserverGains":
        dim = sys.dim
        return cls(
            tuple(np.zeros((dim, H.shape[0])) for H in sys.measurement_list), form
        )


@dataclass(frozen=True)
class SynthesisOptions:
    """Optimizer budget and stopping rule; seed is recorded for provenance
    only (the subgradient descent is deterministic)."""

    max_iters: int = 5000
    tol: float = 1e-6
    patience: int = 50
    seed: int | None = None


@dataclass(frozen=True)
class SynthesisReport:
    """Outcome of one spectral-norm minimization run."""

    rho_star: float
    spectral_radius: float
    iterations: int
    converged: bool
    history: tuple[float, ...] = field(repr=False)

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


class SynthesisNonConvergence(RuntimeError):
    """Iteration budget exhausted; carries the best-so-far result."""

    def __init__(self, gains: ObserverGains, report: SynthesisReport):
        super().__init__(
            f"spectral-norm minimization used all {report.iterations} iterations "
            f"(last sigma_max {report.rho_star:.6g})"
        )
        self.gains = gains
        self.report = report


def _check_gains(sys, gains: ObserverGains, form: str) -> None:
    if gains.form != form:
        raise ValueError(f"gains are in {gains.form!r} form, expected {form!r}")
    if len(gains.gains) != sys.n_agents:
        raise ValueError("need one gain matrix per agent")
    for i, (G, H) in enumerate(zip(gains.gains, sys.measurement_list)):
        if G.shape != (sys.dim, H.shape[0]):
            raise ValueError(
                f"gain {i + 1} has shape {G.shape}, expected {(sys.dim, H.shape[0])}"
            )


def _assemble(sys, K_blocks: Sequence[np.ndarray], gains: ObserverGains) -> np.ndarray:
    """N x N block observer-error matrix, affine in the injection gains.

    Diagonal blocks: Atilde + B K - B_i K_i - G_i H_i; off-diagonal (i, j):
    -B_j K_j.
    """
    N, dim = sys.n_agents, sys.dim
    b_list = sys.input_list
    for i, (Ki, Bi) in enumerate(zip(K_blocks, b_list)):
        if Ki.shape != (Bi.shape[1], dim):
            raise ValueError(
                f"gain block {i + 1} has shape {Ki.shape}, "
                f"expected {(Bi.shape[1], dim)}"
            )
    BK_terms = [b_list[j] @ K_blocks[j] for j in range(N)]
    Phi = sys.A_tilde + sum(BK_terms)
    out = np.zeros((N * dim, N * dim))
    for i in range(N):
        rows = slice(i * dim, (i + 1) * dim)
        for j in range(N):
            cols = slice(j * dim, (j + 1) * dim)
            if i == j:
                out[rows, cols] = (
                    Phi - BK_terms[i] - gains.gains[i] @ sys.measurement_list[i]
                )
            else:
                out[rows, cols] = -BK_terms[j]
    return out


def assemble_A_ec(
    sys_e: GlobalErrorSystem,
    Ke_blocks: Sequence[np.ndarray],
    gains: ObserverGains,
) -> np.ndarray:
    """Stacked observer-error matrix for the error-feedback design."""
    _check_gains(sys_e, gains, "error")
    return _assemble(sys_e, Ke_blocks, gains)


def assemble_A_c(
    sys_s: GlobalStateSystem,
    K_blocks: Sequence[np.ndarray],
    gains: ObserverGains,
) -> np.ndarray:
    """Stacked observer-error matrix for the state-feedback design."""
    _check_gains(sys_s, gains, "state")
    return _assemble(sys_s, K_blocks, gains)


def joint_closed_loop(
    sys, K_blocks: Sequence[np.ndarray], gains: ObserverGains
) -> np.ndarray:
    """Block upper-triangular matrix driving the joint (e, etilde) recursion.

    [[Phi, Omega], [0, A_obs]] with Phi = Atilde + B K,
    Omega = [-B_1 K_1 ... -B_N K_N] and A_obs the assembled observer-error
    matrix.
    """
    _check_gains(sys, gains, gains.form)
    b_list = sys.input_list
    Phi = sys.A_tilde + sum(b @ k for b, k in zip(b_list, K_blocks))
    Omega = np.hstack([-b @ k for b, k in zip(b_list, K_blocks)])
    A_obs = _assemble(sys, K_blocks, gains)
    dim, N = sys.dim, sys.n_agents
    top = np.hstack([Phi, Omega])
    bottom = np.hstack([np.zeros((N * dim, dim)), A_obs])
    return np.vstack([top, bottom])


def lmi_feasible(A_ec: np.ndarray, rho: float) -> bool:
    """Feasibility of [[-rho I, M'], [M, -I]] <= 0, i.e. sigma_max(M)^2 <= rho."""
    return backend.spectral_norm(A_ec) ** 2 <= rho


def _pack(gains: Sequence[np.ndarray]) -> np.ndarray:
    if not gains:
        return np.zeros(0)
    return np.concatenate([g.ravel() for g in gains])


def _unpack(theta: np.ndarray, shapes: list[tuple[int, int]]) -> list[np.ndarray]:
    out, off = [], 0
    for r, c in shapes:
        out.append(theta[off:off + r * c].reshape(r, c))
        off += r * c
    return out


def minimize_spectral_norm(
    assembler: Callable[[list[np.ndarray]], np.ndarray],
    init: ObserverGains,
    opts: SynthesisOptions | None = None,
) -> tuple[ObserverGains, SynthesisReport]:
    """Minimize sigma_max(assembler(gains)) over the gain entries.

    ``assembler`` must be affine in the gains (checked by a midpoint probe
    at the initial point). Convergence is declared when the relative
    improvement stays below opts.tol for opts.patience consecutive
    iterations; exhausting opts.max_iters first raises
    SynthesisNonConvergence with the best-so-far gains attached.
    """
    opts = opts or SynthesisOptions()
    shapes = [g.shape for g in init.gains]
    sizes = [r * c for r, c in shapes]
    n_params = sum(sizes)

    base = assembler([np.zeros(s) for s in shapes])
    dim = base.shape[0]

    if n_params == 0:
        M = assembler(list(init.gains))
        f = backend.spectral_norm(M)
        report = SynthesisReport(f, spectral_radius(M), 0, True, (f,))
        return init, report

    # Materialize the linear part of the affine map once; afterwards both
    # assembly and the adjoint are plain matrix products.
    lin = np.zeros((dim * dim, n_params))
    col = 0
    for idx, (r, c) in enumerate(shapes):
        for a in range(r):
            for b in range(c):
                probe = [np.zeros(s) for s in shapes]
                probe[idx][a, b] = 1.0
                lin[:, col] = (assembler(probe) - base).ravel()
                col += 1

    _verify_affine(assembler, shapes, init)

    theta = _pack(init.gains)
    M = (base.ravel() + lin @ theta).reshape(dim, dim)
    f = backend.spectral_norm(M)
    history = [f]
    t_accepted = 1.0
    stall = 0
    converged = False
    iterations = 0

    for iterations in range(1, opts.max_iters + 1):
        U, S, Vt = np.linalg.svd(M)
        if S[0] <= 0.0:
            converged = True
            break
        cluster = np.nonzero(S[0] - S < _CLUSTER_GAP)[0]
        grad = np.zeros(n_params)
        for j in cluster:
            grad += lin.T @ np.outer(U[:, j], Vt[j]).ravel()
        grad /= len(cluster)
        decrement = float(grad @ grad)
        if decrement < 1e-28:
            converged = True
            break

        direction = -(lin @ grad).reshape(dim, dim)
        t0 = min(2.0 * t_accepted, _MAX_STEP)
        t, f_new, accepted = backend.sigma_linesearch(
            M, direction, f, decrement, t0, _ARMIJO_C, _MAX_HALVINGS
        )
        if accepted:
            improvement = (f - f_new) / max(1.0, f)
            theta = theta - t * grad
            M = M + t * direction
            f = f_new
            t_accepted = t
            stall = stall + 1 if improvement < opts.tol else 0
        else:
            stall += 1
        history.append(f)
        if stall >= opts.patience:
            converged = True
            break

    gains = ObserverGains(tuple(_unpack(theta, shapes)), init.form)
    # Reassemble from the returned gains so the reported value is exactly
    # reproducible, not the incrementally updated float.
    M_final = assembler(list(gains.gains))
    rho_star = backend.spectral_norm(M_final)
    report = SynthesisReport(
        rho_star, spectral_radius(M_final), iterations, converged, tuple(history)
    )
    if not converged:
        raise SynthesisNonConvergence(gains, report)
    return gains, report


def _verify_affine(assembler, shapes, init) -> None:
    rng = np.random.default_rng(12345)
    delta = [rng.standard_normal(s) for s in shapes]
    at_init = assembler(list(init.gains))
    shifted = assembler([g + d for g, d in zip(init.gains, delta)])
    mid = assembler([g + 0.5 * d for g, d in zip(init.gains, delta)])
    scale = 1.0 + abs(at_init).max() + abs(shifted).max()
    if np.abs(0.5 * (at_init + shifted) - mid).max() > 1e-8 * scale:
        raise ValueError("assembler is not affine in the gains (midpoint check failed)")


def synthesize_gains(
    sys,
    K_blocks: Sequence[np.ndarray],
    form: str,
    opts: SynthesisOptions | None = None,
    init: ObserverGains | None = None,
) -> tuple[ObserverGains, SynthesisReport]:
    """Minimize the observer-error spectral norm for an assembled system."""
    init = init or ObserverGains.zeros(sys, form)

    def assemble(mats: list[np.ndarray]) -> np.ndarray:
        return _assemble(sys, K_blocks, ObserverGains(tuple(mats), form))

    return minimize_spectral_norm(assemble, init, opts)
