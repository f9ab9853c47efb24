"""Discrete algebraic Riccati equations and LQ feedback gains.

The solver is the plain value iteration
    P <- A'PA + Q - A'PB (R + B'PB)^-1 B'PA,   P0 = Q,
symmetrized every step, run until the fixed-point gap is below tolerance.
With Q only positive SEMIdefinite (consensus directions are cost-free) the
limit may be PSD rather than PD; the solution records its minimum
eigenvalue and downstream stability claims are checked numerically instead
of assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend

_SYM_TOL = 1e-10


class NonConvergence(RuntimeError):
    """Value iteration hit max_iter before the residual tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"DARE value iteration did not converge in {iterations} "
            f"iterations (last residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class IndefiniteIterate(RuntimeError):
    """Iterates lost symmetry/finiteness beyond repair."""


class IllConditionedGain(RuntimeError):
    """R + B'PB conditioning exceeds the hard limit for a trustworthy gain."""


@dataclass(frozen=True)
class DareProblem:
    """One DARE instance (A, B, Q, R) with Q >= 0 and R > 0."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        B = np.atleast_2d(np.asarray(self.B, dtype=np.float64))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=np.float64))
        R = np.atleast_2d(np.asarray(self.R, dtype=np.float64))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if Q.shape != (n, n):
            raise ValueError(f"Q is {Q.shape}, expected {(n, n)}")
        m = B.shape[1]
        if R.shape != (m, m):
            raise ValueError(f"R is {R.shape}, expected {(m, m)}")
        if not np.allclose(Q, Q.T, atol=_SYM_TOL):
            raise ValueError("Q must be symmetric")
        if not np.allclose(R, R.T, atol=_SYM_TOL):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -_SYM_TOL:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("R must be positive definite")
        for name, M in (("A", A), ("B", B), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, M)


@dataclass(frozen=True)
class DareSolution:
    """Solution P with its defining-identity residual and feedback gain."""

    P: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    gain: np.ndarray = field(repr=False)
    min_eigenvalue: float

    @property
    def is_positive_definite(self) -> bool:
        return self.min_eigenvalue > _SYM_TOL


def solve_dare(
    p: DareProblem, tol: float = 1e-10, max_iter: int = 50000
) -> DareSolution:
    """Value-iterate the DARE to the fixed point; returns solution + gain.

    Raises NonConvergence when the iteration budget runs out and
    IndefiniteIterate when iterates become non-finite.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P, residual, iterations, converged = backend.dare_value_iteration(
        p.A, p.B, p.Q, p.R, tol, max_iter
    )
    if not np.isfinite(P).all() or not np.isfinite(residual):
        raise IndefiniteIterate(
            f"DARE iterate lost finiteness after {iterations} iterations"
        )
    if not converged or residual > tol:
        raise NonConvergence(iterations, residual)
    if not np.allclose(P, P.T, atol=_SYM_TOL):
        raise IndefiniteIterate("DARE iterate symmetrization failed")
    min_eig = float(np.linalg.eigvalsh(P).min())
    gain = _gain(p, P)
    return DareSolution(P, residual, iterations, gain, min_eig)


def _gain(p: DareProblem, P: np.ndarray) -> np.ndarray:
    S = p.R + p.B.T @ P @ p.B
    cond = np.linalg.cond(S)
    if cond > 1e12:
        raise IllConditionedGain(
            f"cond(R + B'PB) = {cond:.3e} exceeds 1e12; gain untrustworthy"
        )
    W = p.B.T @ P @ p.A
    try:
        c = np.linalg.cholesky(S)
        X = np.linalg.solve(c.T, np.linalg.solve(c, W))
    except np.linalg.LinAlgError:
        X = np.linalg.solve(S, W)
    return -X


def feedback_gain(p: DareProblem, sol: DareSolution) -> np.ndarray:
    """K = -(R + B'PB)^-1 B'PA for a converged solution."""
    return _gain(p, sol.P)


def slice_agent_gain(K: np.ndarray, agent: int, m_list: list[int]) -> np.ndarray:
    """Rows of the stacked gain belonging to one agent.

    Row offsets follow the cumulative input dimensions; restacking all
    slices in agent order reproduces K exactly.
    """
    K = np.atleast_2d(np.asarray(K))
    if not 0 <= agent < len(m_list):
        raise IndexError(f"agent index {agent} out of range for {len(m_list)} agents")
    if K.shape[0] != sum(m_list):
        raise ValueError(
            f"gain has {K.shape[0]} rows but m_list sums to {sum(m_list)}"
        )
    off = sum(m_list[:agent])
    return K[off:off + m_list[agent], :]


def agent_gain_blocks(K: np.ndarray, m_list: list[int]) -> list[np.ndarray]:
    """All per-agent row blocks of a stacked gain."""
    return [slice_agent_gain(K, i, m_list) for i in range(len(m_list))]


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus."""
    M = np.atleast_2d(np.asarray(M))
    if M.shape[0] != M.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    if M.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(M)).max())


def closed_loop(p: DareProblem, K: np.ndarray) -> np.ndarray:
    """A + B K."""
    return p.A + p.B @ K
