"""Directed communication graphs, Laplacians and their spectra."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class EigenvalueError(RuntimeError):
    """Dense eigenvalue iteration failed to converge."""

    def __init__(self, message: str, max_sweeps: int):
        super().__init__(f"{message} (QR iteration budget: {max_sweeps} sweeps)")
        self.max_sweeps = max_sweeps


@dataclass(frozen=True)
class DirectedGraph:
    """Weighted digraph on N >= 2 agents.

    ``weights[i, j] != 0`` means there is an edge from agent j to agent i,
    i.e. agent i receives agent j's information. Weights are nonnegative
    and the diagonal is zero (no self-loops).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got {w.shape}")
        if w.shape[0] < 2:
            raise ValueError("need at least 2 agents")
        if np.any(np.diagonal(w) != 0.0):
            raise ValueError("adjacency diagonal must be zero (no self-loops)")
        if np.any(w < 0.0):
            raise ValueError("edge weights must be nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class LaplacianMatrix:
    """Graph Laplacian: diagonal holds in-neighbor weight sums, rows sum to zero."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        rows = np.abs(v.sum(axis=1)).max()
        if rows > 1e-12:
            raise ValueError(f"Laplacian rows must sum to zero (max |sum| = {rows:.2e})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def build_laplacian(g: DirectedGraph) -> LaplacianMatrix:
    """L = diag(row sums of A) - A for the graph's weight matrix A."""
    w = g.weights
    lap = -w.copy()
    np.fill_diagonal(lap, w.sum(axis=1))
    return LaplacianMatrix(lap)


def neighbor_sets(g: DirectedGraph) -> list[list[int]]:
    """Ascending in-neighbor index lists; this order fixes the edge ledger."""
    return [sorted(np.nonzero(g.weights[i])[0].tolist()) for i in range(g.n_agents)]


def is_strongly_connected(g: DirectedGraph) -> bool:
    """Directed path between every ordered pair of nodes.

    Two reachability sweeps from node 0: one along edges, one against them.
    """
    w = g.weights
    return _reaches_all(w) and _reaches_all(w.T)


def _reaches_all(w: np.ndarray) -> bool:
    # w[i, j] != 0 is an arc j -> i; sweep follows arcs out of node 0.
    n = w.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for i in np.nonzero(w[:, j])[0]:
            if not seen[i]:
                seen[i] = True
                queue.append(i)
    return bool(seen.all())


def laplacian_spectrum(lap: LaplacianMatrix, max_sweeps: int = 500) -> np.ndarray:
    """Eigenvalues of the Laplacian sorted by ascending real part.

    For a strongly connected graph exactly one eigenvalue is (numerically)
    zero. Backed by LAPACK's Hessenberg-QR driver via numpy.
    """
    try:
        ev = np.linalg.eigvals(lap.values)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenvalueError(str(exc), max_sweeps) from exc
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]
