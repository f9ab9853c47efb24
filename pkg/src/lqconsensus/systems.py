"""Stacked error/state systems and block cost weights for a multi-agent plant.

Agent dynamics are x_i(k+1) = A x_i(k) + B_i u_i(k) with a shared A and
per-agent input matrices B_i. The error system stacks the neighbor errors
e_ij = x_i - x_j in a canonical ledger order (owner agent ascending, then
neighbor ascending); the state system stacks the agent states directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .graph import DirectedGraph, is_strongly_connected, neighbor_sets

_PSD_TOL = 1e-10


@dataclass(frozen=True)
class AgentDynamics:
    """Shared state matrix A plus per-agent input matrices B_i."""

    A: np.ndarray
    B_list: tuple[np.ndarray, ...]

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        blist = []
        for i, B in enumerate(self.B_list):
            B = np.atleast_2d(np.asarray(B, dtype=np.float64))
            if B.shape[0] != A.shape[0]:
                raise ValueError(
                    f"B_{i + 1} has {B.shape[0]} rows, expected {A.shape[0]}"
                )
            if B.shape[1] < 1:
                raise ValueError(f"B_{i + 1} must have at least one column")
            blist.append(B)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B_list", tuple(blist))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.B_list)

    @property
    def m_list(self) -> list[int]:
        return [B.shape[1] for B in self.B_list]

    @property
    def homogeneous_input(self) -> bool:
        B0 = self.B_list[0]
        return all(B.shape == B0.shape and np.array_equal(B, B0) for B in self.B_list)


@dataclass(frozen=True)
class CostWeights:
    """State weight Q >= 0 (shared) and input weights R_i > 0 (per agent)."""

    Q: np.ndarray
    R_list: tuple[np.ndarray, ...]

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=np.float64))
        _require_symmetric(Q, "Q")
        if np.linalg.eigvalsh(Q).min() < -_PSD_TOL:
            raise ValueError("Q must be positive semidefinite")
        rlist = []
        for i, R in enumerate(self.R_list):
            R = np.atleast_2d(np.asarray(R, dtype=np.float64))
            _require_symmetric(R, f"R_{i + 1}")
            if np.linalg.eigvalsh(R).min() <= 0.0:
                raise ValueError(f"R_{i + 1} must be positive definite")
            rlist.append(R)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R_list", tuple(rlist))


def _require_symmetric(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric, got shape {M.shape}")


@dataclass(frozen=True)
class EdgeLedger:
    """Canonical ordering of the stacked error components.

    ``entries[t] == (i, j)`` means the t-th n-dimensional block of e(k) is
    e_ij = x_i - x_j. Entries are grouped by owner i ascending, neighbors j
    ascending within each group. ``block_offsets[i]`` is the index of agent
    i's first entry (its delta_i block).
    """

    entries: tuple[tuple[int, int], ...]
    block_offsets: tuple[int, ...]
    n: int

    @property
    def n_entries(self) -> int:
        return len(self.entries)

    @property
    def error_dim(self) -> int:
        return self.n * len(self.entries)

    def entry_slice(self, t: int) -> slice:
        return slice(t * self.n, (t + 1) * self.n)

    def delta_slice(self, agent: int) -> slice:
        start = self.block_offsets[agent]
        stop = (
            self.block_offsets[agent + 1]
            if agent + 1 < len(self.block_offsets)
            else self.n_entries
        )
        return slice(start * self.n, stop * self.n)

    def stack_errors(self, states: np.ndarray) -> np.ndarray:
        """Ledger-ordered error vector from per-agent states (N, n)."""
        states = np.asarray(states, dtype=np.float64)
        if len(self.entries) == 0:
            return np.zeros(0)
        return np.concatenate([states[i] - states[j] for (i, j) in self.entries])


def build_ledger(g: DirectedGraph, n: int) -> EdgeLedger:
    entries: list[tuple[int, int]] = []
    offsets: list[int] = []
    for i, nbrs in enumerate(neighbor_sets(g)):
        offsets.append(len(entries))
        entries.extend((i, j) for j in nbrs)
    return EdgeLedger(tuple(entries), tuple(offsets), n)


@dataclass(frozen=True)
class GlobalErrorSystem:
    """e(k+1) = A_tilde e(k) + sum_i Bbar_i u_i(k), measurements Y_i = H_i e."""

    A_tilde: np.ndarray = field(repr=False)
    B_bar_list: tuple[np.ndarray, ...] = field(repr=False)
    H_list: tuple[np.ndarray, ...] = field(repr=False)
    Q_tilde: np.ndarray = field(repr=False)
    R_blk: np.ndarray = field(repr=False)
    ledger: EdgeLedger
    dynamics: AgentDynamics
    weights: CostWeights

    @property
    def B_bar(self) -> np.ndarray:
        return np.hstack(self.B_bar_list)

    @property
    def dim(self) -> int:
        return self.A_tilde.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.B_bar_list)

    @property
    def input_list(self) -> tuple[np.ndarray, ...]:
        return self.B_bar_list

    @property
    def measurement_list(self) -> tuple[np.ndarray, ...]:
        return self.H_list


@dataclass(frozen=True)
class GlobalStateSystem:
    """X(k+1) = A_tilde X(k) + sum_i Btilde_i u_i(k), measurements Y_i = C_i X."""

    A_tilde: np.ndarray = field(repr=False)
    B_tilde_list: tuple[np.ndarray, ...] = field(repr=False)
    C_list: tuple[np.ndarray, ...] = field(repr=False)
    Q_cal: np.ndarray = field(repr=False)
    R_blk: np.ndarray = field(repr=False)
    dynamics: AgentDynamics
    weights: CostWeights

    @property
    def B_tilde(self) -> np.ndarray:
        return np.hstack(self.B_tilde_list)

    @property
    def dim(self) -> int:
        return self.A_tilde.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.B_tilde_list)

    @property
    def input_list(self) -> tuple[np.ndarray, ...]:
        return self.B_tilde_list

    @property
    def measurement_list(self) -> tuple[np.ndarray, ...]:
        return self.C_list


def _check_weights(dyn: AgentDynamics, w: CostWeights) -> None:
    if w.Q.shape[0] != dyn.n:
        raise ValueError(f"Q is {w.Q.shape}, expected {(dyn.n, dyn.n)}")
    if len(w.R_list) != dyn.n_agents:
        raise ValueError("need one R_i per agent")
    for i, (R, m) in enumerate(zip(w.R_list, dyn.m_list)):
        if R.shape[0] != m:
            raise ValueError(f"R_{i + 1} is {R.shape}, expected {(m, m)}")


def _warn_if_not_strongly_connected(g: DirectedGraph) -> None:
    if not is_strongly_connected(g):
        warnings.warn(
            "communication graph is not strongly connected; "
            "consensus is not guaranteed",
            stacklevel=3,
        )


def build_error_system(
    dyn: AgentDynamics,
    g: DirectedGraph,
    w: CostWeights,
    measurement_plan: list[np.ndarray] | None = None,
) -> GlobalErrorSystem:
    """Assemble the stacked neighbor-error dynamics and block cost weights.

    The default measurement H_i selects agent i's own delta_i block;
    ``measurement_plan`` overrides it with explicit 0/1 selector rows
    (each matrix must have error_dim columns).
    """
    if g.n_agents != dyn.n_agents:
        raise ValueError("graph and dynamics disagree on the number of agents")
    _check_weights(dyn, w)
    _warn_if_not_strongly_connected(g)

    ledger = build_ledger(g, dyn.n)
    n, dim = dyn.n, ledger.error_dim
    A_tilde = np.kron(np.eye(ledger.n_entries), dyn.A)

    b_bar = []
    for i in range(dyn.n_agents):
        Bi = np.zeros((dim, dyn.m_list[i]))
        for t, (p, q) in enumerate(ledger.entries):
            if p == i:
                Bi[ledger.entry_slice(t), :] += dyn.B_list[i]
            if q == i:
                Bi[ledger.entry_slice(t), :] -= dyn.B_list[i]
        b_bar.append(Bi)

    if measurement_plan is None:
        h_list = []
        for i in range(dyn.n_agents):
            sl = ledger.delta_slice(i)
            H = np.zeros((sl.stop - sl.start, dim))
            H[:, sl] = np.eye(sl.stop - sl.start)
            h_list.append(H)
    else:
        if len(measurement_plan) != dyn.n_agents:
            raise ValueError("measurement_plan needs one matrix per agent")
        h_list = []
        for i, H in enumerate(measurement_plan):
            H = np.atleast_2d(np.asarray(H, dtype=np.float64))
            if H.size == 0:
                H = H.reshape(0, dim)
            if H.shape[1] != dim:
                raise ValueError(
                    f"H_{i + 1} has {H.shape[1]} columns, expected {dim}"
                )
            h_list.append(H)

    Q_tilde = np.kron(np.eye(ledger.n_entries), w.Q)
    R_blk = sla.block_diag(*w.R_list) if w.R_list else np.zeros((0, 0))
    return GlobalErrorSystem(
        A_tilde, tuple(b_bar), tuple(h_list), Q_tilde, R_blk, ledger, dyn, w
    )


def build_state_system(
    dyn: AgentDynamics,
    g: DirectedGraph,
    w: CostWeights,
    measurement_plan: list[np.ndarray] | None = None,
) -> GlobalStateSystem:
    """Assemble the stacked state dynamics with the pairwise-disagreement weight.

    Q_cal has (N-1)Q on the diagonal blocks and -Q off-diagonal, so
    X' Q_cal X equals the disagreement cost summed over all unordered agent
    pairs; consensus directions 1 (x) v lie in its kernel.
    """
    if g.n_agents != dyn.n_agents:
        raise ValueError("graph and dynamics disagree on the number of agents")
    _check_weights(dyn, w)
    _warn_if_not_strongly_connected(g)

    N, n = dyn.n_agents, dyn.n
    A_tilde = np.kron(np.eye(N), dyn.A)
    b_tilde = []
    for i in range(N):
        Bi = np.zeros((N * n, dyn.m_list[i]))
        Bi[i * n:(i + 1) * n, :] = dyn.B_list[i]
        b_tilde.append(Bi)

    Q_cal = np.kron(N * np.eye(N) - np.ones((N, N)), w.Q)

    if measurement_plan is None:
        c_list = []
        for i in range(N):
            C = np.zeros((n, N * n))
            C[:, i * n:(i + 1) * n] = np.eye(n)
            c_list.append(C)
    else:
        if len(measurement_plan) != N:
            raise ValueError("measurement_plan needs one matrix per agent")
        c_list = []
        for i, C in enumerate(measurement_plan):
            C = np.atleast_2d(np.asarray(C, dtype=np.float64))
            if C.size == 0:
                C = C.reshape(0, N * n)
            if C.shape[1] != N * n:
                raise ValueError(
                    f"C_{i + 1} has {C.shape[1]} columns, expected {N * n}"
                )
            c_list.append(C)

    R_blk = sla.block_diag(*w.R_list) if w.R_list else np.zeros((0, 0))
    return GlobalStateSystem(
        A_tilde, tuple(b_tilde), tuple(c_list), Q_cal, R_blk, dyn, w
    )


def error_cost_equivalence_check(
    sys_e: GlobalErrorSystem, e_samples: np.ndarray
) -> float:
    """Max deviation between the neighbor double-sum cost and e' Q_tilde e.

    ``e_samples`` is (n_samples, error_dim). The double sum iterates the
    ledger entries explicitly with the per-error weight Q.
    """
    e_samples = np.atleast_2d(np.asarray(e_samples, dtype=np.float64))
    Q = sys_e.weights.Q
    worst = 0.0
    for e in e_samples:
        double_sum = 0.0
        for t in range(sys_e.ledger.n_entries):
            eij = e[sys_e.ledger.entry_slice(t)]
            double_sum += float(eij @ Q @ eij)
        quad = float(e @ sys_e.Q_tilde @ e)
        worst = max(worst, abs(double_sum - quad))
    return worst
