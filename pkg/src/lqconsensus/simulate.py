"""Deterministic closed-loop rollouts of the consensus controllers.

Covers the distributed observer-based controllers (error and state form),
their full-information centralized counterparts, and the classical static
Laplacian-feedback protocol used as the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import DirectedGraph, build_laplacian
from .observers import ObserverGains
from .riccati import DareProblem, solve_dare
from .systems import (
    AgentDynamics,
    CostWeights,
    EdgeLedger,
    GlobalErrorSystem,
    GlobalStateSystem,
    build_ledger,
)

METHODS = (
    "distributed_error",
    "distributed_state",
    "centralized_error",
    "centralized_state",
    "traditional",
)


class BaselineDesignError(RuntimeError):
    """The static baseline gain cannot be designed for this instance."""


@dataclass(frozen=True)
class SimulationConfig:
    """Rollout length, initial states, observer seeds and method tag.

    ``observer_init`` is None (zero initialization), the string "truth"
    (observers start at the exact stacked error/state), or an explicit
    (N, obs_dim) array.
    """

    horizon: int
    x0: np.ndarray
    method: str
    observer_init: np.ndarray | str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        x0 = np.atleast_2d(np.asarray(self.x0, dtype=np.float64))
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed record of one closed-loop run.

    states: (T+1, N, n); inputs: per-agent list of (T, m_i);
    error_vector: ledger-stacked pairwise errors (T+1, err_dim) when a
    ledger applies; observer_states / observer_error: (N, T+1, d) and
    (T+1, N*d) when the method runs observers; cost_increments: (T,)
    per-step stage cost when weights were available.
    """

    method: str
    states: np.ndarray = field(repr=False)
    inputs: list[np.ndarray] = field(repr=False)
    error_vector: np.ndarray | None = field(repr=False, default=None)
    observer_states: np.ndarray | None = field(repr=False, default=None)
    observer_error: np.ndarray | None = field(repr=False, default=None)
    cost_increments: np.ndarray | None = field(repr=False, default=None)
    ledger: EdgeLedger | None = None

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]

    def flat_states(self) -> np.ndarray:
        """States flattened to (T+1, N*n), agent-major."""
        T1, N, n = self.states.shape
        return self.states.reshape(T1, N * n)


@dataclass(frozen=True)
class ConsensusMetrics:
    """Settling step and per-step disagreement/norm series."""

    settling_step: int | None
    max_pairwise_error: np.ndarray = field(repr=False)
    state_norms: np.ndarray = field(repr=False)
    threshold: float = 1e-3


def _check_x0(dyn: AgentDynamics, cfg: SimulationConfig) -> np.ndarray:
    x0 = cfg.x0
    if x0.shape != (dyn.n_agents, dyn.n):
        raise ValueError(
            f"x0 has shape {x0.shape}, expected {(dyn.n_agents, dyn.n)}"
        )
    return x0.copy()


def _observer_init(cfg: SimulationConfig, truth: np.ndarray, N: int) -> np.ndarray:
    dim = truth.size
    if cfg.observer_init is None:
        return np.zeros((N, dim))
    if isinstance(cfg.observer_init, str):
        if cfg.observer_init != "truth":
            raise ValueError(f"unknown observer_init {cfg.observer_init!r}")
        return np.tile(truth, (N, 1))
    init = np.atleast_2d(np.asarray(cfg.observer_init, dtype=np.float64))
    if init.shape != (N, dim):
        raise ValueError(f"observer_init has shape {init.shape}, expected {(N, dim)}")
    return init.copy()


def _stage_cost(e_or_x: np.ndarray, Qmat: np.ndarray, inputs, R_list) -> float:
    cost = float(e_or_x @ Qmat @ e_or_x)
    for u, R in zip(inputs, R_list):
        cost += float(u @ R @ u)
    return cost


def simulate_distributed_error(
    dyn: AgentDynamics,
    sys_e: GlobalErrorSystem,
    Ke_blocks: list[np.ndarray],
    gains: ObserverGains,
    cfg: SimulationConfig,
) -> Trajectory:
    """Roll out u_i = K_ei ehat_i with per-agent observers of the global error.

    Each observer propagates its own injected input exactly, models every
    other agent's input as K_ej applied to its own estimate, and corrects
    with gain times (measured minus predicted measurement).
    """
    if cfg.method != "distributed_error":
        raise ValueError("cfg.method must be 'distributed_error'")
    if gains.form != "error":
        raise ValueError("gains must be in error form")
    N, n, T = dyn.n_agents, dyn.n, cfg.horizon
    ledger = sys_e.ledger
    x = _check_x0(dyn, cfg)
    ehat = _observer_init(cfg, ledger.stack_errors(x), N)

    states = np.empty((T + 1, N, n))
    errors = np.empty((T + 1, ledger.error_dim))
    obs = np.empty((N, T + 1, ledger.error_dim))
    obs_err = np.empty((T + 1, N * ledger.error_dim))
    inputs = [np.empty((T, m)) for m in dyn.m_list]
    costs = np.empty(T)

    H = sys_e.H_list
    B_bar = sys_e.B_bar_list
    for k in range(T + 1):
        e = ledger.stack_errors(x)
        states[k] = x
        errors[k] = e
        obs[:, k, :] = ehat
        obs_err[k] = (e[None, :] - ehat).ravel()
        if k == T:
            break
        u = [Ke_blocks[i] @ ehat[i] for i in range(N)]
        for i in range(N):
            inputs[i][k] = u[i]
        costs[k] = _stage_cost(e, sys_e.Q_tilde, u, sys_e.weights.R_list)

        x_next = np.empty_like(x)
        for i in range(N):
            x_next[i] = dyn.A @ x[i] + dyn.B_list[i] @ u[i]
        ehat_next = np.empty_like(ehat)
        for i in range(N):
            acc = sys_e.A_tilde @ ehat[i] + B_bar[i] @ u[i]
            for j in range(N):
                if j != i:
                    acc += B_bar[j] @ (Ke_blocks[j] @ ehat[i])
            acc += gains.gains[i] @ (H[i] @ e - H[i] @ ehat[i])
            ehat_next[i] = acc
        x, ehat = x_next, ehat_next

    return Trajectory(
        cfg.method, states, inputs, errors, obs, obs_err, costs, ledger
    )


def simulate_distributed_state(
    dyn: AgentDynamics,
    sys_s: GlobalStateSystem,
    K_blocks: list[np.ndarray],
    gains: ObserverGains,
    cfg: SimulationConfig,
) -> Trajectory:
    """Roll out u_i = K_i Xhat_i with per-agent observers of the stacked state."""
    if cfg.method != "distributed_state":
        raise ValueError("cfg.method must be 'distributed_state'")
    if gains.form != "state":
        raise ValueError("gains must be in state form")
    N, n, T = dyn.n_agents, dyn.n, cfg.horizon
    dim = N * n
    x = _check_x0(dyn, cfg)
    xhat = _observer_init(cfg, x.ravel(), N)

    states = np.empty((T + 1, N, n))
    obs = np.empty((N, T + 1, dim))
    obs_err = np.empty((T + 1, N * dim))
    inputs = [np.empty((T, m)) for m in dyn.m_list]
    costs = np.empty(T)

    C = sys_s.C_list
    B_tilde = sys_s.B_tilde_list
    for k in range(T + 1):
        X = x.ravel()
        states[k] = x
        obs[:, k, :] = xhat
        obs_err[k] = (X[None, :] - xhat).ravel()
        if k == T:
            break
        u = [K_blocks[i] @ xhat[i] for i in range(N)]
        for i in range(N):
            inputs[i][k] = u[i]
        costs[k] = _stage_cost(X, sys_s.Q_cal, u, sys_s.weights.R_list)

        x_next = np.empty_like(x)
        for i in range(N):
            x_next[i] = dyn.A @ x[i] + dyn.B_list[i] @ u[i]
        xhat_next = np.empty_like(xhat)
        for i in range(N):
            acc = sys_s.A_tilde @ xhat[i] + B_tilde[i] @ u[i]
            for j in range(N):
                if j != i:
                    acc += B_tilde[j] @ (K_blocks[j] @ xhat[i])
            acc += gains.gains[i] @ (C[i] @ X - C[i] @ xhat[i])
            xhat_next[i] = acc
        x, xhat = x_next, xhat_next

    return Trajectory(cfg.method, states, inputs, None, obs, obs_err, costs, None)


def simulate_centralized(
    dyn: AgentDynamics,
    sys,
    K: np.ndarray,
    cfg: SimulationConfig,
) -> Trajectory:
    """Full-information optimal feedback u = K e (error form) or u = K X."""
    if cfg.method not in ("centralized_error", "centralized_state"):
        raise ValueError("cfg.method must be centralized_error or centralized_state")
    error_form = cfg.method == "centralized_error"
    if error_form and not isinstance(sys, GlobalErrorSystem):
        raise ValueError("centralized_error needs a GlobalErrorSystem")
    if not error_form and not isinstance(sys, GlobalStateSystem):
        raise ValueError("centralized_state needs a GlobalStateSystem")

    N, n, T = dyn.n_agents, dyn.n, cfg.horizon
    x = _check_x0(dyn, cfg)
    ledger = sys.ledger if error_form else None

    states = np.empty((T + 1, N, n))
    errors = np.empty((T + 1, ledger.error_dim)) if error_form else None
    inputs = [np.empty((T, m)) for m in dyn.m_list]
    costs = np.empty(T)
    m_offsets = np.concatenate([[0], np.cumsum(dyn.m_list)])

    for k in range(T + 1):
        states[k] = x
        z = ledger.stack_errors(x) if error_form else x.ravel()
        if error_form:
            errors[k] = z
        if k == T:
            break
        u_all = K @ z
        u = [u_all[m_offsets[i]:m_offsets[i + 1]] for i in range(N)]
        for i in range(N):
            inputs[i][k] = u[i]
        Qmat = sys.Q_tilde if error_form else sys.Q_cal
        costs[k] = _stage_cost(z, Qmat, u, sys.weights.R_list)
        x_next = np.empty_like(x)
        for i in range(N):
            x_next[i] = dyn.A @ x[i] + dyn.B_list[i] @ u[i]
        x = x_next

    return Trajectory(cfg.method, states, inputs, errors, None, None, costs, ledger)


def simulate_traditional(
    dyn: AgentDynamics,
    g: DirectedGraph,
    F: np.ndarray,
    cfg: SimulationConfig,
    weights: CostWeights | None = None,
) -> Trajectory:
    """Static relative-state protocol u_i = F sum_j a_ij (x_j - x_i).

    Defined for identical agents only; heterogeneous B_i are rejected.
    Stage costs (ledger-based) are recorded when weights are supplied.
    """
    if cfg.method != "traditional":
        raise ValueError("cfg.method must be 'traditional'")
    if not dyn.homogeneous_input:
        raise BaselineDesignError(
            "traditional protocol is undefined for heterogeneous B_i"
        )
    N, n, T = dyn.n_agents, dyn.n, cfg.horizon
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    m = dyn.m_list[0]
    if F.shape != (m, n):
        raise ValueError(f"F has shape {F.shape}, expected {(m, n)}")
    x = _check_x0(dyn, cfg)
    ledger = build_ledger(g, n)
    w = g.weights

    states = np.empty((T + 1, N, n))
    errors = np.empty((T + 1, ledger.error_dim))
    inputs = [np.empty((T, m)) for _ in range(N)]
    costs = np.empty(T) if weights is not None else None
    Q_tilde = (
        np.kron(np.eye(ledger.n_entries), weights.Q) if weights is not None else None
    )

    for k in range(T + 1):
        states[k] = x
        e = ledger.stack_errors(x)
        errors[k] = e
        if k == T:
            break
        u = []
        for i in range(N):
            rel = np.zeros(n)
            for j in np.nonzero(w[i])[0]:
                rel += w[i, j] * (x[j] - x[i])
            u.append(F @ rel)
            inputs[i][k] = u[i]
        if weights is not None:
            costs[k] = _stage_cost(e, Q_tilde, u, weights.R_list)
        x_next = np.empty_like(x)
        B = dyn.B_list[0]
        for i in range(N):
            x_next[i] = dyn.A @ x[i] + B @ u[i]
        x = x_next

    return Trajectory(cfg.method, states, inputs, errors, None, None, costs, ledger)


def consensus_metrics(traj: Trajectory, threshold: float = 1e-3) -> ConsensusMetrics:
    """Settling step (sustained to horizon) and disagreement/norm series.

    The disagreement series takes the max over all agent pairs; settling
    means it stays at or below the threshold from that step onward.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    states = traj.states
    T1, N, _ = states.shape
    max_pair = np.zeros(T1)
    for i in range(N):
        for j in range(i + 1, N):
            d = np.linalg.norm(states[:, i, :] - states[:, j, :], axis=1)
            np.maximum(max_pair, d, out=max_pair)
    norms = np.linalg.norm(states, axis=2)

    settling = None
    ok = max_pair <= threshold
    for k in range(T1):
        if ok[k:].all():
            settling = k
            break
    return ConsensusMetrics(settling, max_pair, norms, threshold)


def design_baseline_gain(
    dyn: AgentDynamics,
    g: DirectedGraph,
    w: CostWeights,
    dare_tol: float = 1e-10,
) -> np.ndarray:
    """Eigenratio-scaled LQR gain for the traditional protocol.

    Solves the single-agent DARE with (A, B, Q, R_1), then scales by
    c = 2 / (lambda_2 + lambda_N) of the symmetrized Laplacian:
    F = c (R + B'PB)^-1 B'PA, so each consensus mode sees A - lambda c B K_lqr
    with lambda c centered around one.
    """
    if not dyn.homogeneous_input:
        raise BaselineDesignError(
            "baseline gain needs identical input matrices across agents"
        )
    lap = build_laplacian(g).values
    sym = 0.5 * (lap + lap.T)
    lams = np.sort(np.linalg.eigvalsh(sym))
    lam2, lamN = float(lams[1]), float(lams[-1])
    if lam2 + lamN <= 1e-12:
        raise BaselineDesignError(
            f"symmetrized Laplacian eigenvalues unusable (l2={lam2:.3g}, lN={lamN:.3g})"
        )
    c = 2.0 / (lam2 + lamN)
    prob = DareProblem(dyn.A, dyn.B_list[0], w.Q, w.R_list[0])
    sol = solve_dare(prob, tol=dare_tol)
    return np.asarray(-c * sol.gain)


def traditional_error_matrix(
    dyn: AgentDynamics, g: DirectedGraph, F: np.ndarray
) -> np.ndarray:
    """Matrix driving the ledger-stacked errors under the traditional protocol.

    The stacked closed loop is X -> (I (x) A - L (x) BF) X; since consensus
    directions are in its kernel image-wise, the map factors through the
    error selector S and e(k+1) = M e(k) with M = S (.) pinv(S).
    """
    N, n = dyn.n_agents, dyn.n
    ledger = build_ledger(g, n)
    S = np.zeros((ledger.error_dim, N * n))
    for t, (p, q) in enumerate(ledger.entries):
        S[ledger.entry_slice(t), p * n:(p + 1) * n] = np.eye(n)
        S[ledger.entry_slice(t), q * n:(q + 1) * n] = -np.eye(n)
    lap = build_laplacian(g).values
    closed = np.kron(np.eye(N), dyn.A) - np.kron(lap, dyn.B_list[0] @ F)
    return S @ closed @ np.linalg.pinv(S)
