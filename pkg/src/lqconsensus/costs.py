"""Cost evaluation, optimality-gap matrices and decay certificates.

The distributed controller's cost decomposes as the centralized optimum
plus a quadratic series in the joint (regulated, observer-error) vector;
the series is weighted by the block matrix [[0, M1], [M1', M2]] built here.
The gap Delta J(s) decays geometrically whenever the joint closed loop is
stable, which the decay certificate quantifies as an envelope a_bar *
gamma^(2s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .simulate import Trajectory
from .systems import GlobalErrorSystem


class TailNotConverged(RuntimeError):
    """Trajectory too short: the stage cost has not decayed at the horizon."""

    def __init__(self, tail_cost: float, bound: float):
        super().__init__(
            f"stage cost at horizon is {tail_cost:.3e}; "
            f"estimated missing tail {bound:.3e}"
        )
        self.tail_cost = tail_cost
        self.truncation_bound = bound


@dataclass(frozen=True)
class CostDiffMatrices:
    """Blocks of the cost-difference quadratic form for one design.

    omega = [-B_1 K_1 ... -B_N K_N]; omega1 stacks K_i' R_i K_i
    horizontally; omega2 = omega' P omega; m1 = Phi' P omega - omega1;
    m2 = blockdiag(K_i' R_i K_i) + omega2.
    """

    omega: np.ndarray = field(repr=False)
    omega1: np.ndarray = field(repr=False)
    omega2: np.ndarray = field(repr=False)
    m1: np.ndarray = field(repr=False)
    m2: np.ndarray = field(repr=False)
    form: str = "error"

    def block(self) -> np.ndarray:
        """The [[0, M1], [M1', M2]] matrix weighting the joint vector."""
        d = self.m1.shape[0]
        top = np.hstack([np.zeros((d, d)), self.m1])
        bottom = np.hstack([self.m1.T, self.m2])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class CostBreakdown:
    """Distributed vs centralized cost with the gap series and decay fit."""

    J_star_distributed: float
    J_star_centralized: float
    delta_J: float
    series: np.ndarray = field(repr=False)
    a_bar: float = 0.0
    gamma: float = 0.0
    max_violation: float = 0.0
    truncation_bound: float = 0.0
    series_crosscheck: float = 0.0


def _regulated(traj: Trajectory) -> np.ndarray:
    if traj.method in ("distributed_error", "centralized_error", "traditional"):
        if traj.error_vector is None:
            raise ValueError("trajectory lacks the stacked error record")
        return traj.error_vector
    return traj.flat_states()


def tail_bound(increments: np.ndarray) -> float:
    """Geometric estimate of the cost mass beyond the recorded horizon."""
    c = np.asarray(increments, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    last = c[-1]
    if c.size < 3:
        return float(last)
    r = (c[-1] / c[-3]) ** 0.5 if c[-3] > 0 else 1.0
    if not np.isfinite(r) or r >= 1.0:
        return float("inf")
    return float(last * r / (1.0 - r))


def evaluate_cost(
    traj: Trajectory,
    sys,
    s: int = 0,
    form: str = "quadratic",
    tail_tol: float = 1e-12,
) -> float:
    """Accumulated stage cost from step s, treated as the infinite sum.

    form='quadratic' uses the stacked quadratic weight (Q_tilde or Q_cal);
    form='double_sum' recomputes the state term as the explicit pairwise
    double sum. Raises TailNotConverged when the horizon cuts off a
    non-negligible tail.
    """
    if form not in ("quadratic", "double_sum"):
        raise ValueError(f"unknown form {form!r}")
    T = traj.horizon
    if not 0 <= s < T:
        raise ValueError(f"start step {s} outside horizon {T}")

    error_form = isinstance(sys, GlobalErrorSystem)
    R_list = sys.weights.R_list
    Q = sys.weights.Q
    total = 0.0
    stage = np.empty(T - s)
    for k in range(s, T):
        u = [traj.inputs[i][k] for i in range(traj.n_agents)]
        if form == "quadratic":
            z = _regulated(traj)[k]
            Qmat = sys.Q_tilde if error_form else sys.Q_cal
            c = float(z @ Qmat @ z)
        elif error_form:
            e = traj.error_vector[k]
            c = 0.0
            for t in range(sys.ledger.n_entries):
                eij = e[sys.ledger.entry_slice(t)]
                c += float(eij @ Q @ eij)
        else:
            x = traj.states[k]
            c = 0.0
            for i in range(traj.n_agents):
                for j in range(i + 1, traj.n_agents):
                    d = x[i] - x[j]
                    c += float(d @ Q @ d)
        for ui, R in zip(u, R_list):
            c += float(ui @ R @ ui)
        stage[k - s] = c
        total += c

    if stage.size and stage[-1] > tail_tol * (1.0 + total):
        raise TailNotConverged(float(stage[-1]), tail_bound(stage))
    return total


def cost_difference_matrices(sys, P: np.ndarray, K_blocks) -> CostDiffMatrices:
    """Assemble the optimality-gap matrices from a solved DARE."""
    b_list = sys.input_list
    R_list = sys.weights.R_list
    if len(K_blocks) != len(b_list):
        raise ValueError("need one gain block per agent")
    for i, (K, B) in enumerate(zip(K_blocks, b_list)):
        if K.shape != (B.shape[1], sys.dim):
            raise ValueError(
                f"gain block {i + 1} has shape {K.shape}, "
                f"expected {(B.shape[1], sys.dim)}"
            )
    Phi = sys.A_tilde + sum(b @ k for b, k in zip(b_list, K_blocks))
    omega = np.hstack([-b @ k for b, k in zip(b_list, K_blocks)])
    krk = [k.T @ r @ k for k, r in zip(K_blocks, R_list)]
    omega1 = np.hstack(krk)
    omega2 = omega.T @ P @ omega
    m1 = Phi.T @ P @ omega - omega1
    m2 = sla.block_diag(*krk) + omega2
    form = "error" if isinstance(sys, GlobalErrorSystem) else "state"
    return CostDiffMatrices(omega, omega1, omega2, m1, m2, form)


def _joint_series(traj: Trajectory, mats: CostDiffMatrices) -> np.ndarray:
    if traj.observer_error is None:
        raise ValueError("trajectory has no observer-error record")
    z = _regulated(traj)
    joint = np.hstack([z, traj.observer_error])
    big = mats.block()
    return np.einsum("ki,ij,kj->k", joint, big, joint)


def verify_cost_identity(
    traj: Trajectory,
    P: np.ndarray,
    mats: CostDiffMatrices,
    s: int = 0,
    tail_tol: float = 1e-12,
) -> float:
    """|J_simulated(s) - (z(s)' P z(s) + quadratic series)| for one run.

    Applies to both the error-feedback and state-feedback identities; the
    form is carried by ``mats``.
    """
    T = traj.horizon
    if not 0 <= s < T:
        raise ValueError(f"start step {s} outside horizon {T}")
    if traj.cost_increments is None:
        raise ValueError("trajectory has no stage-cost record")
    stage = traj.cost_increments[s:]
    J_sim = float(stage.sum())
    if not np.isfinite(J_sim):
        raise TailNotConverged(float(stage[-1]), float("inf"))
    if stage.size and stage[-1] > tail_tol * (1.0 + J_sim):
        raise TailNotConverged(float(stage[-1]), tail_bound(stage))
    z_s = _regulated(traj)[s]
    series = _joint_series(traj, mats)[s:T]
    rhs = float(z_s @ P @ z_s) + float(series.sum())
    return abs(J_sim - rhs)


def delta_j_series(
    traj: Trajectory,
    P: np.ndarray,
    mats: CostDiffMatrices,
    rel_tol: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Optimality-gap series Delta J(s) for s = 0..T-1, cross-checked two ways.

    Route one subtracts z(s)' P z(s) from the simulated suffix cost; route
    two sums the quadratic gap series directly. Disagreement beyond rel_tol
    (relative to the gap scale) raises ValueError, as that indicates an
    inconsistent P / gain / trajectory combination.
    """
    if traj.cost_increments is None:
        raise ValueError("trajectory has no stage-cost record")
    T = traj.horizon
    z = _regulated(traj)
    suffix_cost = np.concatenate([np.cumsum(traj.cost_increments[::-1])[::-1], [0.0]])
    quad = np.einsum("ki,ij,kj->k", z, P, z)
    route1 = suffix_cost[:T] - quad[:T]

    gap_terms = _joint_series(traj, mats)[:T]
    route2 = np.cumsum(gap_terms[::-1])[::-1]

    scale = 1.0 + max(abs(route1[0]), abs(route2[0]))
    dev = float(np.abs(route1 - route2).max())
    if dev > rel_tol * scale:
        raise ValueError(
            f"Delta J cross-check failed: routes disagree by {dev:.3e} "
            f"(tolerance {rel_tol * scale:.3e})"
        )
    return route1, dev


def decay_certificate(series: np.ndarray) -> tuple[float, float, float]:
    """Fit Delta J(s) <= a_bar * gamma^(2s); returns (a_bar, gamma, max_violation).

    gamma comes from least squares on the log of the positive tail; a_bar
    is then lifted to dominate every sample, so max_violation <= 0 up to
    float noise. An (effectively) all-zero series returns (0, 0, 0) by
    convention: exact observers leave no gap to certify.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.size < 2:
        raise ValueError("need at least two samples to certify decay")
    peak = float(series.max(initial=0.0))
    floor = max(1e-300, 1e-12 * peak)
    mask = series > floor
    if mask.sum() < 2:
        return 0.0, 0.0, 0.0
    s_idx = np.nonzero(mask)[0]
    logs = np.log(series[mask])
    slope, intercept = np.polyfit(s_idx, logs, 1)
    gamma = float(np.exp(0.5 * slope))
    if gamma <= 0.0 or not np.isfinite(gamma):
        return 0.0, 0.0, float(series.max())
    powers = gamma ** (2.0 * np.arange(series.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(powers > 0, series / powers, -np.inf)
    a_bar = float(max(np.exp(intercept), ratio.max()))
    violation = float((series - a_bar * powers).max())
    return a_bar, gamma, violation
