"""Scenario-driven pipeline and command-line interface.

A scenario JSON file describes one experiment: agent dynamics, the
communication graph, cost weights, requested methods and rollout options.
The pipeline builds the stacked systems, solves the Riccati equations,
synthesizes observer gains, simulates every requested method and emits a
comparison report (JSON plus CSV tables).

Agent indices in scenario files are 0-based.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import backend
from .costs import (
    CostBreakdown,
    TailNotConverged,
    cost_difference_matrices,
    decay_certificate,
    delta_j_series,
    tail_bound,
    verify_cost_identity,
)
from .graph import DirectedGraph, is_strongly_connected
from .observers import (
    ObserverGains,
    SynthesisNonConvergence,
    SynthesisOptions,
    SynthesisReport,
    synthesize_gains,
)
from .riccati import DareProblem, agent_gain_blocks, solve_dare, spectral_radius
from .simulate import (
    METHODS,
    BaselineDesignError,
    ConsensusMetrics,
    SimulationConfig,
    Trajectory,
    consensus_metrics,
    design_baseline_gain,
    simulate_centralized,
    simulate_distributed_error,
    simulate_distributed_state,
    simulate_traditional,
    traditional_error_matrix,
)
from .systems import (
    AgentDynamics,
    CostWeights,
    build_error_system,
    build_state_system,
)

DEFAULT_HORIZON = 200
DEFAULT_THRESHOLD = 1e-3
DEFAULT_REPORT_STEPS = (0, 1, 3, 5, 7, 9, 11, 13, 15, 17, 19)


class ParseError(ValueError):
    """Scenario file is syntactically or structurally invalid."""


class DimensionError(ValueError):
    """A scenario matrix has inconsistent dimensions."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage label."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    dynamics: AgentDynamics
    graph: DirectedGraph
    weights: CostWeights
    methods: tuple[str, ...]
    horizon: int = DEFAULT_HORIZON
    x0: np.ndarray | None = None
    observer_init: np.ndarray | str | None = None
    measurement_error: list[np.ndarray] | None = None
    measurement_state: list[np.ndarray] | None = None
    synthesis: SynthesisOptions = field(default_factory=SynthesisOptions)
    baseline_F: np.ndarray | None = None
    consensus_threshold: float = DEFAULT_THRESHOLD
    report_steps: tuple[int, ...] = DEFAULT_REPORT_STEPS
    notes: str = ""


@dataclass
class MethodResult:
    method: str
    trajectory: Trajectory
    metrics: ConsensusMetrics
    rho: float
    spectral: dict
    norm_table: list[float]
    cost: CostBreakdown | None = None
    identity_residual: float | None = None
    feedback_gain_blocks: list[np.ndarray] | None = None
    observer_gains: ObserverGains | None = None
    synthesis: SynthesisReport | None = None


@dataclass
class RunReport:
    scenario: str
    report_steps: tuple[int, ...]
    methods: dict[str, MethodResult]
    warnings: list[str]
    notes: str = ""


def _matrix(obj, name: str) -> np.ndarray:
    try:
        M = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {name!r} is not a numeric array: {exc}") from None
    return np.atleast_2d(M)


def load_scenario(path) -> ScenarioSpec:
    """Parse and validate one scenario JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return scenario_from_dict(raw, default_name=path.stem)


def scenario_from_dict(raw: dict, default_name: str = "scenario") -> ScenarioSpec:
    if not isinstance(raw, dict):
        raise ParseError("scenario root must be a JSON object")
    for key in ("dynamics", "graph", "weights", "methods"):
        if key not in raw:
            raise ParseError(f"missing required field {key!r}")

    dyn_raw = raw["dynamics"]
    A = _matrix(dyn_raw.get("A"), "dynamics.A")
    if "B_list" in dyn_raw:
        B_list = [_matrix(B, f"dynamics.B_list[{i}]") for i, B in enumerate(dyn_raw["B_list"])]
    elif "B" in dyn_raw:
        graph_n = raw["graph"].get("n")
        if not isinstance(graph_n, int):
            raise ParseError("graph.n must be an integer")
        B_list = [_matrix(dyn_raw["B"], "dynamics.B")] * graph_n
    else:
        raise ParseError("dynamics needs 'B' or 'B_list'")
    try:
        dynamics = AgentDynamics(A, tuple(B_list))
    except ValueError as exc:
        raise DimensionError(f"dynamics: {exc}") from None

    graph_raw = raw["graph"]
    n = graph_raw.get("n")
    if not isinstance(n, int):
        raise ParseError("graph.n must be an integer")
    W = np.zeros((n, n)) if n > 0 else np.zeros((0, 0))
    for k, edge in enumerate(graph_raw.get("edges", [])):
        try:
            j, i = int(edge["from"]), int(edge["to"])
            wgt = float(edge.get("w", 1.0))
        except (KeyError, TypeError, ValueError):
            raise ParseError(
                f"graph.edges[{k}] must look like {{'from': j, 'to': i, 'w': w}}"
            ) from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"graph.edges[{k}] references agent outside 0..{n - 1}")
        W[i, j] = wgt
    try:
        graph = DirectedGraph(W)
    except ValueError as exc:
        raise DimensionError(f"graph: {exc}") from None
    if graph.n_agents != dynamics.n_agents:
        raise DimensionError(
            f"graph has {graph.n_agents} agents but dynamics defines "
            f"{dynamics.n_agents}"
        )

    w_raw = raw["weights"]
    Q = _matrix(w_raw.get("Q"), "weights.Q")
    if "R_list" in w_raw:
        R_list = [_matrix(R, f"weights.R_list[{i}]") for i, R in enumerate(w_raw["R_list"])]
    elif "R" in w_raw:
        R_list = [_matrix(w_raw["R"], "weights.R")] * n
    else:
        raise ParseError("weights needs 'R' or 'R_list'")
    try:
        weights = CostWeights(Q, tuple(R_list))
    except ValueError as exc:
        raise DimensionError(f"weights: {exc}") from None

    methods = raw["methods"]
    if not isinstance(methods, list) or not methods:
        raise ParseError("methods must be a non-empty list")
    for m in methods:
        if m not in METHODS:
            raise ParseError(f"unknown method {m!r}; choose from {METHODS}")

    horizon = raw.get("horizon", DEFAULT_HORIZON)
    if not isinstance(horizon, int) or horizon < 1:
        raise ParseError("horizon must be a positive integer")

    x0 = None
    if raw.get("x0") is not None:
        x0 = _matrix(raw["x0"], "x0")
        if x0.shape != (n, dynamics.n):
            raise DimensionError(
                f"x0 has shape {x0.shape}, expected {(n, dynamics.n)}"
            )

    observer_init = raw.get("observer_init")
    if observer_init is not None and not isinstance(observer_init, str):
        observer_init = _matrix(observer_init, "observer_init")

    plan_raw = raw.get("measurement_plan") or {}
    if not isinstance(plan_raw, dict):
        raise ParseError("measurement_plan must be an object with 'error'/'state'")
    meas_err = meas_state = None
    if plan_raw.get("error") is not None:
        meas_err = [
            _matrix(H, f"measurement_plan.error[{i}]")
            for i, H in enumerate(plan_raw["error"])
        ]
    if plan_raw.get("state") is not None:
        meas_state = [
            _matrix(C, f"measurement_plan.state[{i}]")
            for i, C in enumerate(plan_raw["state"])
        ]

    synth_raw = raw.get("synthesis") or {}
    synthesis = SynthesisOptions(
        max_iters=int(synth_raw.get("max_iters", 5000)),
        tol=float(synth_raw.get("tol", 1e-6)),
        patience=int(synth_raw.get("patience", 50)),
        seed=synth_raw.get("seed"),
    )

    baseline_F = None
    if raw.get("baseline_F") is not None:
        baseline_F = _matrix(raw["baseline_F"], "baseline_F")

    threshold = float(raw.get("consensus_threshold", DEFAULT_THRESHOLD))
    steps = tuple(int(s) for s in raw.get("report_steps", DEFAULT_REPORT_STEPS))
    if any(s < 0 or s > horizon for s in steps):
        raise ParseError("report_steps must lie within [0, horizon]")

    return ScenarioSpec(
        name=str(raw.get("name", default_name)),
        dynamics=dynamics,
        graph=graph,
        weights=weights,
        methods=tuple(methods),
        horizon=horizon,
        x0=x0,
        observer_init=observer_init,
        measurement_error=meas_err,
        measurement_state=meas_state,
        synthesis=synthesis,
        baseline_F=baseline_F,
        consensus_threshold=threshold,
        report_steps=steps,
        notes=str(raw.get("notes", "")),
    )


def _default_x0(spec: ScenarioSpec) -> np.ndarray:
    if spec.x0 is not None:
        return spec.x0
    # Deterministic spread initial condition when the scenario omits x0.
    N, n = spec.dynamics.n_agents, spec.dynamics.n
    base = np.arange(1, N * n + 1, dtype=np.float64).reshape(N, n)
    return base / base.max() - 0.5


def run_pipeline(spec: ScenarioSpec) -> RunReport:
    """Execute every requested method and collect the comparison report."""
    warn_list: list[str] = []
    results: dict[str, MethodResult] = {}
    dyn, g, w = spec.dynamics, spec.graph, spec.weights
    x0 = _default_x0(spec)

    if not is_strongly_connected(g):
        warn_list.append(
            "graph is not strongly connected; consensus is not guaranteed"
        )

    need_error = any(
        m in spec.methods for m in ("distributed_error", "centralized_error")
    )
    need_state = any(
        m in spec.methods for m in ("distributed_state", "centralized_state")
    )

    sys_e = dare_e = Ke_blocks = None
    if need_error:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sys_e = _stage("build_error_system", build_error_system,
                           dyn, g, w, spec.measurement_error)
        prob = DareProblem(sys_e.A_tilde, sys_e.B_bar, sys_e.Q_tilde, sys_e.R_blk)
        dare_e = _stage("solve_dare_error", solve_dare, prob)
        if not dare_e.is_positive_definite:
            warn_list.append(
                "error-system DARE solution is only positive semidefinite "
                f"(min eigenvalue {dare_e.min_eigenvalue:.3e})"
            )
        Ke_blocks = agent_gain_blocks(dare_e.gain, dyn.m_list)

    sys_s = dare_s = K_blocks = None
    if need_state:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sys_s = _stage("build_state_system", build_state_system,
                           dyn, g, w, spec.measurement_state)
        prob = DareProblem(sys_s.A_tilde, sys_s.B_tilde, sys_s.Q_cal, sys_s.R_blk)
        dare_s = _stage("solve_dare_state", solve_dare, prob)
        if not dare_s.is_positive_definite:
            warn_list.append(
                "state-system DARE solution is only positive semidefinite "
                f"(min eigenvalue {dare_s.min_eigenvalue:.3e})"
            )
        K_blocks = agent_gain_blocks(dare_s.gain, dyn.m_list)

    for method in spec.methods:
        if method == "distributed_error":
            results[method] = _run_distributed(
                spec, x0, sys_e, dare_e, Ke_blocks, "error", warn_list
            )
        elif method == "distributed_state":
            results[method] = _run_distributed(
                spec, x0, sys_s, dare_s, K_blocks, "state", warn_list
            )
        elif method == "centralized_error":
            results[method] = _run_centralized(spec, x0, sys_e, dare_e, "error")
        elif method == "centralized_state":
            results[method] = _run_centralized(spec, x0, sys_s, dare_s, "state")
        elif method == "traditional":
            res = _run_traditional(spec, x0, warn_list)
            if res is not None:
                results[method] = res

    if not results:
        raise PipelineError(
            "run_pipeline", RuntimeError("no requested method produced results")
        )
    return RunReport(spec.name, spec.report_steps, results, warn_list, spec.notes)


def _stage(label, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        raise PipelineError(label, exc) from exc


def _norm_table(traj: Trajectory, steps) -> list[float]:
    norms = np.linalg.norm(traj.states[:, 0, :], axis=1)
    return [float(norms[min(s, len(norms) - 1)]) for s in steps]


def _run_distributed(spec, x0, sys_, dare, gain_blocks, form, warn_list):
    method = f"distributed_{form}"
    try:
        gains, synth = _stage(
            f"synthesis_{form}",
            synthesize_gains,
            sys_, gain_blocks, form, spec.synthesis,
        )
    except PipelineError as exc:
        if isinstance(exc.cause, SynthesisNonConvergence):
            gains, synth = exc.cause.gains, exc.cause.report
            warn_list.append(
                f"{method}: synthesis stopped at iteration budget "
                f"(sigma_max {synth.rho_star:.4f}); using best-so-far gains"
            )
        else:
            raise
    if synth.spectral_radius >= 1.0:
        warn_list.append(
            f"{method}: observer-error matrix is unstable "
            f"(rho = {synth.spectral_radius:.4f} >= 1); observers may diverge"
        )

    cfg = SimulationConfig(spec.horizon, x0, method, spec.observer_init)
    sim = simulate_distributed_error if form == "error" else simulate_distributed_state
    traj = _stage(f"simulate_{method}", sim, spec.dynamics, sys_, gain_blocks, gains, cfg)

    mats = cost_difference_matrices(sys_, dare.P, gain_blocks)
    cost = identity = None
    try:
        # a Delta-J cross-check failure (ValueError) is a hard error: it
        # means P, the gains and the trajectory are mutually inconsistent
        identity = _stage(
            f"cost_identity_{form}", verify_cost_identity, traj, dare.P, mats, 0
        )
        series, dev = _stage(
            f"delta_j_series_{form}", delta_j_series, traj, dare.P, mats
        )
        a_bar, gamma, violation = decay_certificate(series)
        z0 = traj.error_vector[0] if form == "error" else traj.flat_states()[0]
        j_central = float(z0 @ dare.P @ z0)
        j_dist = float(traj.cost_increments.sum())
        cost = CostBreakdown(
            J_star_distributed=j_dist,
            J_star_centralized=j_central,
            delta_J=j_dist - j_central,
            series=series,
            a_bar=a_bar,
            gamma=gamma,
            max_violation=violation,
            truncation_bound=tail_bound(traj.cost_increments),
            series_crosscheck=dev,
        )
    except PipelineError as exc:
        if isinstance(exc.cause, TailNotConverged):
            # diverging or truncated runs carry no meaningful cost figures
            warn_list.append(f"{method}: cost analysis skipped ({exc.cause})")
        else:
            raise

    phi_rho = spectral_radius(
        sys_.A_tilde + sum(b @ k for b, k in zip(sys_.input_list, gain_blocks))
    )
    return MethodResult(
        method=method,
        trajectory=traj,
        metrics=consensus_metrics(traj, spec.consensus_threshold),
        rho=synth.spectral_radius,
        spectral={
            "rho_closed_loop": phi_rho,
            "rho_observer": synth.spectral_radius,
            "sigma_bound": synth.rho_star,
            "dare_min_eigenvalue": dare.min_eigenvalue,
            "dare_residual": dare.residual,
        },
        norm_table=_norm_table(
            traj, spec.report_steps
        ),
        cost=cost,
        identity_residual=identity,
        feedback_gain_blocks=gain_blocks,
        observer_gains=gains,
        synthesis=synth,
    )


def _run_centralized(spec, x0, sys_, dare, form):
    method = f"centralized_{form}"
    cfg = SimulationConfig(spec.horizon, x0, method)
    traj = _stage(
        f"simulate_{method}", simulate_centralized, spec.dynamics, sys_, dare.gain, cfg
    )
    phi_rho = spectral_radius(
        sys_.A_tilde + (sys_.B_bar if form == "error" else sys_.B_tilde) @ dare.gain
    )
    return MethodResult(
        method=method,
        trajectory=traj,
        metrics=consensus_metrics(traj, spec.consensus_threshold),
        rho=phi_rho,
        spectral={
            "rho_closed_loop": phi_rho,
            "dare_min_eigenvalue": dare.min_eigenvalue,
            "dare_residual": dare.residual,
        },
        norm_table=_norm_table(traj, spec.report_steps),
        feedback_gain_blocks=agent_gain_blocks(dare.gain, spec.dynamics.m_list),
    )


def _run_traditional(spec, x0, warn_list):
    """Baseline run; returns None (with a warning) when the protocol is refused."""
    try:
        if spec.baseline_F is not None:
            F = spec.baseline_F
        else:
            F = _stage(
                "design_baseline", design_baseline_gain,
                spec.dynamics, spec.graph, spec.weights,
            )
        cfg = SimulationConfig(spec.horizon, x0, "traditional")
        traj = _stage(
            "simulate_traditional", simulate_traditional,
            spec.dynamics, spec.graph, F, cfg, spec.weights,
        )
    except PipelineError as exc:
        if isinstance(exc.cause, BaselineDesignError):
            warn_list.append(f"traditional method skipped: {exc.cause}")
            return None
        raise
    # The observer-error radius column does not exist for this method; we
    # report the spectral radius of the induced ledger-error map instead.
    err_mat = traditional_error_matrix(spec.dynamics, spec.graph, F)
    rho = spectral_radius(err_mat)
    return MethodResult(
        method="traditional",
        trajectory=traj,
        metrics=consensus_metrics(traj, spec.consensus_threshold),
        rho=rho,
        spectral={"rho_error_map": rho, "baseline_F": F.tolist()},
        norm_table=_norm_table(traj, spec.report_steps),
    )


# ---------------------------------------------------------------------------
# Export


def report_to_dict(report: RunReport) -> dict:
    out = {
        "scenario": report.scenario,
        "backend": backend.backend_name(),
        "notes": report.notes,
        "warnings": list(report.warnings),
        "report_steps": list(report.report_steps),
        "methods": {},
    }
    for name, res in report.methods.items():
        m = {
            "settling_step": res.metrics.settling_step,
            "consensus_threshold": res.metrics.threshold,
            "rho": res.rho,
            "spectral": {
                k: (v if not isinstance(v, float) else float(v))
                for k, v in res.spectral.items()
            },
            "norm_table": res.norm_table,
        }
        if res.feedback_gain_blocks is not None:
            m["feedback_gain_blocks"] = [k.tolist() for k in res.feedback_gain_blocks]
        if res.observer_gains is not None:
            m["observer_gains"] = [g.tolist() for g in res.observer_gains.gains]
        if res.synthesis is not None:
            m["synthesis"] = {
                "sigma_bound": res.synthesis.rho_star,
                "rho_observer": res.synthesis.spectral_radius,
                "iterations": res.synthesis.iterations,
                "converged": res.synthesis.converged,
            }
        if res.identity_residual is not None:
            m["identity_residual"] = res.identity_residual
        if res.cost is not None:
            m["cost"] = {
                "J_star_distributed": res.cost.J_star_distributed,
                "J_star_centralized": res.cost.J_star_centralized,
                "delta_J": res.cost.delta_J,
                "delta_J_series": np.asarray(res.cost.series)[:100].tolist(),
                "decay": {"a_bar": res.cost.a_bar, "gamma": res.cost.gamma},
                "max_violation": res.cost.max_violation,
                "truncation_bound": res.cost.truncation_bound,
                "series_crosscheck": res.cost.series_crosscheck,
            }
        out["methods"][name] = m
    return out


def _trajectory_rows(traj: Trajectory):
    T1, N, n = traj.states.shape
    m_max = max(u.shape[1] for u in traj.inputs)
    obs_dim = traj.observer_states.shape[2] if traj.observer_states is not None else 0
    header = (
        ["k", "agent"]
        + [f"x{c}" for c in range(n)]
        + [f"u{c}" for c in range(m_max)]
        + [f"obs{c}" for c in range(obs_dim)]
        + ["stage_cost"]
    )
    yield header
    for k in range(T1):
        for i in range(N):
            row = [k, i] + [repr(float(v)) for v in traj.states[k, i]]
            if k < T1 - 1:
                u = traj.inputs[i][k]
                row += [repr(float(v)) for v in u] + [""] * (m_max - len(u))
            else:
                row += [""] * m_max
            if obs_dim:
                row += [repr(float(v)) for v in traj.observer_states[i, k]]
            if traj.cost_increments is not None and k < T1 - 1:
                row += [repr(float(traj.cost_increments[k]))]
            else:
                row += [""]
            yield row


def export_report(report: RunReport, out_dir, fmt: str = "json,csv") -> list[Path]:
    """Write report.json, per-method trajectory CSVs and a comparison table.

    Returns the list of written paths. Output is byte-deterministic for a
    given report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = set(fmt.split(","))
    written: list[Path] = []

    if "json" in kinds:
        path = out_dir / "report.json"
        path.write_text(
            json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
        )
        written.append(path)

    if "csv" in kinds:
        for name, res in sorted(report.methods.items()):
            path = out_dir / f"{name}_trajectory.csv"
            with path.open("w", newline="") as fh:
                csv.writer(fh).writerows(_trajectory_rows(res.trajectory))
            written.append(path)

        path = out_dir / "comparison.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["method", "rho"] + [f"step{k}" for k in report.report_steps]
            )
            for name, res in sorted(report.methods.items()):
                writer.writerow(
                    [name, repr(res.rho)] + [repr(v) for v in res.norm_table]
                )
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# CLI


def _apply_overrides(spec: ScenarioSpec, args) -> ScenarioSpec:
    changes = {}
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.seed is not None:
        changes["synthesis"] = SynthesisOptions(
            max_iters=spec.synthesis.max_iters,
            tol=spec.synthesis.tol,
            patience=spec.synthesis.patience,
            seed=args.seed,
        )
    return replace(spec, **changes) if changes else spec


def _cmd_run(args) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    report = run_pipeline(spec)
    out = Path(args.out) if args.out else Path(f"{spec.name}_out")
    written = export_report(report, out, args.format)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for path in written:
        print(path)
    return 0


def _cmd_compare(args) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    report = run_pipeline(spec)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    cols = ["method", "rho", "settle"] + [f"step{k}" for k in report.report_steps]
    print("  ".join(f"{c:>12}" for c in cols))
    for name, res in sorted(report.methods.items()):
        settle = res.metrics.settling_step
        cells = [name, f"{res.rho:.4f}", "-" if settle is None else str(settle)]
        cells += [f"{v:.4f}" for v in res.norm_table]
        print("  ".join(f"{c:>12}" for c in cells))
    if args.out:
        export_report(report, Path(args.out), args.format)
    return 0


def _cmd_synth(args) -> int:
    spec = _apply_overrides(load_scenario(args.scenario), args)
    wanted = [m for m in spec.methods if m.startswith("distributed")]
    if not wanted:
        print("scenario requests no distributed method; nothing to synthesize",
              file=sys.stderr)
        return 1
    report = run_pipeline(replace(spec, methods=tuple(wanted)))
    payload = {}
    for name, res in report.methods.items():
        payload[name] = {
            "feedback_gain_blocks": [k.tolist() for k in res.feedback_gain_blocks],
            "observer_gains": [g.tolist() for g in res.observer_gains.gains],
            "sigma_bound": res.synthesis.rho_star,
            "rho_observer": res.synthesis.spectral_radius,
            "iterations": res.synthesis.iterations,
            "converged": res.synthesis.converged,
        }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gains.json").write_text(text + "\n")
        print(out / "gains.json")
    else:
        print(text)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqconsensus",
        description="Observer-based LQ-optimal consensus: synthesis and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("run", _cmd_run, "run the full pipeline and export reports"),
        ("compare", _cmd_compare, "run all requested methods and print a table"),
        ("synth", _cmd_synth, "compute feedback and observer gains only"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="path to a scenario JSON file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--horizon", type=int, default=None,
                       help="override the scenario horizon")
        p.add_argument("--seed", type=int, default=None,
                       help="override the synthesis seed")
        p.add_argument("--format", default="json,csv",
                       choices=["json", "csv", "json,csv"],
                       help="which report artifacts to write")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
