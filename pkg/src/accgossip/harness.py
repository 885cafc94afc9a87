"""Experiment orchestration: multi-trial runs, aggregation, theoretical
bound checks, and CSV/SVG emission.

A run is a pure function of its config: the starting vector of trial t and
the activation stream of (trial, method) pairs are derived from the master
seed by index, never by execution order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib
from matplotlib.figure import Figure
import numpy as np

from .gossip import (
    DEFAULT_MOMENTUM_BETA,
    METHOD_ACCGOSSIP_OPT1,
    METHOD_ACCGOSSIP_OPT2,
    METHOD_PAIRWISE,
    PROTOCOL_METHODS,
    ActivationLog,
    GossipNetworkState,
    acc_gossip_round,
    pairwise_gossip_round,
    run_protocol,
)
from .kaczmarz import SolverState, accrk_step, option1_schedule, option2_schedule, rk_step
from .seeding import DOMAIN_ACTIVATION, DOMAIN_START
from .spectral import SpectralSummary, TheoreticalRates, summarize
from .topology import Graph, IncidenceSystem, build_system, make_cycle, make_grid, make_rgg
from .trace import AggregateTrace, Trace, aggregate_traces

TOPOLOGIES = ("cycle", "grid", "rgg")
VERIFY_CHECKS = ("rk", "option2")
SVG_HASHSALT = "accgossip"
MIN_VERIFY_TRIALS = 100


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a topology, a method list, and run/verify knobs.

    size is the node count for cycle/rgg and the side length for grid.
    lam feeds the recurrence schedule (default: smallest positive eigenvalue
    of A^T A); mu weights the Lyapunov check (default: same for W).
    """

    topology: str
    size: int
    methods: tuple[str, ...]
    trials: int
    rounds: int
    seed: int
    lam: float | None = None
    mu: float | None = None
    momentum_beta: float = DEFAULT_MOMENTUM_BETA
    record_every: int | None = None
    csv_path: str | None = None
    svg_path: str | None = None
    verify: str = "auto"
    verify_rk_ks: tuple[int, ...] = (10, 25, 50)
    lyapunov_max_k: int = 500

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        methods = tuple(self.methods)
        object.__setattr__(self, "methods", methods)
        if not methods:
            raise ValueError("methods must not be empty")
        for method in methods:
            if method not in PROTOCOL_METHODS:
                raise ValueError(f"unknown method {method!r}")
        if len(set(methods)) != len(methods):
            raise ValueError("duplicate method names")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if not 0.0 <= self.momentum_beta < 1.0:
            raise ValueError("momentum_beta must lie in [0, 1)")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be positive")
        if self.lyapunov_max_k < 0:
            raise ValueError("lyapunov_max_k must be nonnegative")


def build_graph(config: ExperimentConfig) -> Graph:
    if config.topology == "cycle":
        return make_cycle(config.size)
    if config.topology == "grid":
        return make_grid(config.size)
    return make_rgg(config.size, config.seed)


def build_schedules(config: ExperimentConfig, summary: SpectralSummary) -> dict:
    """One schedule object per accelerated method, shared across trials."""
    schedules = {}
    if METHOD_ACCGOSSIP_OPT1 in config.methods:
        lam = config.lam if config.lam is not None else summary.lambda_min_plus_ata
        if not 0.0 < lam <= summary.lambda_min_plus_ata * (1.0 + 1e-12):
            raise ValueError(
                f"lambda must lie in (0, {summary.lambda_min_plus_ata!r}], got {lam!r}")
        schedules[METHOD_ACCGOSSIP_OPT1] = option1_schedule(summary.m, lam)
    if METHOD_ACCGOSSIP_OPT2 in config.methods:
        schedules[METHOD_ACCGOSSIP_OPT2] = option2_schedule(summary)
    return schedules


def resolve_verify(config: ExperimentConfig) -> tuple[str, ...]:
    """Which bound checks a run will perform.

    "auto" turns a check on when its method is present and the trial count
    carries statistical weight; explicit selections are validated instead.
    """
    if config.verify == "none":
        return ()
    if config.verify == "auto":
        checks = []
        if METHOD_PAIRWISE in config.methods and config.trials >= MIN_VERIFY_TRIALS:
            checks.append("rk")
        if METHOD_ACCGOSSIP_OPT2 in config.methods and config.trials >= MIN_VERIFY_TRIALS:
            checks.append("option2")
        return tuple(checks)
    checks = tuple(part.strip() for part in config.verify.split(",") if part.strip())
    for check in checks:
        if check not in VERIFY_CHECKS:
            raise ValueError(f"unknown verify check {check!r}")
        if check == "rk" and METHOD_PAIRWISE not in config.methods:
            raise ValueError("verify=rk needs the pairwise method")
        if check == "option2" and METHOD_ACCGOSSIP_OPT2 not in config.methods:
            raise ValueError("verify=option2 needs the accgossip-opt2 method")
        if config.trials < MIN_VERIFY_TRIALS:
            raise ValueError(
                f"verify={check} needs at least {MIN_VERIFY_TRIALS} trials")
    return checks


@dataclass
class MethodRun:
    method: str
    traces: list[Trace]
    aggregate: AggregateTrace
    snapshots: list[list[tuple[int, np.ndarray, np.ndarray]]] | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    graph: Graph
    system: IncidenceSystem
    summary: SpectralSummary
    runs: dict[str, MethodRun]

    def aggregates(self) -> list[AggregateTrace]:
        return [self.runs[m].aggregate for m in self.config.methods]

    def all_traces(self) -> list[Trace]:
        out = []
        for method in self.config.methods:
            out.extend(self.runs[method].traces)
        return out


def trial_start_vector(seed: int, trial: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(DOMAIN_START, trial)))
    return rng.standard_normal(n)


def activation_stream(seed: int, trial: int, method_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=seed, spawn_key=(DOMAIN_ACTIVATION, trial, method_index))


def run_experiment_detailed(config: ExperimentConfig) -> ExperimentResult:
    graph = build_graph(config)
    system = build_system(graph)
    summary = summarize(system)
    schedules = build_schedules(config, summary)
    checks = resolve_verify(config)
    want_snapshots = "option2" in checks

    traces: dict[str, list[Trace]] = {m: [] for m in config.methods}
    snapshots: dict[str, list] = {}
    if want_snapshots:
        snapshots[METHOD_ACCGOSSIP_OPT2] = []

    for trial in range(config.trials):
        c = trial_start_vector(config.seed, trial, graph.n)
        for mi, method in enumerate(config.methods):
            observer = None
            if want_snapshots and method == METHOD_ACCGOSSIP_OPT2:
                shots: list[tuple[int, np.ndarray, np.ndarray]] = []
                cap = config.lyapunov_max_k

                def observer(k, x, v, _shots=shots, _cap=cap):
                    if k <= _cap:
                        _shots.append((k, x.copy(), v.copy()))

                snapshots[METHOD_ACCGOSSIP_OPT2].append(shots)
            trace, _ = run_protocol(
                graph, c, method,
                schedule=schedules.get(method),
                rounds=config.rounds,
                seed=activation_stream(config.seed, trial, mi),
                momentum_beta=config.momentum_beta,
                record_every=config.record_every,
                observer=observer,
                seed_label=trial,
            )
            trace = Trace(trace.method, trace.seed, trace.records,
                          {**trace.meta, "topology": config.topology,
                           "trials": config.trials, "master_seed": config.seed})
            traces[method].append(trace)

    runs = {}
    for method in config.methods:
        runs[method] = MethodRun(
            method=method,
            traces=traces[method],
            aggregate=aggregate_traces(traces[method]),
            snapshots=snapshots.get(method),
        )
    return ExperimentResult(config=config, graph=graph, system=system,
                            summary=summary, runs=runs)


def run_experiment(config: ExperimentConfig) -> list[AggregateTrace]:
    """Aggregate traces per configured method, in config order."""
    return run_experiment_detailed(config).aggregates()


@dataclass(frozen=True)
class BoundRow:
    k: int
    observed: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class BoundReport:
    """Outcome of one theoretical-bound check across recorded iterations."""

    check: str
    method: str
    trials: int
    epsilon: float
    rows: tuple[BoundRow, ...]
    passed: bool

    def failures(self) -> list[tuple[str, int]]:
        return [(self.method, row.k) for row in self.rows if not row.passed]

    def lines(self) -> list[str]:
        out = [
            f"check={self.check}",
            f"method={self.method}",
            f"trials={self.trials}",
            f"epsilon={self.epsilon:.6g}",
        ]
        for row in self.rows:
            out.append(
                f"k={row.k} observed={row.observed:.6g} bound={row.bound:.6g} "
                f"pass={'true' if row.passed else 'false'}")
        out.append(f"passed={'true' if self.passed else 'false'}")
        return out


def verify_rk_bound(aggregate: AggregateTrace, rate_constants: TheoreticalRates,
                    ks=None) -> BoundReport:
    """Mean squared relative error against rho^k with a 3/sqrt(trials) envelope."""
    if aggregate.trials < MIN_VERIFY_TRIALS:
        raise ValueError(f"bound check needs >= {MIN_VERIFY_TRIALS} trials")
    eps = 3.0 / np.sqrt(aggregate.trials)
    wanted = None if ks is None else set(int(k) for k in ks)
    rows = []
    for k, mean in zip(aggregate.iterations, aggregate.mean):
        if wanted is not None and k not in wanted:
            continue
        bound = rate_constants.rho ** k * (1.0 + eps)
        rows.append(BoundRow(k=k, observed=mean, bound=bound, passed=mean <= bound))
    return BoundReport(
        check="rk-rate",
        method=aggregate.method,
        trials=aggregate.trials,
        epsilon=float(eps),
        rows=tuple(rows),
        passed=all(row.passed for row in rows),
    )


@dataclass(frozen=True)
class LyapunovSeries:
    """Psi_k = ||v-x*||^2 weighted by the W pseudoinverse + ||x-x*||^2 / mu."""

    iterations: tuple[int, ...]
    values: tuple[float, ...]
    mu: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        vals = np.asarray(self.values)
        if not np.isfinite(vals).all() or (vals < 0.0).any():
            raise ValueError("Lyapunov values must be finite and nonnegative")


def lyapunov_series(snapshots, gram: np.ndarray, mu: float) -> LyapunovSeries:
    """Evaluate Psi over one trial's (k, x, v) snapshots.

    The first snapshot must be round 0, where x = c fixes the consensus
    point x* = mean(c).
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if not snapshots:
        raise ValueError("no snapshots")
    k0, x0, _ = snapshots[0]
    if k0 != 0:
        raise ValueError("snapshots must start at round 0")
    x_star = float(np.mean(x0))
    ks = []
    vals = []
    for k, x, v in snapshots:
        ev = v - x_star
        ex = x - x_star
        psi = float(ev @ gram @ ev) + float(ex @ ex) / mu
        ks.append(int(k))
        vals.append(max(psi, 0.0))
    return LyapunovSeries(iterations=tuple(ks), values=tuple(vals), mu=mu)


LYAPUNOV_DUST = 1e-20


def verify_option2_bound(runs, summary: SpectralSummary, mu: float | None = None,
                         gram: np.ndarray | None = None) -> BoundReport:
    """Mean Psi_k against the geometric Option-2 bound.

    runs: per-trial snapshot lists [(k, x, v), ...] from accgossip-opt2.
    gram is the W pseudoinverse (computed once per topology); mu defaults
    to the smallest positive eigenvalue of W. The comparison allows
    roundoff dust of LYAPUNOV_DUST relative to mean Psi_0: on topologies
    whose rate clamps to zero the bound collapses exactly while float
    execution leaves ~1e-31 residue in the registers.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no snapshot runs")
    if gram is None:
        raise ValueError("gram (W pseudoinverse) is required")
    if mu is None:
        mu = summary.lambda_min_plus_w
    series = [lyapunov_series(run, gram, mu) for run in runs]
    grid = series[0].iterations
    for s in series:
        if s.iterations != grid:
            raise ValueError("snapshot runs recorded on different grids")
    values = np.array([s.values for s in series])
    mean_psi = values.mean(axis=0)
    rate = max(0.0, 1.0 - float(np.sqrt(summary.lambda_min_plus_w / summary.nu)))
    eps = 3.0 / np.sqrt(len(runs))
    dust = LYAPUNOV_DUST * mean_psi[0]
    rows = []
    for idx, k in enumerate(grid):
        bound = rate ** k * mean_psi[0] * (1.0 + eps)
        rows.append(BoundRow(k=int(k), observed=float(mean_psi[idx]), bound=float(bound),
                             passed=mean_psi[idx] <= bound + dust))
    return BoundReport(
        check="option2-lyapunov",
        method=METHOD_ACCGOSSIP_OPT2,
        trials=len(runs),
        epsilon=float(eps),
        rows=tuple(rows),
        passed=all(row.passed for row in rows),
    )


def emit_csv(traces, path) -> None:
    """Write one data row per recorded point: method,seed,iteration,relative_error."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to emit")
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "seed", "iteration", "relative_error"])
        for trace in traces:
            for k, err in trace.records:
                writer.writerow([trace.method, trace.seed, k, repr(err)])


def emit_svg(traces, path) -> None:
    """Log-y chart of per-method mean error, byte-deterministic for fixed input."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to emit")
    by_method: dict[str, list] = {}
    for trace in traces:
        by_method.setdefault(trace.method, []).append(trace)

    fig = Figure(figsize=(7.5, 4.8))
    ax = fig.add_subplot()
    for method, group in by_method.items():
        grid = tuple(group[0].iterations.tolist())
        for t in group:
            if tuple(t.iterations.tolist()) != grid:
                raise ValueError(f"{method}: traces recorded on different grids")
        means = np.stack([t.errors for t in group]).mean(axis=0)
        ax.plot(grid, means, label=method, linewidth=1.4)
    meta = traces[0].meta
    title = f"{meta.get('topology', 'graph')} n={meta.get('n', '?')}"
    if "trials" in meta:
        title += f", {meta['trials']} trials"
    ax.set_title(title)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.grid(alpha=0.3)
    ax.legend()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def trajectory_gap(system: IncidenceSystem, schedule, c, log: ActivationLog) -> float:
    """Largest per-coordinate gap between node and matrix trajectories.

    Both engines replay the same activation log; the gap covers both
    registers at every round. With schedule=None the pair is pairwise
    gossip vs plain RK projection (x register only).
    """
    graph = system.graph
    node = GossipNetworkState.start(graph, c)
    worst = 0.0
    if schedule is None:
        x = np.asarray(c, dtype=float).copy()
        for _, i, j in log.records:
            row = graph.edge_row((i, j))
            pairwise_gossip_round(node, (i, j))
            x = rk_step(system, x, row)
            worst = max(worst, float(np.abs(node.x - x).max()))
        return worst
    mat = SolverState.start(c)
    for _, i, j in log.records:
        row = graph.edge_row((i, j))
        acc_gossip_round(node, schedule, (i, j))
        mat = accrk_step(system, mat, schedule, row)
        worst = max(worst,
                    float(np.abs(node.x - mat.x).max()),
                    float(np.abs(node.v - mat.v).max()))
    return worst


def measure_rounds_to_error(graph: Graph, methods, schedules, *, threshold: float,
                            trials: int, max_rounds: int, seed: int,
                            momentum_beta: float = DEFAULT_MOMENTUM_BETA) -> dict[str, float]:
    """Mean rounds each method needs to reach the error threshold.

    Trials that never reach it within max_rounds count as max_rounds.
    """
    totals = {method: 0.0 for method in methods}
    for trial in range(trials):
        c = trial_start_vector(seed, trial, graph.n)
        for mi, method in enumerate(methods):
            trace, _ = run_protocol(
                graph, c, method,
                schedule=schedules.get(method),
                rounds=max_rounds,
                seed=activation_stream(seed, trial, mi),
                momentum_beta=momentum_beta,
                record_every=1,
                stop_below=threshold,
                seed_label=trial,
            )
            hit = trace.first_below(threshold)
            totals[method] += float(hit) if hit is not None else float(max_rounds)
    return {method: totals[method] / trials for method in methods}
