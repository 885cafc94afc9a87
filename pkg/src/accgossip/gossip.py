"""Node-register gossip protocols: accelerated, pairwise, and heavy-ball.

Each node keeps two local registers (x, v). The accelerated round is the
matrix-form accelerated step specialized to a single incidence row: every
node forms y from its own registers, the activated pair averages its y
values, and the correction (y_i - y_j)/2 moves the pair's v registers in
equal and opposite directions, so the network mean never drifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Graph
from .trace import Trace, default_record_every

METHOD_PAIRWISE = "pairwise"
METHOD_SHB = "shb"
METHOD_ACCGOSSIP_OPT1 = "accgossip-opt1"
METHOD_ACCGOSSIP_OPT2 = "accgossip-opt2"
PROTOCOL_METHODS = (
    METHOD_PAIRWISE,
    METHOD_SHB,
    METHOD_ACCGOSSIP_OPT1,
    METHOD_ACCGOSSIP_OPT2,
)
ACCELERATED_METHODS = (METHOD_ACCGOSSIP_OPT1, METHOD_ACCGOSSIP_OPT2)
DEFAULT_MOMENTUM_BETA = 0.4


@dataclass(frozen=True)
class AgentState:
    """One node's two local registers."""

    x: float
    v: float


@dataclass
class GossipNetworkState:
    """Registers of the whole network plus the global round counter."""

    graph: Graph
    x: np.ndarray
    v: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, graph: Graph, c, v0=None) -> "GossipNetworkState":
        x = np.array(c, dtype=float)
        if x.shape != (graph.n,):
            raise ValueError(f"initial values must have length {graph.n}")
        v = x.copy() if v0 is None else np.array(v0, dtype=float)
        if v.shape != (graph.n,):
            raise ValueError(f"v register must have length {graph.n}")
        return cls(graph=graph, x=x, v=v, k=0)

    def agent(self, node: int) -> AgentState:
        return AgentState(x=float(self.x[node]), v=float(self.v[node]))

    @property
    def agents(self) -> tuple[AgentState, ...]:
        return tuple(AgentState(float(xv), float(vv)) for xv, vv in zip(self.x, self.v))


@dataclass(frozen=True)
class ActivationLog:
    """Sequence of (round, i, j) edge activations, rounds strictly increasing."""

    records: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        records = tuple((int(k), int(i), int(j)) for k, i, j in self.records)
        object.__setattr__(self, "records", records)
        ks = [k for k, _, _ in records]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("rounds must be strictly increasing")

    def __len__(self) -> int:
        return len(self.records)

    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for _, i, j in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for k, i, j in self.records:
                fh.write(f"{k} {i} {j}\n")

    @classmethod
    def read(cls, path) -> "ActivationLog":
        records = []
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ValueError(f"{path}: bad activation line {line!r}")
                records.append((int(parts[0]), int(parts[1]), int(parts[2])))
        return cls(tuple(records))


def _edge_pair(graph: Graph, edge) -> tuple[int, int]:
    graph.edge_row(edge)  # membership check
    i, j = int(edge[0]), int(edge[1])
    return (i, j) if i < j else (j, i)


def acc_gossip_round(state: GossipNetworkState, schedule, edge) -> GossipNetworkState:
    """One accelerated round; mutates and returns the passed state."""
    i, j = _edge_pair(state.graph, edge)
    alpha, beta, gamma = schedule.params(state.k)
    x, v = state.x, state.v
    y = alpha * v + (1.0 - alpha) * x
    yi = float(y[i])
    yj = float(y[j])
    half_diff = 0.5 * (yi - yj)
    v *= beta
    v += (1.0 - beta) * y
    v[i] -= gamma * half_diff
    v[j] += gamma * half_diff
    mean = 0.5 * (yi + yj)
    x[:] = y
    x[i] = mean
    x[j] = mean
    state.k += 1
    return state


def pairwise_gossip_round(state: GossipNetworkState, edge) -> GossipNetworkState:
    """Selected pair averages its x registers; v is untouched."""
    i, j = _edge_pair(state.graph, edge)
    x = state.x
    mean = 0.5 * (float(x[i]) + float(x[j]))
    x[i] = mean
    x[j] = mean
    state.k += 1
    return state


def shb_gossip_round(state: GossipNetworkState, edge,
                     momentum_beta: float = DEFAULT_MOMENTUM_BETA) -> GossipNetworkState:
    """Pairwise averaging plus heavy-ball momentum along the edge.

    v holds each node's previous displacement. The momentum kick uses the
    antisymmetric combination (v_i - v_j)/2 so the pair exchanges equal and
    opposite mass and the network sum is conserved exactly.
    """
    if not 0.0 <= momentum_beta < 1.0:
        raise ValueError("momentum_beta must lie in [0, 1)")
    i, j = _edge_pair(state.graph, edge)
    x, v = state.x, state.v
    xi = float(x[i])
    xj = float(x[j])
    mean = 0.5 * (xi + xj)
    kick = 0.5 * momentum_beta * (float(v[i]) - float(v[j]))
    x[i] = mean + kick
    x[j] = mean - kick
    v[i] = x[i] - xi
    v[j] = x[j] - xj
    state.k += 1
    return state


def run_protocol(graph: Graph, c, method: str, schedule=None, rounds: int = 0,
                 seed=0, momentum_beta: float = DEFAULT_MOMENTUM_BETA,
                 record_every: int | None = None, activation_log: ActivationLog | None = None,
                 stop_below: float | None = None, observer=None,
                 seed_label: int | None = None) -> tuple[Trace, ActivationLog]:
    """Drive one protocol run and return its trace and activation log.

    Edges are sampled uniformly per round from the seeded stream, or taken
    from `activation_log` when replaying. The squared relative error against
    mean(c) is recorded at round 0, every record_every rounds, and at the
    final round. With `stop_below` set, the run ends at the first recorded
    error at or under the threshold. `observer(k, x, v)` is called at every
    recorded round with read-only views.
    """
    if method not in PROTOCOL_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if rounds < 0:
        raise ValueError("rounds must be nonnegative")
    if method in ACCELERATED_METHODS and schedule is None:
        raise ValueError(f"{method} needs a parameter schedule")
    if record_every is None:
        record_every = default_record_every(graph.n, graph.m)
    if record_every < 1:
        raise ValueError("record_every must be positive")

    if activation_log is not None:
        pairs = activation_log.edges()
        for i, j in pairs:
            graph.edge_row((i, j))
        rounds = len(pairs)
    else:
        rng = np.random.default_rng(seed)
        selections = rng.integers(0, graph.m, size=rounds)
        pairs = tuple(graph.edges[int(s)] for s in selections)

    v0 = np.zeros(graph.n) if method == METHOD_SHB else None
    state = GossipNetworkState.start(graph, c, v0)
    c_arr = state.x
    x_star = np.full(graph.n, c_arr.mean())
    diff0 = c_arr - x_star
    denom = float(diff0 @ diff0)

    def rel_err() -> float:
        if denom == 0.0:
            return 0.0
        d = state.x - x_star
        return float(d @ d) / denom

    def notify():
        if observer is not None:
            observer(state.k, state.x, state.v)

    records = [(0, 1.0 if denom > 0.0 else 0.0)]
    used = []
    notify()
    stopped = records[0][1] <= stop_below if stop_below is not None else False
    if not stopped:
        for idx in range(rounds):
            edge = pairs[idx]
            used.append((state.k, edge[0], edge[1]))
            if method == METHOD_PAIRWISE:
                pairwise_gossip_round(state, edge)
            elif method == METHOD_SHB:
                shb_gossip_round(state, edge, momentum_beta)
            else:
                acc_gossip_round(state, schedule, edge)
            k = state.k
            if k % record_every == 0 or k == rounds:
                err = rel_err()
                records.append((k, err))
                notify()
                if stop_below is not None and err <= stop_below:
                    break

    meta = {
        "n": graph.n,
        "m": graph.m,
        "method": method,
        "record_every": record_every,
        "rounds": rounds,
    }
    if schedule is not None:
        meta["schedule"] = schedule.kind
    if method == METHOD_SHB:
        meta["momentum_beta"] = momentum_beta
    label = seed_label if seed_label is not None else _seed_label(seed)
    trace = Trace(method=method, seed=label, records=tuple(records), meta=meta)
    return trace, ActivationLog(tuple(used))


def _seed_label(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    entropy = getattr(seed, "entropy", None)
    if isinstance(entropy, (int, np.integer)):
        return int(entropy)
    return -1
